//! End-of-run performance counters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePerf {
    pub instance_id: usize,
    pub type_name: String,
    pub tasks_completed: u64,
    /// Cycles the instance was held by tasks (grant start to completion).
    pub busy_cycles: u64,
    pub compute_cycles: u64,
    /// Miss-handling stall cycles attributed to this instance's tasks.
    pub stall_cycles: u64,
    /// compute / busy, in [0, 1]; 0 when never busy.
    pub compute_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub total_cycles: u64,
    pub tasks_completed: u64,
    pub instances: Vec<InstancePerf>,
    pub tlb_accesses: u64,
    pub tlb_misses: u64,
    pub miss_handling_cycles: u64,
    pub invalidation_cycles: u64,
    pub pages_transferred: u64,
    pub bytes_total: u64,
    pub dmac_bytes: Vec<u64>,
    /// bytes_total / (total_cycles / acc_clock_hz); 0 for an empty run.
    pub achieved_bandwidth_bytes_per_sec: f64,
}

impl PerfReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aggregate compute ratio: total compute over total busy cycles.
    pub fn aggregate_compute_ratio(&self) -> f64 {
        let busy: u64 = self.instances.iter().map(|i| i.busy_cycles).sum();
        let compute: u64 = self.instances.iter().map(|i| i.compute_cycles).sum();
        if busy == 0 {
            0.0
        } else {
            compute as f64 / busy as f64
        }
    }

    pub fn busy_cycles_total(&self) -> u64 {
        self.instances.iter().map(|i| i.busy_cycles).sum()
    }

    pub fn compute_cycles_total(&self) -> u64 {
        self.instances.iter().map(|i| i.compute_cycles).sum()
    }

    pub fn stall_cycles_total(&self) -> u64 {
        self.instances.iter().map(|i| i.stall_cycles).sum()
    }

    /// Header for the one-row CSV rendering. `dmac_bytes` packs the per-DMAC
    /// byte counts as a `;`-joined list so the width stays fixed.
    pub fn csv_header() -> Vec<&'static str> {
        vec![
            "total_cycles",
            "tasks_completed",
            "tlb_accesses",
            "tlb_misses",
            "miss_handling_cycles",
            "invalidation_cycles",
            "pages_transferred",
            "bytes_total",
            "achieved_bandwidth_bytes_per_sec",
            "busy_cycles_total",
            "compute_cycles_total",
            "stall_cycles_total",
            "compute_ratio",
            "dmac_bytes",
        ]
    }

    pub fn csv_record(&self) -> Vec<String> {
        let dmac = self
            .dmac_bytes
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.total_cycles.to_string(),
            self.tasks_completed.to_string(),
            self.tlb_accesses.to_string(),
            self.tlb_misses.to_string(),
            self.miss_handling_cycles.to_string(),
            self.invalidation_cycles.to_string(),
            self.pages_transferred.to_string(),
            self.bytes_total.to_string(),
            format!("{:.3}", self.achieved_bandwidth_bytes_per_sec),
            self.busy_cycles_total().to_string(),
            self.compute_cycles_total().to_string(),
            self.stall_cycles_total().to_string(),
            format!("{:.6}", self.aggregate_compute_ratio()),
            dmac,
        ]
    }
}

/// Counter snapshot taken between events via `Simulation::counters`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub tlb_accesses: u64,
    pub tlb_misses: u64,
    pub miss_handling_cycles: u64,
    pub pages_transferred: u64,
    pub dmac_bytes: Vec<u64>,
}
