//! Platform timing model.
//!
//! Defaults mirror the modeled SoC: a 100 MHz accelerator plane beside a
//! 667 MHz dual-core CPU, four high-performance DRAM ports versus one
//! accelerator-coherent LLC port, and measured software TLB-miss handling
//! costs of 6.41 us per miss through kernel APIs or 0.69 us through a
//! dedicated page-table walker. Latency and throughput numbers other than
//! the miss penalties are documented model choices, overridable with
//! `--set key=value`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::spec::PAGE_BYTES;

/// How TLB misses are resolved in system software.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissMode {
    KernelApi,
    Pgtwalk,
}

impl std::str::FromStr for MissMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kernel_api" => Ok(MissMode::KernelApi),
            "pgtwalk" => Ok(MissMode::Pgtwalk),
            other => Err(format!("unknown miss mode `{other}`")),
        }
    }
}

/// Where accelerator DMA is kept coherent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coherency {
    /// Through the accelerator-coherent port into the last-level cache.
    Llc,
    /// Straight to DRAM; overlapping cache lines are invalidated in software.
    Dram,
}

impl std::str::FromStr for Coherency {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "llc" => Ok(Coherency::Llc),
            "dram" => Ok(Coherency::Dram),
            other => Err(format!("unknown coherency `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformModel {
    pub acc_clock_hz: u64,
    pub cpu_clock_hz: u64,
    /// High-performance physical ports to DRAM.
    pub dram_ports: u32,
    /// Accelerator-coherent ports into the LLC.
    pub llc_ports: u32,
    pub bytes_per_cycle_per_port: u64,
    pub dram_latency_cycles: u64,
    pub llc_latency_cycles: u64,
    pub invalidate_cycles_per_page: u64,
    pub miss_penalty_kernel_api_us: f64,
    pub miss_penalty_pgtwalk_us: f64,
    pub miss_mode: MissMode,
    pub miss_batch_size: usize,
    /// Per scheduling decision, charged before a granted task starts.
    pub sched_overhead_cycles: u64,
    /// Stop the allocation scan at the first task that does not fit instead
    /// of skipping it.
    pub dba_stop_at_first: bool,
    /// Pages of virtual address space each app streams over before wrapping
    /// (model knob shaping TLB locality).
    pub app_region_pages: u64,
}

impl Default for PlatformModel {
    fn default() -> Self {
        PlatformModel {
            acc_clock_hz: 100_000_000,
            cpu_clock_hz: 667_000_000,
            dram_ports: 4,
            llc_ports: 1,
            bytes_per_cycle_per_port: 8,
            dram_latency_cycles: 200,
            llc_latency_cycles: 30,
            invalidate_cycles_per_page: 32,
            miss_penalty_kernel_api_us: 6.41,
            miss_penalty_pgtwalk_us: 0.69,
            miss_mode: MissMode::Pgtwalk,
            miss_batch_size: 8,
            sched_overhead_cycles: 0,
            dba_stop_at_first: false,
            app_region_pages: 2048,
        }
    }
}

impl PlatformModel {
    /// Accelerator cycles to move one page through one port.
    pub fn page_transfer_cycles(&self) -> u64 {
        PAGE_BYTES.div_ceil(self.bytes_per_cycle_per_port.max(1))
    }

    pub fn fixed_latency_cycles(&self, coherency: Coherency) -> u64 {
        match coherency {
            Coherency::Llc => self.llc_latency_cycles,
            Coherency::Dram => self.dram_latency_cycles,
        }
    }

    pub fn port_pool(&self, coherency: Coherency) -> u32 {
        match coherency {
            Coherency::Llc => self.llc_ports.max(1),
            Coherency::Dram => self.dram_ports.max(1),
        }
    }

    pub fn miss_penalty_us(&self, mode: MissMode) -> f64 {
        match mode {
            MissMode::KernelApi => self.miss_penalty_kernel_api_us,
            MissMode::Pgtwalk => self.miss_penalty_pgtwalk_us,
        }
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: String| Error::Config(msg);
        let parse_u64 = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| bad(format!("`{v}` is not an integer")))
        };
        match key {
            "acc_clock_hz" => self.acc_clock_hz = parse_u64(value)?,
            "cpu_clock_hz" => self.cpu_clock_hz = parse_u64(value)?,
            "dram_ports" => self.dram_ports = parse_u64(value)? as u32,
            "llc_ports" => self.llc_ports = parse_u64(value)? as u32,
            "bytes_per_cycle_per_port" => self.bytes_per_cycle_per_port = parse_u64(value)?,
            "dram_latency_cycles" => self.dram_latency_cycles = parse_u64(value)?,
            "llc_latency_cycles" => self.llc_latency_cycles = parse_u64(value)?,
            "invalidate_cycles_per_page" => self.invalidate_cycles_per_page = parse_u64(value)?,
            "miss_penalty_kernel_api_us" => {
                self.miss_penalty_kernel_api_us = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a number")))?
            }
            "miss_penalty_pgtwalk_us" => {
                self.miss_penalty_pgtwalk_us = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a number")))?
            }
            "miss_mode" => {
                self.miss_mode = value.parse().map_err(bad)?;
            }
            "miss_batch_size" => self.miss_batch_size = parse_u64(value)?.max(1) as usize,
            "sched_overhead_cycles" => self.sched_overhead_cycles = parse_u64(value)?,
            "dba_stop_at_first" => {
                self.dba_stop_at_first = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => return Err(bad(format!("`{other}` is not a bool"))),
                }
            }
            "app_region_pages" => self.app_region_pages = parse_u64(value)?.max(1),
            other => return Err(bad(format!("unknown platform key `{other}`"))),
        }
        Ok(())
    }
}

/// Accelerator-cycle stall for one batched miss-handler call:
/// `misses x penalty_us(mode)` converted to the accelerator clock, rounded
/// up. The batch must fit the IOMMU's grouping window.
pub fn handle_tlb_miss_batch(
    misses: usize,
    mode: MissMode,
    platform: &PlatformModel,
) -> Result<u64> {
    if misses > platform.miss_batch_size {
        return Err(Error::Contract(format!(
            "batch of {misses} misses exceeds miss_batch_size {}",
            platform.miss_batch_size
        )));
    }
    if misses == 0 {
        return Ok(0);
    }
    let cycles =
        misses as f64 * platform.miss_penalty_us(mode) * platform.acc_clock_hz as f64 / 1_000_000.0;
    Ok(cycles.ceil() as u64)
}

/// Cycles spent invalidating processor cache lines overlapping `pages`.
/// A no-op when the memory system is coherent at the LLC.
pub fn invalidate_pages(pages: u64, coherency: Coherency, platform: &PlatformModel) -> u64 {
    match coherency {
        Coherency::Llc => 0,
        Coherency::Dram => pages * platform.invalidate_cycles_per_page,
    }
}
