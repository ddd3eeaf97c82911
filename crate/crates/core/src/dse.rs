//! Design-space sweeps and scenario summaries.
//!
//! A sweep plan names a base specification, a workload (trace file or
//! generator pattern), and value lists for up to seven axes: `tlb_entries`,
//! `coherency`, `interleave`, `connectivity`, `buffers`, `miss_mode` and
//! `reuse_factor`. The cartesian product is simulated (in parallel) and
//! written as one CSV row per configuration, ordered lexicographically over
//! the axes in the order above. Rows carry the resolved axis values, the
//! synthesized interconnect's bank demand and cross-point count, and the
//! full performance report, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossbar::{
    buffer_demand, cross_point_count, private_buffer_topology, synthesize_crossbar, Provenance,
};
use crate::error::{Error, Result};
use crate::interleave::synthesize_interleave;
use crate::sim::platform::{Coherency, MissMode, PlatformModel};
use crate::sim::report::PerfReport;
use crate::sim::run_simulation;
use crate::spec::{expand_instances, parse_spec, AraSpec, InterleaveStrategy};
use crate::workload::{
    apply_reuse_factor, builtin_kernels, load_trace, merge_kernel_overrides, parse_pattern,
    synth_workload, KernelDescriptor, KernelOverride, Pattern, Workload,
};

pub const DEFAULT_SWEEP_CAP: usize = 512;
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Axes {
    #[serde(default)]
    pub tlb_entries: Vec<u64>,
    #[serde(default)]
    pub coherency: Vec<String>,
    #[serde(default)]
    pub interleave: Vec<String>,
    #[serde(default)]
    pub connectivity: Vec<u64>,
    #[serde(default)]
    pub buffers: Vec<String>,
    #[serde(default)]
    pub miss_mode: Vec<String>,
    #[serde(default)]
    pub reuse_factor: Vec<f64>,
}

fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepPlan {
    pub base_spec: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub kernels: Option<PathBuf>,
    #[serde(default)]
    pub axes: Axes,
    pub out: PathBuf,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Platform overrides applied to every run.
    #[serde(default)]
    pub set: BTreeMap<String, String>,
}

impl SweepPlan {
    /// Load a plan, resolving relative paths against the plan file's parent.
    pub fn load(path: &Path) -> Result<SweepPlan> {
        let text = std::fs::read_to_string(path)?;
        let mut plan: SweepPlan = serde_json::from_str(&text)
            .map_err(|e| Error::Plan(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            let join = |p: &PathBuf| {
                if p.is_relative() {
                    dir.join(p)
                } else {
                    p.clone()
                }
            };
            plan.base_spec = join(&plan.base_spec);
            plan.trace = plan.trace.as_ref().map(&join);
            plan.kernels = plan.kernels.as_ref().map(&join);
            plan.out = join(&plan.out);
        }
        Ok(plan)
    }
}

/// One fully resolved configuration in plan order.
#[derive(Debug, Clone)]
struct Combo {
    tlb_entries: Option<u64>,
    coherency: Option<Coherency>,
    interleave: Option<InterleaveStrategy>,
    connectivity: Option<u64>,
    private_buffers: bool,
    miss_mode: Option<MissMode>,
    reuse_factor: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub tlb_entries: u64,
    pub coherency: String,
    pub interleave: String,
    pub connectivity: u64,
    pub buffers: String,
    pub miss_mode: String,
    /// Numeric reuse factor when swept, `base` when kernels keep their own.
    pub reuse_factor: String,
    pub num_banks: usize,
    pub buffer_demand: usize,
    pub cross_points: usize,
    pub provenance: String,
    pub report: PerfReport,
}

impl SweepRow {
    pub fn csv_header() -> Vec<String> {
        let mut h = vec![
            "version".to_string(),
            "tlb_entries".to_string(),
            "coherency".to_string(),
            "interleave".to_string(),
            "connectivity".to_string(),
            "buffers".to_string(),
            "miss_mode".to_string(),
            "reuse_factor".to_string(),
            "num_banks".to_string(),
            "buffer_demand".to_string(),
            "cross_points".to_string(),
            "provenance".to_string(),
        ];
        h.extend(PerfReport::csv_header().into_iter().map(String::from));
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![
            CSV_SCHEMA_VERSION.to_string(),
            self.tlb_entries.to_string(),
            self.coherency.clone(),
            self.interleave.clone(),
            self.connectivity.to_string(),
            self.buffers.clone(),
            self.miss_mode.clone(),
            self.reuse_factor.clone(),
            self.num_banks.to_string(),
            self.buffer_demand.to_string(),
            self.cross_points.to_string(),
            self.provenance.clone(),
        ];
        r.extend(self.report.csv_record());
        r
    }
}

/// Everything a single simulation run needs, prepared once.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub spec: AraSpec,
    pub platform: PlatformModel,
    pub kernels: BTreeMap<String, KernelDescriptor>,
    pub workload_source: WorkloadSource,
}

#[derive(Debug, Clone)]
pub enum WorkloadSource {
    TraceText(String),
    Pattern(Pattern),
}

impl SweepContext {
    pub fn from_plan(plan: &SweepPlan) -> Result<Self> {
        let spec_text = std::fs::read_to_string(&plan.base_spec)?;
        let spec = parse_spec(&spec_text)?;
        let mut platform = PlatformModel {
            acc_clock_hz: spec.acc_frequency_hz,
            ..Default::default()
        };
        for (k, v) in &plan.set {
            platform.apply_override(k, v)?;
        }
        let mut kernels = builtin_kernels();
        if let Some(path) = &plan.kernels {
            let text = std::fs::read_to_string(path)?;
            let overrides: BTreeMap<String, KernelOverride> = serde_json::from_str(&text)?;
            kernels = merge_kernel_overrides(kernels, &overrides)?;
        }
        let workload_source = match (&plan.trace, &plan.pattern) {
            (Some(path), None) => WorkloadSource::TraceText(std::fs::read_to_string(path)?),
            (None, Some(p)) => {
                let mut pattern = parse_pattern(p)?;
                if let (Some(seed), Pattern::Poisson { seed: s, .. }) = (plan.seed, &mut pattern) {
                    *s = seed;
                }
                WorkloadSource::Pattern(pattern)
            }
            (None, None) => {
                return Err(Error::Plan("plan needs either `trace` or `pattern`".into()))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Plan(
                    "plan must not set both `trace` and `pattern`".into(),
                ))
            }
        };
        Ok(SweepContext {
            spec,
            platform,
            kernels,
            workload_source,
        })
    }

    fn workload(
        &self,
        spec: &AraSpec,
        kernels: BTreeMap<String, KernelDescriptor>,
    ) -> Result<Workload> {
        match &self.workload_source {
            WorkloadSource::TraceText(text) => load_trace(text, kernels),
            WorkloadSource::Pattern(p) => synth_workload(p, spec, kernels),
        }
    }
}

fn combos(axes: &Axes) -> Result<Vec<Combo>> {
    fn opt<T: Copy>(v: &[T]) -> Vec<Option<T>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().map(|&x| Some(x)).collect()
        }
    }
    let coherency: Vec<Option<Coherency>> = if axes.coherency.is_empty() {
        vec![None]
    } else {
        axes.coherency
            .iter()
            .map(|s| s.parse().map(Some).map_err(Error::Plan))
            .collect::<Result<_>>()?
    };
    let interleave: Vec<Option<InterleaveStrategy>> = if axes.interleave.is_empty() {
        vec![None]
    } else {
        axes.interleave
            .iter()
            .map(|s| s.parse().map(Some).map_err(Error::Plan))
            .collect::<Result<_>>()?
    };
    let buffers: Vec<bool> = if axes.buffers.is_empty() {
        vec![false]
    } else {
        axes.buffers
            .iter()
            .map(|s| match s.as_str() {
                "shared" => Ok(false),
                "private" => Ok(true),
                other => Err(Error::Plan(format!("unknown buffer mode `{other}`"))),
            })
            .collect::<Result<_>>()?
    };
    let miss_mode: Vec<Option<MissMode>> = if axes.miss_mode.is_empty() {
        vec![None]
    } else {
        axes.miss_mode
            .iter()
            .map(|s| s.parse().map(Some).map_err(Error::Plan))
            .collect::<Result<_>>()?
    };

    let mut out = Vec::new();
    for &tlb in &opt(&axes.tlb_entries) {
        for &coh in &coherency {
            for &ilv in &interleave {
                for &c in &opt(&axes.connectivity) {
                    for &private in &buffers {
                        for &mm in &miss_mode {
                            for &reuse in &opt(&axes.reuse_factor) {
                                out.push(Combo {
                                    tlb_entries: tlb,
                                    coherency: coh,
                                    interleave: ilv,
                                    connectivity: c,
                                    private_buffers: private,
                                    miss_mode: mm,
                                    reuse_factor: reuse,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn run_combo(ctx: &SweepContext, combo: &Combo) -> Result<SweepRow> {
    let mut spec = ctx.spec.clone();
    if let Some(tlb) = combo.tlb_entries {
        spec.iommu.tlb_entries = tlb;
    }
    if let Some(coh) = combo.coherency {
        spec.coherent_cache = matches!(coh, Coherency::Llc);
    }
    if let Some(c) = combo.connectivity {
        spec.interconnect.acc_to_buf.connectivity = c;
    }
    if let Some(strategy) = combo.interleave {
        spec.interconnect.buf_to_dmac.strategy = strategy;
    }
    let mut platform = ctx.platform.clone();
    if let Some(mm) = combo.miss_mode {
        platform.miss_mode = mm;
    }

    let instances = expand_instances(&spec);
    let c = spec.interconnect.acc_to_buf.connectivity as usize;
    let demand = buffer_demand(&instances, c)?;
    let topology = if combo.private_buffers {
        private_buffer_topology(&instances)
    } else {
        synthesize_crossbar(&instances, spec.shared_buffers.count as usize, c)?
    };
    let ilv = synthesize_interleave(
        &topology,
        spec.shared_buffers.num_dmacs as usize,
        spec.interconnect.buf_to_dmac.strategy,
    )?;

    let mut kernels = ctx.kernels.clone();
    if let Some(reuse) = combo.reuse_factor {
        apply_reuse_factor(&mut kernels, reuse);
    }
    let workload = ctx.workload(&spec, kernels)?;
    let report = run_simulation(&spec, &topology, &ilv, &workload, &platform)?;

    Ok(SweepRow {
        tlb_entries: spec.iommu.tlb_entries,
        coherency: if spec.coherent_cache { "llc" } else { "dram" }.to_string(),
        interleave: spec.interconnect.buf_to_dmac.strategy.as_str().to_string(),
        connectivity: spec.interconnect.acc_to_buf.connectivity,
        buffers: if combo.private_buffers {
            "private"
        } else {
            "shared"
        }
        .to_string(),
        miss_mode: match platform.miss_mode {
            MissMode::KernelApi => "kernel_api".to_string(),
            MissMode::Pgtwalk => "pgtwalk".to_string(),
        },
        reuse_factor: match combo.reuse_factor {
            Some(r) => format!("{r}"),
            None => "base".to_string(),
        },
        num_banks: topology.num_banks(),
        buffer_demand: demand,
        cross_points: cross_point_count(&topology),
        provenance: match topology.provenance() {
            Provenance::Constructed => "constructed".to_string(),
            Provenance::Repaired => "repaired".to_string(),
        },
        report,
    })
}

/// Run every configuration in the plan. Rows come back in plan order no
/// matter how the parallel execution interleaves.
pub fn run_sweep(ctx: &SweepContext, axes: &Axes, cap: usize) -> Result<Vec<SweepRow>> {
    let combos = combos(axes)?;
    if combos.len() > cap {
        return Err(Error::Plan(format!(
            "plan expands to {} runs, above the cap of {cap}",
            combos.len()
        )));
    }
    combos
        .par_iter()
        .map(|combo| run_combo(ctx, combo))
        .collect()
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(SweepRow::csv_header())
        .map_err(|e| Error::Csv(e.to_string()))?;
    for row in rows {
        w.write_record(row.csv_record())
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scenario summaries over sweep CSVs
// ---------------------------------------------------------------------------

/// A sweep row read back from CSV, keyed by column name.
#[derive(Debug, Clone)]
pub struct CsvRow {
    fields: BTreeMap<String, String>,
}

impl CsvRow {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Csv(format!("missing column `{key}`")))
    }

    pub fn num(&self, key: &str) -> Result<f64> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Csv(format!("column `{key}`: `{raw}` is not numeric")))
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let fields = header
            .iter()
            .cloned()
            .zip(record.iter().map(String::from))
            .collect();
        rows.push(CsvRow { fields });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub lines: Vec<String>,
    pub metrics: serde_json::Value,
}

impl ScenarioSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Derive per-scenario metrics from a sweep CSV.
pub fn summarize(rows: &[CsvRow], scenario: &str) -> Result<ScenarioSummary> {
    if rows.is_empty() {
        return Err(Error::Csv("sweep CSV holds no rows".into()));
    }
    let mut lines = Vec::new();
    let metrics = match scenario {
        "buffers" => {
            let private = rows
                .iter()
                .find(|r| r.get("buffers").ok() == Some("private"));
            let shared = rows
                .iter()
                .find(|r| r.get("buffers").ok() == Some("shared"));
            match (private, shared) {
                (Some(p), Some(s)) => {
                    let private_banks = p.num("num_banks")?;
                    // Banks the shared crossbar actually wires: its demand at
                    // the configured connectivity, not the declared pool.
                    let shared_banks = s.num("buffer_demand")?;
                    let saving = 100.0 * (private_banks - shared_banks) / private_banks;
                    let private_cycles = p.num("total_cycles")?;
                    let shared_cycles = s.num("total_cycles")?;
                    let slowdown = if private_cycles > 0.0 {
                        shared_cycles / private_cycles
                    } else {
                        1.0
                    };
                    lines.push(format!(
                        "private buffers: {private_banks:.0} banks; shared (c={}): {shared_banks:.0} banks; saving {saving:.1}%",
                        s.get("connectivity")?
                    ));
                    lines.push(format!(
                        "cycles: shared {shared_cycles:.0} vs private {private_cycles:.0} ({slowdown:.3}x)"
                    ));
                    serde_json::json!({
                        "private_banks": private_banks,
                        "shared_banks": shared_banks,
                        "bank_saving_pct": saving,
                        "private_cycles": private_cycles,
                        "shared_cycles": shared_cycles,
                        "shared_slowdown": slowdown,
                    })
                }
                _ => {
                    lines.push("single configuration; no comparison available".into());
                    serde_json::json!({})
                }
            }
        }
        "coherency" => {
            let llc = rows.iter().find(|r| r.get("coherency").ok() == Some("llc"));
            let dram = rows
                .iter()
                .find(|r| r.get("coherency").ok() == Some("dram"));
            match (llc, dram) {
                (Some(l), Some(d)) => {
                    let llc_cycles = l.num("total_cycles")?;
                    let dram_cycles = d.num("total_cycles")?;
                    let speedup = if dram_cycles > 0.0 {
                        llc_cycles / dram_cycles
                    } else {
                        1.0
                    };
                    lines.push(format!(
                        "coherent at DRAM: {dram_cycles:.0} cycles; at LLC: {llc_cycles:.0} cycles; speedup {speedup:.3}x"
                    ));
                    lines.push(format!(
                        "achieved bandwidth: dram {:.0} B/s vs llc {:.0} B/s",
                        d.num("achieved_bandwidth_bytes_per_sec")?,
                        l.num("achieved_bandwidth_bytes_per_sec")?
                    ));
                    serde_json::json!({
                        "llc_cycles": llc_cycles,
                        "dram_cycles": dram_cycles,
                        "dram_speedup": speedup,
                        "dram_bandwidth": d.num("achieved_bandwidth_bytes_per_sec")?,
                        "llc_bandwidth": l.num("achieved_bandwidth_bytes_per_sec")?,
                    })
                }
                _ => {
                    lines.push("single configuration; no comparison available".into());
                    serde_json::json!({})
                }
            }
        }
        "interleave" => {
            let intra = rows
                .iter()
                .find(|r| r.get("interleave").ok() == Some("intra_acc"));
            let inter = rows
                .iter()
                .find(|r| r.get("interleave").ok() == Some("inter_acc"));
            match (intra, inter) {
                (Some(a), Some(e)) => {
                    let intra_cycles = a.num("total_cycles")?;
                    let inter_cycles = e.num("total_cycles")?;
                    let speedup = if intra_cycles > 0.0 {
                        inter_cycles / intra_cycles
                    } else {
                        1.0
                    };
                    lines.push(format!(
                        "intra-accelerator: {intra_cycles:.0} cycles; inter-accelerator: {inter_cycles:.0} cycles; speedup {speedup:.3}x"
                    ));
                    serde_json::json!({
                        "intra_cycles": intra_cycles,
                        "inter_cycles": inter_cycles,
                        "intra_speedup": speedup,
                        "intra_bandwidth": a.num("achieved_bandwidth_bytes_per_sec")?,
                        "inter_bandwidth": e.num("achieved_bandwidth_bytes_per_sec")?,
                    })
                }
                _ => {
                    lines.push("single configuration; no comparison available".into());
                    serde_json::json!({})
                }
            }
        }
        "tlb" => {
            let mut points: Vec<(u64, f64)> = Vec::new();
            for row in rows {
                let entries = row.num("tlb_entries")? as u64;
                let total = row.num("total_cycles")?;
                let stall = row.num("miss_handling_cycles")?;
                let fraction = if total > 0.0 { stall / total } else { 0.0 };
                points.push((entries, fraction));
            }
            points.sort_by_key(|&(e, _)| e);
            let monotone = points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
            let last = points.last().map(|&(_, f)| f).unwrap_or(0.0);
            let plateau = points
                .iter()
                .find(|&&(_, f)| f <= last + 1e-3)
                .map(|&(e, _)| e)
                .unwrap_or(0);
            for (entries, fraction) in &points {
                lines.push(format!(
                    "tlb_entries {entries:>6}: miss-penalty fraction {:.4}",
                    fraction
                ));
            }
            lines.push(format!(
                "fraction is {}monotone non-increasing; plateau from {plateau} entries",
                if monotone { "" } else { "NOT " }
            ));
            serde_json::json!({
                "points": points.iter().map(|&(e, f)| serde_json::json!({"entries": e, "fraction": f})).collect::<Vec<_>>(),
                "monotone_non_increasing": monotone,
                "plateau_entries": plateau,
            })
        }
        "reuse" => {
            let mut points: Vec<(f64, f64, f64)> = Vec::new();
            for row in rows {
                let reuse = row.num("reuse_factor")?;
                points.push((reuse, row.num("total_cycles")?, row.num("compute_ratio")?));
            }
            points.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite reuse factors"));
            let base_cycles = points.first().map(|&(_, c, _)| c).unwrap_or(0.0);
            for &(reuse, cycles, ratio) in &points {
                let speedup = if cycles > 0.0 {
                    base_cycles / cycles
                } else {
                    1.0
                };
                lines.push(format!(
                    "reuse {reuse:.2}: compute ratio {ratio:.3}, {cycles:.0} cycles, speedup {speedup:.3}x"
                ));
            }
            serde_json::json!({
                "points": points
                    .iter()
                    .map(|&(r, c, q)| serde_json::json!({
                        "reuse_factor": r,
                        "total_cycles": c,
                        "compute_ratio": q,
                        "speedup": if c > 0.0 { base_cycles / c } else { 1.0 },
                    }))
                    .collect::<Vec<_>>(),
            })
        }
        other => {
            return Err(Error::Plan(format!(
                "unknown scenario `{other}`; expected buffers|coherency|interleave|tlb|reuse"
            )))
        }
    };
    Ok(ScenarioSummary {
        scenario: scenario.to_string(),
        lines,
        metrics,
    })
}
