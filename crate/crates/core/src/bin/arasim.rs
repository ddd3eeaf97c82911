//! Command-line driver: synthesize interconnects, run simulations, sweep
//! design-space axes, and summarize the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use arasim::crossbar::{
    buffer_demand, check_feasibility, cross_point_count, private_buffer_topology,
    synthesize_crossbar, CrossbarTopology,
};
use arasim::dse::{read_csv, run_sweep, summarize, write_csv, SweepContext, SweepPlan, SweepRow};
use arasim::interleave::{synthesize_interleave, InterleaveMap};
use arasim::sim::{run_simulation, PlatformModel};
use arasim::spec::{expand_instances, parse_spec_full, validate_spec, AraSpec};
use arasim::workload::{
    builtin_kernels, load_trace, merge_kernel_overrides, parse_pattern, synth_workload,
    KernelDescriptor, KernelOverride, Pattern, Workload,
};

#[derive(Parser)]
#[command(
    name = "arasim",
    version,
    about = "Accelerator-rich architecture design-space toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize the partial crossbar and interleaved network for a spec.
    Synth {
        /// ARA specification XML file.
        #[arg(long)]
        spec: PathBuf,
        /// Output JSON file holding the topology and interleave map.
        #[arg(long)]
        out: PathBuf,
        /// Buffer architecture: `shared` (default) or `private`.
        #[arg(long, default_value = "shared")]
        buffers: String,
        /// Override the spec's connectivity.
        #[arg(long)]
        connectivity: Option<u64>,
        /// Also write the canonical JSON dump of the parsed spec here.
        #[arg(long)]
        spec_json: Option<PathBuf>,
    },
    /// Simulate one workload on one configuration.
    Sim {
        #[arg(long)]
        spec: PathBuf,
        /// Topology JSON from `synth`; synthesized on the fly when omitted.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Trace file (mutually exclusive with --pattern).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Generator pattern, e.g. `all_parallel:2` or `stream:gradient:40`.
        #[arg(long)]
        pattern: Option<String>,
        /// Kernel override JSON merged over the builtins.
        #[arg(long)]
        kernels: Option<PathBuf>,
        /// Seed override for poisson patterns.
        #[arg(long)]
        seed: Option<u64>,
        /// Platform overrides as key=value, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output prefix: writes <out>.json and <out>.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configuration of a sweep plan and emit one CSV.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        /// Override the plan's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive scenario metrics from a sweep CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
        /// One of: buffers, coherency, interleave, tlb, reuse.
        #[arg(long)]
        scenario: String,
        /// Optional JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Synth {
            spec,
            out,
            buffers,
            connectivity,
            spec_json,
        } => cmd_synth(&spec, &out, &buffers, connectivity, spec_json.as_deref()),
        Cmd::Sim {
            spec,
            topology,
            trace,
            pattern,
            kernels,
            seed,
            set,
            out,
        } => cmd_sim(
            &spec,
            topology.as_deref(),
            trace.as_deref(),
            pattern.as_deref(),
            kernels.as_deref(),
            seed,
            &set,
            &out,
        ),
        Cmd::Sweep { plan, out } => cmd_sweep(&plan, out.as_deref()),
        Cmd::Report { csv, scenario, out } => cmd_report(&csv, &scenario, out.as_deref()),
    }
}

fn load_spec(path: &Path) -> anyhow::Result<AraSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading spec {}", path.display()))?;
    let (spec, warnings) = parse_spec_full(&text)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let report = validate_spec(&spec);
    if !report.is_valid() {
        let msgs: Vec<String> = report
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect();
        bail!("spec is invalid: {}", msgs.join("; "));
    }
    Ok(spec)
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

fn synthesize(
    spec: &AraSpec,
    private: bool,
    connectivity: Option<u64>,
) -> anyhow::Result<(CrossbarTopology, InterleaveMap, usize)> {
    let instances = expand_instances(spec);
    let c = connectivity.unwrap_or(spec.interconnect.acc_to_buf.connectivity) as usize;
    let demand = buffer_demand(&instances, c)?;
    let topology = if private {
        private_buffer_topology(&instances)
    } else {
        synthesize_crossbar(&instances, spec.shared_buffers.count as usize, c)?
    };
    let interleave = synthesize_interleave(
        &topology,
        spec.shared_buffers.num_dmacs as usize,
        spec.interconnect.buf_to_dmac.strategy,
    )?;
    Ok((topology, interleave, demand))
}

fn cmd_synth(
    spec_path: &Path,
    out: &Path,
    buffers: &str,
    connectivity: Option<u64>,
    spec_json: Option<&Path>,
) -> anyhow::Result<()> {
    let private = match buffers {
        "shared" => false,
        "private" => true,
        other => bail!("unknown buffer mode `{other}`; expected shared|private"),
    };
    let spec = load_spec(spec_path)?;
    if let Some(path) = spec_json {
        std::fs::write(path, spec.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let (topology, interleave, demand) = synthesize(&spec, private, connectivity)?;
    let c = connectivity.unwrap_or(spec.interconnect.acc_to_buf.connectivity) as usize;
    let verdict = check_feasibility(&topology, c)?;

    let bundle = serde_json::json!({
        "topology": topology.to_json_value(),
        "interleave": interleave,
    });
    ensure_parent(out)?;
    std::fs::write(out, serde_json::to_string_pretty(&bundle)?)
        .with_context(|| format!("writing {}", out.display()))?;

    println!(
        "buffer demand: {demand} (declared banks: {})",
        spec.shared_buffers.count
    );
    println!("banks wired: {}", topology.num_banks());
    println!("cross points: {}", cross_point_count(&topology));
    println!(
        "feasibility: {} ({} subsets checked, provenance {:?})",
        if verdict.feasible {
            "feasible"
        } else {
            "INFEASIBLE"
        },
        verdict.checked_subsets,
        topology.provenance()
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn load_kernels(path: Option<&Path>) -> anyhow::Result<BTreeMap<String, KernelDescriptor>> {
    let mut kernels = builtin_kernels();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading kernel overrides {}", path.display()))?;
        let overrides: BTreeMap<String, KernelOverride> = serde_json::from_str(&text)?;
        kernels = merge_kernel_overrides(kernels, &overrides)?;
    }
    Ok(kernels)
}

fn load_workload(
    spec: &AraSpec,
    trace: Option<&Path>,
    pattern: Option<&str>,
    seed: Option<u64>,
    kernels: BTreeMap<String, KernelDescriptor>,
) -> anyhow::Result<Workload> {
    match (trace, pattern) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading trace {}", path.display()))?;
            Ok(load_trace(&text, kernels)?)
        }
        (None, Some(p)) => {
            let mut pattern = parse_pattern(p)?;
            if let (Some(seed), Pattern::Poisson { seed: s, .. }) = (seed, &mut pattern) {
                *s = seed;
            }
            Ok(synth_workload(&pattern, spec, kernels)?)
        }
        (None, None) => bail!("provide --trace or --pattern"),
        (Some(_), Some(_)) => bail!("--trace and --pattern are mutually exclusive"),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sim(
    spec_path: &Path,
    topology: Option<&Path>,
    trace: Option<&Path>,
    pattern: Option<&str>,
    kernels_path: Option<&Path>,
    seed: Option<u64>,
    set: &[String],
    out: &Path,
) -> anyhow::Result<()> {
    let spec = load_spec(spec_path)?;
    let mut platform = PlatformModel {
        acc_clock_hz: spec.acc_frequency_hz,
        ..Default::default()
    };
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("override `{kv}` is not key=value"))?;
        platform.apply_override(k, v)?;
    }

    let (topology, interleave) = match topology {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading topology {}", path.display()))?;
            let bundle: serde_json::Value = serde_json::from_str(&text)?;
            let topo =
                CrossbarTopology::from_json_value(bundle.get("topology").unwrap_or(&bundle))?;
            let ilv: InterleaveMap = match bundle.get("interleave") {
                Some(v) => serde_json::from_value(v.clone())?,
                None => synthesize_interleave(
                    &topo,
                    spec.shared_buffers.num_dmacs as usize,
                    spec.interconnect.buf_to_dmac.strategy,
                )?,
            };
            (topo, ilv)
        }
        None => {
            let (topo, ilv, _) = synthesize(&spec, false, None)?;
            (topo, ilv)
        }
    };

    let kernels = load_kernels(kernels_path)?;
    let workload = load_workload(&spec, trace, pattern, seed, kernels)?;
    let report = run_simulation(&spec, &topology, &interleave, &workload, &platform)?;

    let json_path = out.with_extension("json");
    let csv_path = out.with_extension("csv");
    ensure_parent(&json_path)?;
    std::fs::write(&json_path, report.to_json())
        .with_context(|| format!("writing {}", json_path.display()))?;
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["version".to_string()];
    header.extend(
        arasim::sim::PerfReport::csv_header()
            .into_iter()
            .map(String::from),
    );
    w.write_record(&header)?;
    let mut record = vec![arasim::dse::CSV_SCHEMA_VERSION.to_string()];
    record.extend(report.csv_record());
    w.write_record(&record)?;
    w.flush()?;

    println!(
        "total_cycles: {} tasks: {} tlb: {}/{} bandwidth: {:.0} B/s",
        report.total_cycles,
        report.tasks_completed,
        report.tlb_misses,
        report.tlb_accesses,
        report.achieved_bandwidth_bytes_per_sec
    );
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_sweep(plan_path: &Path, out_override: Option<&Path>) -> anyhow::Result<()> {
    let mut plan = SweepPlan::load(plan_path)?;
    if let Some(out) = out_override {
        plan.out = out.to_path_buf();
    }
    let ctx = SweepContext::from_plan(&plan)?;
    let rows = run_sweep(&ctx, &plan.axes, plan.cap)?;
    write_csv(&rows, &plan.out)?;
    println!(
        "wrote {} rows ({} columns) to {}",
        rows.len(),
        SweepRow::csv_header().len(),
        plan.out.display()
    );
    Ok(())
}

fn cmd_report(csv_path: &Path, scenario: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let rows = read_csv(csv_path)?;
    let summary = summarize(&rows, scenario)?;
    for line in &summary.lines {
        println!("{line}");
    }
    if let Some(path) = out {
        std::fs::write(path, summary.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
