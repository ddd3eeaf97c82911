//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).
//!
//! Run: `cargo test -p arasim --test acceptance -- --nocapture`

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use arasim::crossbar::{
    buffer_demand, check_feasibility, cross_point_count, private_buffer_topology,
    synthesize_crossbar, Provenance,
};
use arasim::dse::{run_sweep, write_csv, Axes, SweepContext, WorkloadSource};
use arasim::interleave::{dmac_load_profile, imbalance, synthesize_interleave};
use arasim::sim::dba::{apply_outcome, dba_allocate, BufferFlags, DbaRequest};
use arasim::sim::{run_simulation, PlatformModel, PAGE_BYTES};
use arasim::spec::{expand_instances, parse_spec, AccInstance, AraSpec, InterleaveStrategy};
use arasim::workload::{builtin_kernels, parse_pattern, synth_workload, Pattern};

fn example_spec() -> AraSpec {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ara_example.xml");
    parse_spec(&std::fs::read_to_string(path).expect("example spec file")).expect("parses")
}

fn single_instance_spec() -> AraSpec {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ara_single.xml");
    parse_spec(&std::fs::read_to_string(path).expect("single-instance spec file")).expect("parses")
}

fn instances_of(ports: &[usize]) -> Vec<AccInstance> {
    ports
        .iter()
        .enumerate()
        .map(|(i, &p)| AccInstance {
            instance_id: i,
            type_name: format!("t{i}"),
            port_count: p,
        })
        .collect()
}

struct CorpusEntry {
    instances: Vec<AccInstance>,
    connectivity: usize,
    banks: usize,
}

/// Random systems: up to 8 instances, ports up to 12, connectivity up to 4,
/// banks from exact demand to demand + 8.
fn corpus(seed: u64, count: usize) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=8);
            let ports: Vec<usize> = (0..n).map(|_| rng.random_range(1..=12)).collect();
            let instances = instances_of(&ports);
            let connectivity = rng.random_range(1..=n.min(4));
            let demand = buffer_demand(&instances, connectivity).unwrap();
            let banks = demand + rng.random_range(0..=8);
            CorpusEntry {
                instances,
                connectivity,
                banks,
            }
        })
        .collect()
}

#[test]
fn criterion_01_synthesis_always_passes_the_matching_oracle() {
    let start = Instant::now();
    let entries = corpus(2024, 200);
    let mut checked_total = 0u64;
    let mut repaired = 0usize;
    for (i, e) in entries.iter().enumerate() {
        let topo = synthesize_crossbar(&e.instances, e.banks, e.connectivity)
            .unwrap_or_else(|err| panic!("corpus entry {i}: synthesis failed: {err}"));
        let report = check_feasibility(&topo, e.connectivity).unwrap();
        assert!(
            report.feasible,
            "corpus entry {i}: infeasible subset {:?}",
            report.violating_subset
        );
        checked_total += report.checked_subsets;
        if topo.provenance() == Provenance::Repaired {
            repaired += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "corpus took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS: 200/200 corpus syntheses feasible \
         ({checked_total} subsets checked, {repaired} needed repair, {elapsed:?})"
    );
}

#[test]
fn criterion_02_example_system_demand_and_cross_points() {
    let spec = example_spec();
    let instances = expand_instances(&spec);
    let c = spec.interconnect.acc_to_buf.connectivity as usize;
    assert_eq!(c, 3);
    let demand = buffer_demand(&instances, c).unwrap();
    assert_eq!(demand, 26);
    assert!(demand as u64 <= spec.shared_buffers.count);

    let banks = spec.shared_buffers.count as usize;
    let topo = synthesize_crossbar(&instances, banks, c).unwrap();
    assert_eq!(
        topo.provenance(),
        Provenance::Constructed,
        "must not need repair"
    );
    assert_eq!(cross_point_count(&topo), 59);
    assert!(check_feasibility(&topo, c).unwrap().feasible);

    // Determinism: a second synthesis is bit-identical.
    let again = synthesize_crossbar(&instances, banks, c).unwrap();
    assert_eq!(
        topo.to_json_value().to_string(),
        again.to_json_value().to_string()
    );
    println!(
        "ACCEPTANCE 2 PASS: example system demand 26 <= 32 banks, 59 cross points, \
         unrepaired, deterministic"
    );
}

#[test]
fn criterion_03_cross_point_law_on_unrepaired_syntheses() {
    let entries = corpus(2024, 200);
    let mut unrepaired = 0usize;
    for (i, e) in entries.iter().enumerate() {
        let topo = synthesize_crossbar(&e.instances, e.banks, e.connectivity).unwrap();
        if topo.provenance() != Provenance::Constructed {
            continue;
        }
        unrepaired += 1;
        let mut ports: Vec<usize> = e.instances.iter().map(|x| x.port_count).collect();
        ports.sort_unstable_by(|a, b| b.cmp(a));
        let p_top: usize = ports[..e.connectivity].iter().sum();
        let p_rest: usize = ports[e.connectivity..].iter().sum();
        assert_eq!(
            cross_point_count(&topo),
            p_top + e.connectivity * p_rest,
            "corpus entry {i}: cross-point law violated"
        );
    }
    assert!(
        unrepaired > 0,
        "corpus produced no unrepaired syntheses to check"
    );
    println!(
        "ACCEPTANCE 3 PASS: cross_point_count == P_top + c*P_rest on all \
         {unrepaired} unrepaired corpus syntheses"
    );
}

#[test]
fn criterion_04_dba_starvation_freedom_stress() {
    // 10,000 tasks with bounded service times contend for banks through the
    // occupied/reserved scheme. Instances are plentiful so buffers are the
    // only contention; the wait of a reserving head must stay within the sum
    // of the remaining service times of the reserved banks' owners.
    let start = Instant::now();
    let ports = [8usize, 6, 6, 4, 4, 3];
    let instances = instances_of(&ports);
    let connectivity = 3;
    let banks = buffer_demand(&instances, connectivity).unwrap();
    let topo = synthesize_crossbar(&instances, banks, connectivity).unwrap();

    const TASKS: u64 = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let arrivals: Vec<(u64, usize, u64)> = {
        let mut t = 0u64;
        // Mean inter-arrival sits just above the fabric's service rate so the
        // queue stays short but contention (and head reservations) stay
        // frequent.
        (0..TASKS)
            .map(|_| {
                t += rng.random_range(40..=160);
                let inst = rng.random_range(0..ports.len());
                let service = rng.random_range(50..=500);
                (t, inst, service)
            })
            .collect()
    };

    #[derive(Clone)]
    struct Pending {
        task: u64,
        instance: usize,
        reserve_time: Option<u64>,
        reserve_bound: u64,
    }
    let mut flags = BufferFlags::new(topo.num_banks());
    let mut pending: Vec<Pending> = Vec::new();
    let mut next_arrival = 0usize;
    // (release_time, task) kept sorted; release applies banks owned by task.
    let mut active: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    let mut release_of: BTreeMap<u64, u64> = BTreeMap::new();
    let mut completed = 0u64;
    let mut max_reserved_wait = 0u64;
    let mut reserving_tasks = 0u64;
    let mut clock;

    loop {
        let next_rel = active.keys().next().copied();
        let next_arr = arrivals.get(next_arrival).map(|&(t, _, _)| t);
        clock = match (next_rel, next_arr) {
            (Some((rt, _)), Some(at)) => rt.min(at),
            (Some((rt, _)), None) => rt,
            (None, Some(at)) => at,
            (None, None) => break,
        };
        // Releases first, then arrivals at the same instant.
        while let Some((&(rt, task), _)) = active.iter().next().map(|(k, v)| (k, v.clone())) {
            if rt > clock {
                break;
            }
            let banks_held = active.remove(&(rt, task)).unwrap();
            for b in banks_held {
                flags.release(b);
            }
            release_of.remove(&task);
            completed += 1;
        }
        while next_arrival < arrivals.len() && arrivals[next_arrival].0 <= clock {
            let (_, inst, _) = arrivals[next_arrival];
            pending.push(Pending {
                task: next_arrival as u64,
                instance: inst,
                reserve_time: None,
                reserve_bound: 0,
            });
            next_arrival += 1;
        }

        let requests: Vec<DbaRequest> = pending
            .iter()
            .map(|p| DbaRequest {
                task: p.task,
                demand: topo.port_count(p.instance),
                grant_candidates: vec![p.instance],
                reserve_candidate: p.instance,
            })
            .collect();
        let outcome = dba_allocate(&requests, &flags, &topo, false).unwrap();

        // Record reservations made by the head right now.
        for &(bank, task) in &outcome.new_reservations {
            let p = pending.iter_mut().find(|p| p.task == task).unwrap();
            if p.reserve_time.is_none() {
                p.reserve_time = Some(clock);
                reserving_tasks += 1;
            }
            if flags.bank(bank).occupied {
                let owner = flags.bank(bank).owner.unwrap();
                let owner_release = release_of[&owner];
                p.reserve_bound += owner_release.saturating_sub(clock);
            }
        }
        apply_outcome(&mut flags, &outcome).unwrap();
        for grant in &outcome.grants {
            let pos = pending.iter().position(|p| p.task == grant.task).unwrap();
            let p = pending.remove(pos);
            if let Some(rt) = p.reserve_time {
                let wait = clock - rt;
                assert!(
                    wait <= p.reserve_bound,
                    "task {} waited {wait} cycles after reserving, bound was {}",
                    p.task,
                    p.reserve_bound
                );
                max_reserved_wait = max_reserved_wait.max(wait);
            }
            let service = arrivals[grant.task as usize].2;
            release_of.insert(grant.task, clock + service);
            active.insert((clock + service, grant.task), grant.banks.clone());
        }
    }

    assert_eq!(completed, TASKS, "every task must complete");
    assert!(pending.is_empty());
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "stress took {elapsed:?}");
    println!(
        "ACCEPTANCE 4 PASS: {TASKS} tasks completed, {reserving_tasks} head reservations, \
         max post-reservation wait {max_reserved_wait} cycles within bound, \
         exclusivity enforced ({elapsed:?})"
    );
}

fn tlb_sweep_rows() -> Vec<arasim::dse::SweepRow> {
    let spec = example_spec();
    let mut platform = PlatformModel {
        acc_clock_hz: spec.acc_frequency_hz,
        ..Default::default()
    };
    platform.apply_override("app_region_pages", "128").unwrap();
    platform.apply_override("miss_mode", "kernel_api").unwrap();
    let ctx = SweepContext {
        spec,
        platform,
        kernels: builtin_kernels(),
        workload_source: WorkloadSource::Pattern(parse_pattern("stream:gradient:200").unwrap()),
    };
    let axes = Axes {
        tlb_entries: vec![64, 256, 1024, 4096, 16384],
        ..Default::default()
    };
    run_sweep(&ctx, &axes, 512).unwrap()
}

#[test]
fn criterion_05_tlb_size_study() {
    let rows = tlb_sweep_rows();
    let fractions: Vec<(u64, f64)> = rows
        .iter()
        .map(|r| {
            let f = r.report.miss_handling_cycles as f64 / r.report.total_cycles as f64;
            (r.tlb_entries, f)
        })
        .collect();
    for w in fractions.windows(2) {
        assert!(
            w[1].1 <= w[0].1 + 1e-12,
            "fraction must be non-increasing: {:?} then {:?}",
            w[0],
            w[1]
        );
    }
    let last = fractions.last().unwrap().1;
    let second_last = fractions[fractions.len() - 2].1;
    assert!(
        (second_last - last).abs() < 0.01,
        "fraction must plateau at large sizes"
    );
    let smallest = fractions.first().unwrap().1;
    assert!(
        smallest > 0.10,
        "64-entry TLB with kernel_api handling should cost more than 10% (got {smallest:.4})"
    );
    let pretty: Vec<String> = fractions
        .iter()
        .map(|(e, f)| format!("{e}:{:.3}", f))
        .collect();
    println!(
        "ACCEPTANCE 5 PASS: miss-penalty fraction non-increasing and plateaued [{}], \
         small-TLB kernel_api fraction {smallest:.3} > 0.10",
        pretty.join(" ")
    );
}

fn run_coherency_pair(pattern: &str) -> (u64, u64) {
    let base = example_spec();
    let kernels = builtin_kernels();
    let mut cycles = [0u64; 2];
    for (i, llc) in [true, false].into_iter().enumerate() {
        let mut spec = base.clone();
        spec.coherent_cache = llc;
        let instances = expand_instances(&spec);
        let topo = synthesize_crossbar(
            &instances,
            spec.shared_buffers.count as usize,
            spec.interconnect.acc_to_buf.connectivity as usize,
        )
        .unwrap();
        let ilv = synthesize_interleave(
            &topo,
            spec.shared_buffers.num_dmacs as usize,
            InterleaveStrategy::IntraAcc,
        )
        .unwrap();
        let workload =
            synth_workload(&parse_pattern(pattern).unwrap(), &spec, kernels.clone()).unwrap();
        let platform = PlatformModel {
            acc_clock_hz: spec.acc_frequency_hz,
            ..Default::default()
        };
        let report = run_simulation(&spec, &topo, &ilv, &workload, &platform).unwrap();
        cycles[i] = report.total_cycles;
    }
    (cycles[0], cycles[1]) // (llc, dram)
}

#[test]
fn criterion_06_coherency_study() {
    let mut lines = Vec::new();
    for pattern in [
        "single:gaussian:2",
        "all_parallel:1",
        "all_parallel:4",
        "stream:rician:4:2",
    ] {
        let (llc, dram) = run_coherency_pair(pattern);
        assert!(
            dram <= llc,
            "{pattern}: dram {dram} must not exceed llc {llc} total cycles"
        );
        lines.push(format!("{pattern} {:.2}x", llc as f64 / dram as f64));
    }
    // With at least two instances active the wider DRAM port pool must win
    // outright.
    let (llc, dram) = run_coherency_pair("all_parallel:4");
    assert!(dram < llc, "parallel run must show strict speedup");
    let speedup = llc as f64 / dram as f64;
    assert!(speedup > 1.0);
    println!(
        "ACCEPTANCE 6 PASS: coherent-at-DRAM <= coherent-at-LLC in every run \
         [{}]; parallel speedup {speedup:.2}x > 1",
        lines.join(", ")
    );
}

#[test]
fn criterion_07_interleave_study() {
    // Four-port example: intra spreads one burst over all four DMACs while
    // inter pins the whole instance to one.
    let one = instances_of(&[4]);
    let topo = synthesize_crossbar(&one, 4, 1).unwrap();
    let intra = synthesize_interleave(&topo, 4, InterleaveStrategy::IntraAcc).unwrap();
    let inter = synthesize_interleave(&topo, 4, InterleaveStrategy::InterAcc).unwrap();
    let batch: Vec<usize> = (0..4).collect();
    let intra_profile = dmac_load_profile(&intra, &batch).unwrap();
    let inter_profile = dmac_load_profile(&inter, &batch).unwrap();
    assert_eq!(intra_profile, vec![1, 1, 1, 1]);
    assert_eq!(inter_profile, vec![4, 0, 0, 0]);
    assert!(imbalance(&intra_profile) <= 1.0 + 1e-12);

    // Full simulation of one multi-port burst: intra must not lose.
    let spec = single_instance_spec();
    let kernels = builtin_kernels();
    let mut cycles = BTreeMap::new();
    for strategy in [InterleaveStrategy::IntraAcc, InterleaveStrategy::InterAcc] {
        let instances = expand_instances(&spec);
        let topo = synthesize_crossbar(
            &instances,
            spec.shared_buffers.count as usize,
            spec.interconnect.acc_to_buf.connectivity as usize,
        )
        .unwrap();
        let ilv =
            synthesize_interleave(&topo, spec.shared_buffers.num_dmacs as usize, strategy).unwrap();
        let workload = synth_workload(
            &parse_pattern("single:rician:4").unwrap(),
            &spec,
            kernels.clone(),
        )
        .unwrap();
        let platform = PlatformModel {
            acc_clock_hz: spec.acc_frequency_hz,
            ..Default::default()
        };
        let report = run_simulation(&spec, &topo, &ilv, &workload, &platform).unwrap();
        cycles.insert(strategy.as_str(), report.total_cycles);
    }
    assert!(cycles["intra_acc"] <= cycles["inter_acc"]);
    println!(
        "ACCEPTANCE 7 PASS: burst profile (1,1,1,1) vs (4,0,0,0); single rician burst \
         intra {} <= inter {} cycles",
        cycles["intra_acc"], cycles["inter_acc"]
    );
}

#[test]
fn criterion_08_buffer_architecture_study() {
    let spec = example_spec();
    let instances = expand_instances(&spec);
    let c = spec.interconnect.acc_to_buf.connectivity as usize;

    let private = private_buffer_topology(&instances);
    assert_eq!(private.num_banks(), 37);
    let demand = buffer_demand(&instances, c).unwrap();
    assert_eq!(demand, 26);
    let saving = 100.0 * (private.num_banks() - demand) as f64 / private.num_banks() as f64;
    assert!((saving - 29.7297).abs() < 0.01);

    // Five simultaneous tasks: the shared fabric admits only `c` at a time,
    // so it may cost cycles; it must never win.
    let kernels = builtin_kernels();
    let platform = PlatformModel {
        acc_clock_hz: spec.acc_frequency_hz,
        ..Default::default()
    };
    let workload = synth_workload(
        &parse_pattern("all_parallel:4").unwrap(),
        &spec,
        kernels.clone(),
    )
    .unwrap();
    let shared_topo =
        synthesize_crossbar(&instances, spec.shared_buffers.count as usize, c).unwrap();
    let shared_ilv = synthesize_interleave(
        &shared_topo,
        spec.shared_buffers.num_dmacs as usize,
        InterleaveStrategy::IntraAcc,
    )
    .unwrap();
    let shared = run_simulation(&spec, &shared_topo, &shared_ilv, &workload, &platform).unwrap();

    let private_ilv = synthesize_interleave(
        &private,
        spec.shared_buffers.num_dmacs as usize,
        InterleaveStrategy::IntraAcc,
    )
    .unwrap();
    let private_run = run_simulation(&spec, &private, &private_ilv, &workload, &platform).unwrap();

    assert!(shared.total_cycles >= private_run.total_cycles);
    println!(
        "ACCEPTANCE 8 PASS: private 37 banks vs shared demand 26 at c=3 \
         (saving {saving:.1}%); 5-task run shared {} >= private {} cycles",
        shared.total_cycles, private_run.total_cycles
    );
}

#[test]
fn criterion_09_data_reuse_study() {
    let spec = single_instance_spec();
    let mut lines = Vec::new();
    for kernel in ["gradient", "segmentation", "rician", "gaussian"] {
        let mut results = Vec::new();
        for reuse in [1.0, 0.2] {
            let mut kernels = builtin_kernels();
            arasim::workload::apply_reuse_factor(&mut kernels, reuse);
            let instances = expand_instances(&spec);
            let topo = synthesize_crossbar(
                &instances,
                spec.shared_buffers.count as usize,
                spec.interconnect.acc_to_buf.connectivity as usize,
            )
            .unwrap();
            let ilv = synthesize_interleave(
                &topo,
                spec.shared_buffers.num_dmacs as usize,
                InterleaveStrategy::IntraAcc,
            )
            .unwrap();
            let workload = synth_workload(
                &Pattern::Stream {
                    kernel: kernel.into(),
                    count: 20,
                    multiplier: 32,
                },
                &spec,
                kernels,
            )
            .unwrap();
            let mut platform = PlatformModel {
                acc_clock_hz: spec.acc_frequency_hz,
                ..Default::default()
            };
            platform.apply_override("app_region_pages", "128").unwrap();
            let report = run_simulation(&spec, &topo, &ilv, &workload, &platform).unwrap();
            results.push((report.total_cycles, report.aggregate_compute_ratio()));
        }
        let (base_cycles, base_ratio) = results[0];
        let (reused_cycles, reused_ratio) = results[1];
        assert!(
            base_ratio < 0.4,
            "{kernel}: unoptimized compute ratio {base_ratio:.3} must be below 0.4"
        );
        assert!(
            reused_ratio > 0.8,
            "{kernel}: reuse 0.2 compute ratio {reused_ratio:.3} must exceed 0.8"
        );
        let speedup = base_cycles as f64 / reused_cycles as f64;
        assert!(speedup > 1.0, "{kernel}: reuse must speed the run up");
        lines.push(format!(
            "{kernel} {base_ratio:.2}->{reused_ratio:.2} ({speedup:.2}x)"
        ));
    }
    println!(
        "ACCEPTANCE 9 PASS: reuse 1.0 -> 0.2 lifts compute ratio below 0.4 to above 0.8 \
         with speedup > 1 on every kernel [{}]",
        lines.join(", ")
    );
}

#[test]
fn criterion_10_determinism_and_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ara_example.xml");
    let spec = parse_spec(&std::fs::read_to_string(spec_path).unwrap()).unwrap();
    let ctx = SweepContext {
        platform: PlatformModel {
            acc_clock_hz: spec.acc_frequency_hz,
            ..Default::default()
        },
        spec,
        kernels: builtin_kernels(),
        workload_source: WorkloadSource::Pattern(parse_pattern("poisson:900:24:5").unwrap()),
    };
    let axes = Axes {
        coherency: vec!["llc".into(), "dram".into()],
        interleave: vec!["intra".into(), "inter".into()],
        ..Default::default()
    };

    let rows1 = run_sweep(&ctx, &axes, 512).unwrap();
    let rows2 = run_sweep(&ctx, &axes, 512).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_csv(&rows1, &a).unwrap();
    write_csv(&rows2, &b).unwrap();
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "reruns must be byte-identical"
    );

    for row in &rows1 {
        let r = &row.report;
        assert_eq!(r.dmac_bytes.iter().sum::<u64>(), r.bytes_total);
        assert_eq!(r.bytes_total, r.pages_transferred * PAGE_BYTES);
        assert!(r.tlb_misses <= r.tlb_accesses);
        let json1 = r.to_json();
        assert_eq!(json1, r.to_json());
    }
    println!(
        "ACCEPTANCE 10 PASS: sweep rerun byte-identical over {} rows; \
         per-DMAC bytes sum to pages x 4096 and tlb_misses <= tlb_accesses in every report",
        rows1.len()
    );
}
