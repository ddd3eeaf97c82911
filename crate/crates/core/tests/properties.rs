//! Property tests over the synthesis and model invariants.

use proptest::prelude::*;

use arasim::crossbar::{
    buffer_demand, check_feasibility, cross_point_count, private_buffer_topology,
    synthesize_crossbar, Provenance,
};
use arasim::interleave::{dmac_load_profile, synthesize_interleave};
use arasim::sim::TlbState;
use arasim::spec::{
    expand_instances, parse_spec, to_xml, AccInstance, AccTypeSpec, AraSpec, CrossbarSpec,
    EvictPolicy, InterconnectSpec, InterleaveSpec, InterleaveStrategy, IommuSpec,
    SharedBuffersSpec,
};

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

prop_compose! {
    fn arb_system()(ports in prop::collection::vec(1usize..=12, 1..=8))
        (c in 1usize..=4, extra in 0usize..=8, ports in Just(ports))
        -> (Vec<usize>, usize, usize)
    {
        let c = c.min(ports.len());
        (ports, c, extra)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every synthesis passes the exhaustive matching oracle and, when the
    /// rotation needed no repair, obeys the cross-point count law.
    #[test]
    fn synthesis_feasible_and_counted((ports, c, extra) in arb_system()) {
        let instances = instances_of(&ports);
        let demand = buffer_demand(&instances, c).unwrap();
        let topo = synthesize_crossbar(&instances, demand + extra, c).unwrap();
        let report = check_feasibility(&topo, c).unwrap();
        prop_assert!(report.feasible, "violating subset {:?}", report.violating_subset);

        if topo.provenance() == Provenance::Constructed {
            let mut sorted = ports.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let p_top: usize = sorted[..c].iter().sum();
            let p_rest: usize = sorted[c..].iter().sum();
            prop_assert_eq!(cross_point_count(&topo), p_top + c * p_rest);
        }
    }

    /// Identical inputs give bit-identical topologies.
    #[test]
    fn synthesis_is_deterministic((ports, c, extra) in arb_system()) {
        let instances = instances_of(&ports);
        let demand = buffer_demand(&instances, c).unwrap();
        let a = synthesize_crossbar(&instances, demand + extra, c).unwrap();
        let b = synthesize_crossbar(&instances, demand + extra, c).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Buffer demand is non-decreasing in connectivity and tops out at the
    /// total port count.
    #[test]
    fn demand_monotone_in_connectivity(ports in prop::collection::vec(1usize..=12, 1..=8)) {
        let instances = instances_of(&ports);
        let mut last = 0;
        for c in 1..=ports.len() {
            let d = buffer_demand(&instances, c).unwrap();
            prop_assert!(d >= last);
            last = d;
        }
        prop_assert_eq!(last, ports.iter().sum::<usize>());
    }

    /// Every wired bank gets exactly one DMAC under both strategies, and the
    /// private topology wires one bank per port.
    #[test]
    fn interleave_total_over_wired_banks((ports, c, extra) in arb_system(), dmacs in 1usize..=6) {
        let instances = instances_of(&ports);
        let demand = buffer_demand(&instances, c).unwrap();
        let topo = synthesize_crossbar(&instances, demand + extra, c).unwrap();
        for strategy in [InterleaveStrategy::IntraAcc, InterleaveStrategy::InterAcc] {
            let map = synthesize_interleave(&topo, dmacs, strategy).unwrap();
            for bank in topo.wired_banks() {
                let d = map.dmac_of(bank);
                prop_assert!(d.is_some());
                prop_assert!(d.unwrap() < dmacs);
            }
        }
        let private = private_buffer_topology(&instances);
        prop_assert_eq!(private.num_banks(), ports.iter().sum::<usize>());
        prop_assert_eq!(cross_point_count(&private), private.num_banks());
    }

    /// On a private topology an instance's one-bank-per-port burst spreads
    /// within one request of perfectly even under intra interleaving.
    #[test]
    fn intra_spreads_private_bursts(ports in prop::collection::vec(1usize..=12, 1..=6), dmacs in 1usize..=6) {
        let instances = instances_of(&ports);
        let topo = private_buffer_topology(&instances);
        let map = synthesize_interleave(&topo, dmacs, InterleaveStrategy::IntraAcc).unwrap();
        for inst in 0..topo.num_instances() {
            let batch: Vec<usize> =
                (0..topo.port_count(inst)).map(|p| topo.banks_of(inst, p)[0]).collect();
            let profile = dmac_load_profile(&map, &batch).unwrap();
            let max = *profile.iter().max().unwrap();
            let min = *profile.iter().min().unwrap();
            prop_assert!(max - min <= 1, "instance {inst}: {profile:?}");
        }
    }

    /// LRU inclusion: misses never increase with capacity on a fixed stream.
    #[test]
    fn tlb_misses_monotone_in_capacity(stream in prop::collection::vec(0u64..64, 1..=512)) {
        let mut last = u64::MAX;
        for cap in [2usize, 4, 8, 16, 32, 64] {
            let mut tlb = TlbState::new(cap);
            for &page in &stream {
                tlb.access(page);
            }
            prop_assert!(tlb.misses() <= last);
            last = tlb.misses();
        }
    }

    /// Spec serialization round-trips through the XML file format.
    #[test]
    fn spec_xml_round_trip(
        num_types in 1usize..=4,
        seed_ports in prop::collection::vec(1u64..=12, 4),
        seed_counts in prop::collection::vec(1u64..=3, 4),
        banks in 1u64..=64,
        dmacs in 1u64..=8,
        c in 1u64..=4,
        tlb in 1u64..=16384,
        coherent in any::<bool>(),
        intra in any::<bool>(),
    ) {
        let acc_types: Vec<AccTypeSpec> = (0..num_types)
            .map(|i| AccTypeSpec {
                name: format!("kern{i}"),
                num_instances: seed_counts[i],
                num_params: i as u64,
                port_count: seed_ports[i],
                port_buffer_size_bytes: 16384,
            })
            .collect();
        let spec = AraSpec {
            acc_types,
            shared_buffers: SharedBuffersSpec { size_bytes: 16384, count: banks, num_dmacs: dmacs },
            interconnect: InterconnectSpec {
                acc_to_buf: CrossbarSpec { connectivity: c, auto: true },
                buf_to_dmac: InterleaveSpec {
                    strategy: if intra {
                        InterleaveStrategy::IntraAcc
                    } else {
                        InterleaveStrategy::InterAcc
                    },
                    auto: true,
                },
            },
            iommu: IommuSpec { tlb_entries: tlb, evict_policy: EvictPolicy::Lru },
            coherent_cache: coherent,
            acc_frequency_hz: 100_000_000,
        };
        let reparsed = parse_spec(&to_xml(&spec)).unwrap();
        prop_assert_eq!(&reparsed, &spec);
        // Expansion preserves counts and port shapes.
        let instances = expand_instances(&spec);
        prop_assert_eq!(instances.len() as u64, spec.total_instances());
        for inst in &instances {
            let ty = spec.acc_type(&inst.type_name).unwrap();
            prop_assert_eq!(inst.port_count as u64, ty.port_count);
        }
    }
}
