//! Partial-crossbar synthesis between accelerator ports and shared buffer
//! banks.
//!
//! The construction dedicates banks to the `c` instances with the largest
//! port demand (one bank per port) and wires every port of each remaining
//! instance to `c` banks, one inside the dedicated range of each of `c`
//! distinct top instances, rotated per instance so simultaneous activations
//! spread out. An exhaustive bipartite-matching oracle verifies that any
//! subset of at most `c` instances can claim disjoint banks; when the
//! rotation fails the oracle, cross points are added one at a time until it
//! passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{maximum_matching, saturating_matching};
use crate::spec::AccInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constructed,
    Repaired,
}

/// A synthesized accelerator-port to buffer-bank switch network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossbarTopology {
    num_banks: usize,
    connectivity_c: usize,
    provenance: Provenance,
    /// banks[instance][port] -> sorted bank ids reachable from that port.
    banks: Vec<Vec<Vec<usize>>>,
}

impl CrossbarTopology {
    pub fn num_banks(&self) -> usize {
        self.num_banks
    }

    pub fn connectivity(&self) -> usize {
        self.connectivity_c
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn num_instances(&self) -> usize {
        self.banks.len()
    }

    pub fn port_count(&self, instance: usize) -> usize {
        self.banks[instance].len()
    }

    pub fn total_ports(&self) -> usize {
        self.banks.iter().map(|p| p.len()).sum()
    }

    /// Banks reachable from one port.
    pub fn banks_of(&self, instance: usize, port: usize) -> &[usize] {
        &self.banks[instance][port]
    }

    /// All banks reachable from any port of an instance, ascending.
    pub fn instance_banks(&self, instance: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.banks[instance].iter().flatten().copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Banks wired to at least one port, ascending.
    pub fn wired_banks(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.banks.iter().flatten().flatten().copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(TopologyWire::from(self)).expect("topology serializes")
    }

    pub fn from_json_value(value: &serde_json::Value) -> Result<Self> {
        let wire: TopologyWire = serde_json::from_value(value.clone())?;
        wire.try_into()
    }
}

/// Wire format: `port_map` is a list of `[instance, port, [banks]]` rows.
#[derive(Serialize, Deserialize)]
struct TopologyWire {
    num_banks: usize,
    connectivity: usize,
    provenance: Provenance,
    port_map: Vec<(usize, usize, Vec<usize>)>,
}

impl From<&CrossbarTopology> for TopologyWire {
    fn from(t: &CrossbarTopology) -> Self {
        let mut port_map = Vec::new();
        for (i, ports) in t.banks.iter().enumerate() {
            for (p, banks) in ports.iter().enumerate() {
                port_map.push((i, p, banks.clone()));
            }
        }
        TopologyWire {
            num_banks: t.num_banks,
            connectivity: t.connectivity_c,
            provenance: t.provenance,
            port_map,
        }
    }
}

impl TryFrom<TopologyWire> for CrossbarTopology {
    type Error = Error;
    fn try_from(w: TopologyWire) -> Result<Self> {
        let num_instances = w.port_map.iter().map(|(i, _, _)| i + 1).max().unwrap_or(0);
        let mut banks: Vec<Vec<Vec<usize>>> = vec![Vec::new(); num_instances];
        for (i, p, mut b) in w.port_map {
            if banks[i].len() <= p {
                banks[i].resize(p + 1, Vec::new());
            }
            b.sort_unstable();
            if b.iter().any(|&bank| bank >= w.num_banks) {
                return Err(Error::Config(format!(
                    "topology wires instance {i} port {p} to a bank beyond num_banks {}",
                    w.num_banks
                )));
            }
            banks[i][p] = b;
        }
        Ok(CrossbarTopology {
            num_banks: w.num_banks,
            connectivity_c: w.connectivity,
            provenance: w.provenance,
            banks,
        })
    }
}

/// Feasibility verdict from the exhaustive subset oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Lexicographically first subset (sizes ascending) without a perfect
    /// matching of its ports onto banks.
    pub violating_subset: Option<Vec<usize>>,
    pub checked_subsets: u64,
}

/// Maximum number of instances the exhaustive oracle accepts.
pub const ORACLE_INSTANCE_LIMIT: usize = 16;

/// Banks needed so any `c` simultaneously active instances can hold one bank
/// per port: the sum of the `c` largest port counts.
pub fn buffer_demand(instances: &[AccInstance], c: usize) -> Result<usize> {
    if c == 0 || c > instances.len() {
        return Err(Error::Contract(format!(
            "connectivity {c} out of range 1..={}",
            instances.len()
        )));
    }
    let mut ports: Vec<usize> = instances.iter().map(|i| i.port_count).collect();
    ports.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ports[..c].iter().sum())
}

fn check_dense_ids(instances: &[AccInstance]) -> Result<()> {
    for (i, inst) in instances.iter().enumerate() {
        if inst.instance_id != i {
            return Err(Error::Contract(format!(
                "instance ids must be dense and ordered; found id {} at position {i}",
                inst.instance_id
            )));
        }
    }
    Ok(())
}

/// Instance indices sorted by port count descending, ties by id ascending.
fn sorted_by_demand(instances: &[AccInstance]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(instances[i].port_count), i));
    order
}

/// Synthesize the partial crossbar for `instances` over `num_buffers` banks
/// with connectivity `c`. The result always passes [`check_feasibility`];
/// provenance records whether the repair pass had to run.
pub fn synthesize_crossbar(
    instances: &[AccInstance],
    num_buffers: usize,
    c: usize,
) -> Result<CrossbarTopology> {
    check_dense_ids(instances)?;
    let demand = buffer_demand(instances, c)?;
    if num_buffers < demand {
        return Err(Error::Capacity(format!(
            "{num_buffers} banks cannot satisfy buffer demand {demand} at connectivity {c}"
        )));
    }

    let order = sorted_by_demand(instances);
    let tops = &order[..c];
    let rest = &order[c..];

    // Dedicated ranges: the top-c instances in sorted order own banks
    // 0..p_top, one bank per port.
    let mut banks: Vec<Vec<Vec<usize>>> = instances
        .iter()
        .map(|i| vec![Vec::new(); i.port_count])
        .collect();
    let mut range_start = vec![0usize; c];
    let mut next_bank = 0usize;
    for (k, &t) in tops.iter().enumerate() {
        range_start[k] = next_bank;
        for port_banks in banks[t].iter_mut() {
            port_banks.push(next_bank);
            next_bank += 1;
        }
    }

    // Every port of each remaining instance reaches one bank inside each of
    // the c dedicated ranges, rotated by the instance's position among the
    // remainder so concurrent activations land on different banks.
    for (j, &r) in rest.iter().enumerate() {
        for (p, port_banks) in banks[r].iter_mut().enumerate() {
            let mut chosen = Vec::with_capacity(c);
            for k in 0..c {
                let slot = (j + k) % c;
                let top_ports = instances[tops[slot]].port_count;
                chosen.push(range_start[slot] + (j + p) % top_ports);
            }
            chosen.sort_unstable();
            *port_banks = chosen;
        }
    }

    let topo = CrossbarTopology {
        num_banks: num_buffers,
        connectivity_c: c,
        provenance: Provenance::Constructed,
        banks,
    };

    let report = check_feasibility(&topo, c)?;
    if report.feasible {
        Ok(topo)
    } else {
        repair_topology(topo, &report)
    }
}

/// Total cross points: one per (port, bank) wire.
pub fn cross_point_count(topo: &CrossbarTopology) -> usize {
    topo.banks.iter().flatten().map(|b| b.len()).sum()
}

/// One private bank per port; `num_banks` equals the total port count.
pub fn private_buffer_topology(instances: &[AccInstance]) -> CrossbarTopology {
    let mut banks: Vec<Vec<Vec<usize>>> = Vec::with_capacity(instances.len());
    let mut next = 0usize;
    for inst in instances {
        let mut ports = Vec::with_capacity(inst.port_count);
        for _ in 0..inst.port_count {
            ports.push(vec![next]);
            next += 1;
        }
        banks.push(ports);
    }
    CrossbarTopology {
        num_banks: next,
        connectivity_c: instances.len().max(1),
        provenance: Provenance::Constructed,
        banks,
    }
}

/// Exhaustively test every instance subset of size 1..=c for a perfect
/// matching of its ports onto banks.
pub fn check_feasibility(topo: &CrossbarTopology, c: usize) -> Result<FeasibilityReport> {
    let n = topo.num_instances();
    if n > ORACLE_INSTANCE_LIMIT {
        return Err(Error::Contract(format!(
            "exhaustive feasibility oracle supports at most {ORACLE_INSTANCE_LIMIT} instances \
             (got {n}); check sampled subsets instead"
        )));
    }
    let (checked, violation) = first_violation(topo, c);
    Ok(FeasibilityReport {
        feasible: violation.is_none(),
        violating_subset: violation,
        checked_subsets: checked,
    })
}

fn subset_feasible(topo: &CrossbarTopology, subset: &[usize]) -> bool {
    let adj = subset_adjacency(topo, subset);
    saturating_matching(&adj, topo.num_banks).is_some()
}

/// Candidate lists for every port of the subset, ordered by (instance, port).
fn subset_adjacency(topo: &CrossbarTopology, subset: &[usize]) -> Vec<Vec<usize>> {
    let mut adj = Vec::new();
    for &i in subset {
        for p in 0..topo.port_count(i) {
            adj.push(topo.banks_of(i, p).to_vec());
        }
    }
    adj
}

/// Scan subsets in ascending size, lexicographic within a size. Returns the
/// number of subsets examined and the first violation found.
fn first_violation(topo: &CrossbarTopology, c: usize) -> (u64, Option<Vec<usize>>) {
    let n = topo.num_instances();
    let mut checked = 0u64;
    let mut subset = Vec::new();
    for k in 1..=c.min(n) {
        if let Some(v) = scan_combinations(topo, 0, k, n, &mut subset, &mut checked) {
            return (checked, Some(v));
        }
    }
    (checked, None)
}

fn scan_combinations(
    topo: &CrossbarTopology,
    start: usize,
    remaining: usize,
    n: usize,
    subset: &mut Vec<usize>,
    checked: &mut u64,
) -> Option<Vec<usize>> {
    if remaining == 0 {
        *checked += 1;
        if !subset_feasible(topo, subset) {
            return Some(subset.clone());
        }
        return None;
    }
    for i in start..=n.saturating_sub(remaining) {
        subset.push(i);
        let hit = scan_combinations(topo, i + 1, remaining - 1, n, subset, checked);
        subset.pop();
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Add cross points until the topology passes the oracle. Each step picks an
/// unmatched port of the current violating subset (smallest candidate set
/// first) and wires it to the lowest-id bank that restores a matching.
pub fn repair_topology(
    topo: CrossbarTopology,
    report: &FeasibilityReport,
) -> Result<CrossbarTopology> {
    if report.feasible {
        return Ok(topo);
    }
    let c = topo.connectivity_c;
    let n = topo.num_instances();
    // Even a full crossbar cannot help when some admissible subset demands
    // more ports than there are banks.
    let mut ports: Vec<usize> = topo.banks.iter().map(|p| p.len()).collect();
    ports.sort_unstable_by(|a, b| b.cmp(a));
    let worst: usize = ports.iter().take(c.min(n)).sum();
    if worst > topo.num_banks {
        return Err(Error::Capacity(format!(
            "demand {worst} exceeds {} banks; no feasible topology exists",
            topo.num_banks
        )));
    }

    let mut topo = topo;
    topo.provenance = Provenance::Repaired;
    while let (_, Some(subset)) = first_violation(&topo, c) {
        let adj = subset_adjacency(&topo, &subset);
        let m = maximum_matching(&adj, topo.num_banks);
        // Map flat adjacency rows back to (instance, port).
        let mut rows = Vec::new();
        for &i in &subset {
            for p in 0..topo.port_count(i) {
                rows.push((i, p));
            }
        }
        let victim = rows
            .iter()
            .enumerate()
            .filter(|(row, _)| m.left_to_right[*row].is_none())
            .min_by_key(|(row, &(i, p))| (adj[*row].len(), i, p))
            .map(|(row, &(i, p))| (row, i, p));
        let Some((row, inst, port)) = victim else {
            return Err(Error::Capacity(
                "violating subset has no unmatched port; repair cannot make progress".into(),
            ));
        };

        let mut added = None;
        // Prefer a bank that saturates the subset outright.
        for bank in 0..topo.num_banks {
            if adj[row].contains(&bank) {
                continue;
            }
            let mut trial = adj.clone();
            trial[row].push(bank);
            trial[row].sort_unstable();
            if saturating_matching(&trial, topo.num_banks).is_some() {
                added = Some(bank);
                break;
            }
        }
        // Otherwise take the first bank that grows the matching at all.
        if added.is_none() {
            for bank in 0..topo.num_banks {
                if adj[row].contains(&bank) {
                    continue;
                }
                let mut trial = adj.clone();
                trial[row].push(bank);
                trial[row].sort_unstable();
                if maximum_matching(&trial, topo.num_banks).size > m.size {
                    added = Some(bank);
                    break;
                }
            }
        }
        let Some(bank) = added else {
            return Err(Error::Capacity(format!(
                "no bank restores a matching for subset {subset:?}"
            )));
        };
        topo.banks[inst][port].push(bank);
        topo.banks[inst][port].sort_unstable();
    }
    Ok(topo)
}
