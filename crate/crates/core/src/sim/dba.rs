//! Dynamic buffer allocation with the starvation-free occupied/reserved
//! flag scheme.
//!
//! A bank is allocatable only while neither occupied nor reserved (by
//! someone else). Only the task at the head of the list may mark banks
//! reserved, covering its full demand across free and occupied banks; once
//! every reserved bank has drained, the head completes. After the head
//! pre-step the list is scanned in order and each task is granted greedily
//! iff a full one-bank-per-port matching exists among the banks its ports
//! reach. By default the scan skips unsatisfiable tasks and continues;
//! `stop_at_first` stops the scan instead.

use serde::Serialize;

use crate::crossbar::CrossbarTopology;
use crate::error::{Error, Result};
use crate::matching::saturating_matching;

pub type TaskId = u64;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BankFlag {
    pub occupied: bool,
    pub reserved: bool,
    pub owner: Option<TaskId>,
    pub reserver: Option<TaskId>,
}

/// Per-bank occupied/reserved state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferFlags {
    banks: Vec<BankFlag>,
}

impl BufferFlags {
    pub fn new(num_banks: usize) -> Self {
        BufferFlags {
            banks: vec![BankFlag::default(); num_banks],
        }
    }

    pub fn num_banks(&self) -> usize {
        self.banks.len()
    }

    pub fn bank(&self, id: usize) -> &BankFlag {
        &self.banks[id]
    }

    pub fn occupy(&mut self, bank: usize, task: TaskId) -> Result<()> {
        let flag = &mut self.banks[bank];
        if flag.occupied {
            return Err(Error::Simulation(format!(
                "bank {bank} granted to task {task} while still owned by task {:?}",
                flag.owner
            )));
        }
        flag.occupied = true;
        flag.owner = Some(task);
        Ok(())
    }

    /// Drop occupancy; a reservation by another task stays in force.
    pub fn release(&mut self, bank: usize) {
        let flag = &mut self.banks[bank];
        flag.occupied = false;
        flag.owner = None;
    }

    pub fn reserve(&mut self, bank: usize, task: TaskId) {
        let flag = &mut self.banks[bank];
        flag.reserved = true;
        flag.reserver = Some(task);
    }

    pub fn clear_reservations_of(&mut self, task: TaskId) -> Vec<usize> {
        let mut cleared = Vec::new();
        for (id, flag) in self.banks.iter_mut().enumerate() {
            if flag.reserver == Some(task) {
                flag.reserved = false;
                flag.reserver = None;
                cleared.push(id);
            }
        }
        cleared
    }

    pub fn has_reservation(&self, task: TaskId) -> bool {
        self.banks.iter().any(|f| f.reserver == Some(task))
    }

    fn allocatable_by(&self, bank: usize, task: TaskId) -> bool {
        let f = &self.banks[bank];
        !f.occupied && (!f.reserved || f.reserver == Some(task))
    }

    fn reservable_by(&self, bank: usize, task: TaskId) -> bool {
        let f = &self.banks[bank];
        !f.reserved || f.reserver == Some(task)
    }
}

/// One pending allocation request, in task-list order.
#[derive(Debug, Clone)]
pub struct DbaRequest {
    pub task: TaskId,
    /// Bank demand; must equal the port count of the instances below.
    pub demand: usize,
    /// Free instances this task could start on, lowest id first.
    pub grant_candidates: Vec<usize>,
    /// Instance whose wiring anchors a reservation when none are free.
    pub reserve_candidate: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grant {
    pub task: TaskId,
    pub instance: usize,
    /// One bank per port, in port order.
    pub banks: Vec<usize>,
}

/// Flag updates produced by one allocation pass.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DbaOutcome {
    pub grants: Vec<Grant>,
    pub new_reservations: Vec<(usize, TaskId)>,
    pub cleared_reservations: Vec<usize>,
}

impl DbaOutcome {
    pub fn is_empty(&self) -> bool {
        self.grants.is_empty() && self.new_reservations.is_empty()
    }
}

/// Apply an outcome to the flag state.
pub fn apply_outcome(flags: &mut BufferFlags, outcome: &DbaOutcome) -> Result<()> {
    for &(bank, task) in &outcome.new_reservations {
        flags.reserve(bank, task);
    }
    for grant in &outcome.grants {
        flags.clear_reservations_of(grant.task);
        for &bank in &grant.banks {
            flags.occupy(bank, grant.task)?;
        }
    }
    Ok(())
}

fn grant_matching(
    topo: &CrossbarTopology,
    flags: &BufferFlags,
    task: TaskId,
    instance: usize,
) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..topo.port_count(instance))
        .map(|p| {
            topo.banks_of(instance, p)
                .iter()
                .copied()
                .filter(|&b| flags.allocatable_by(b, task))
                .collect()
        })
        .collect();
    saturating_matching(&adj, topo.num_banks())
}

/// One allocation pass over the task list. Returns the grants plus all flag
/// changes as a delta; the caller applies them with [`apply_outcome`].
pub fn dba_allocate(
    tasks: &[DbaRequest],
    flags: &BufferFlags,
    topo: &CrossbarTopology,
    stop_at_first: bool,
) -> Result<DbaOutcome> {
    let mut working = flags.clone();
    let mut outcome = DbaOutcome::default();

    for req in tasks {
        let ports = topo.port_count(req.reserve_candidate);
        if req.demand != ports {
            return Err(Error::Contract(format!(
                "task {} demand {} does not match instance {} port count {ports}",
                req.task, req.demand, req.reserve_candidate
            )));
        }
        // A task whose ports cannot be saturated even by the full bank set
        // can never run on this topology.
        let unrestricted: Vec<Vec<usize>> = (0..ports)
            .map(|p| topo.banks_of(req.reserve_candidate, p).to_vec())
            .collect();
        if saturating_matching(&unrestricted, topo.num_banks()).is_none() {
            return Err(Error::Capacity(format!(
                "task {} demands {} banks but instance {} cannot reach that many disjoint banks",
                req.task, req.demand, req.reserve_candidate
            )));
        }
    }

    // Head privilege: if the head cannot start right now, it reserves its
    // full demand so later tasks cannot starve it.
    if let Some(head) = tasks.first() {
        let grantable = head
            .grant_candidates
            .iter()
            .any(|&inst| grant_matching(topo, &working, head.task, inst).is_some());
        if !grantable && !working.has_reservation(head.task) {
            let inst = head.reserve_candidate;
            let adj: Vec<Vec<usize>> = (0..topo.port_count(inst))
                .map(|p| {
                    // Free banks first, then occupied, ascending within each;
                    // banks reserved by someone else are off the table.
                    let mut free = Vec::new();
                    let mut busy = Vec::new();
                    for &b in topo.banks_of(inst, p) {
                        if !working.reservable_by(b, head.task) {
                            continue;
                        }
                        if working.bank(b).occupied {
                            busy.push(b);
                        } else {
                            free.push(b);
                        }
                    }
                    free.extend(busy);
                    free
                })
                .collect();
            if let Some(assignment) = saturating_matching(&adj, topo.num_banks()) {
                for &bank in &assignment {
                    working.reserve(bank, head.task);
                    outcome.new_reservations.push((bank, head.task));
                }
            }
        }
    }

    // Instances granted earlier in this same scan are off the table, even
    // when their remaining banks would admit another matching.
    let mut taken = std::collections::BTreeSet::new();
    for req in tasks {
        let mut granted = false;
        for &inst in &req.grant_candidates {
            if taken.contains(&inst) {
                continue;
            }
            if let Some(banks) = grant_matching(topo, &working, req.task, inst) {
                let cleared = working.clear_reservations_of(req.task);
                outcome.cleared_reservations.extend(cleared);
                for &bank in &banks {
                    working.occupy(bank, req.task)?;
                }
                outcome.grants.push(Grant {
                    task: req.task,
                    instance: inst,
                    banks,
                });
                taken.insert(inst);
                granted = true;
                break;
            }
        }
        if !granted && stop_at_first {
            break;
        }
    }

    Ok(outcome)
}
