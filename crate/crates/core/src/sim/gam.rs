//! Global accelerator manager: first-come first-serve instance scheduling
//! backed by the dynamic buffer allocator.
//!
//! The GAM keeps a free-instance table per accelerator type and one pending
//! FIFO. A request is granted once a free instance of its type exists and
//! the DBA finds a full bank matching for it; the queue is re-examined on
//! every release.

use std::collections::{BTreeSet, VecDeque};

use crate::crossbar::CrossbarTopology;
use crate::error::{Error, Result};
use crate::sim::dba::{apply_outcome, dba_allocate, BufferFlags, DbaRequest, Grant, TaskId};
use crate::spec::AccInstance;

#[derive(Debug, Clone)]
struct TypeInfo {
    name: String,
    instances: Vec<usize>,
    port_count: usize,
}

#[derive(Debug, Clone)]
pub struct PendingRequest {
    pub task: TaskId,
    pub type_idx: usize,
}

#[derive(Debug, Clone)]
pub struct GamState {
    types: Vec<TypeInfo>,
    free: Vec<BTreeSet<usize>>,
    /// instance -> holding task, while granted.
    granted: Vec<Option<TaskId>>,
    queue: VecDeque<PendingRequest>,
}

/// Scheduling stimuli, mirroring the software interface: a reservation
/// request arriving or an instance being freed.
#[derive(Debug, Clone)]
pub enum GamEvent {
    Reserve { task: TaskId, type_name: String },
    Free { instance: usize },
}

impl GamState {
    pub fn new(instances: &[AccInstance]) -> Self {
        let mut types: Vec<TypeInfo> = Vec::new();
        for inst in instances {
            match types.iter_mut().find(|t| t.name == inst.type_name) {
                Some(t) => t.instances.push(inst.instance_id),
                None => types.push(TypeInfo {
                    name: inst.type_name.clone(),
                    instances: vec![inst.instance_id],
                    port_count: inst.port_count,
                }),
            }
        }
        let free = types
            .iter()
            .map(|t| t.instances.iter().copied().collect())
            .collect();
        GamState {
            types,
            free,
            granted: vec![None; instances.len()],
            queue: VecDeque::new(),
        }
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn port_count_of_type(&self, type_idx: usize) -> usize {
        self.types[type_idx].port_count
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingRequest> {
        self.queue.iter()
    }

    pub fn has_free_instance(&self, type_idx: usize) -> bool {
        !self.free[type_idx].is_empty()
    }

    /// Enqueue a reservation. Requests for undeclared types are protocol
    /// errors, as are types declared with zero instances.
    pub fn enqueue_reserve(&mut self, task: TaskId, type_name: &str) -> Result<()> {
        let Some(type_idx) = self.type_index(type_name) else {
            return Err(Error::Protocol(format!(
                "reserve for type `{type_name}` which declares no instances"
            )));
        };
        self.queue.push_back(PendingRequest { task, type_idx });
        Ok(())
    }

    /// Return a granted instance to the free table.
    pub fn release(&mut self, instance: usize) -> Result<()> {
        if instance >= self.granted.len() || self.granted[instance].is_none() {
            return Err(Error::Protocol(format!(
                "freeing instance {instance} which is not granted"
            )));
        }
        self.granted[instance] = None;
        let type_idx = self
            .types
            .iter()
            .position(|t| t.instances.contains(&instance))
            .expect("instance belongs to a type");
        self.free[type_idx].insert(instance);
        Ok(())
    }

    /// Run one allocation pass over the pending FIFO, applying flag updates
    /// and removing granted requests from the queue.
    pub fn schedule(
        &mut self,
        flags: &mut BufferFlags,
        topo: &CrossbarTopology,
        stop_at_first: bool,
    ) -> Result<Vec<Grant>> {
        // Passes repeat until quiescent so a task exposed at the head by
        // this round's grants still exercises its reservation privilege at
        // the same instant.
        let mut all_grants = Vec::new();
        loop {
            if self.queue.is_empty() {
                return Ok(all_grants);
            }
            let requests: Vec<DbaRequest> = self
                .queue
                .iter()
                .map(|p| {
                    let ty = &self.types[p.type_idx];
                    let grant_candidates: Vec<usize> =
                        self.free[p.type_idx].iter().copied().collect();
                    let reserve_candidate = grant_candidates
                        .first()
                        .copied()
                        .unwrap_or_else(|| ty.instances[0]);
                    DbaRequest {
                        task: p.task,
                        demand: ty.port_count,
                        grant_candidates,
                        reserve_candidate,
                    }
                })
                .collect();

            let outcome = dba_allocate(&requests, flags, topo, stop_at_first)?;
            apply_outcome(flags, &outcome)?;
            for grant in &outcome.grants {
                self.granted[grant.instance] = Some(grant.task);
                for free in self.free.iter_mut() {
                    free.remove(&grant.instance);
                }
                let pos = self
                    .queue
                    .iter()
                    .position(|p| p.task == grant.task)
                    .expect("granted task was queued");
                self.queue.remove(pos);
            }
            let quiescent = outcome.is_empty();
            all_grants.extend(outcome.grants);
            if quiescent {
                return Ok(all_grants);
            }
        }
    }
}

/// Feed one event through the manager and return any resulting grants.
pub fn gam_schedule(
    state: &mut GamState,
    flags: &mut BufferFlags,
    topo: &CrossbarTopology,
    stop_at_first: bool,
    event: GamEvent,
) -> Result<Vec<Grant>> {
    match event {
        GamEvent::Reserve { task, type_name } => state.enqueue_reserve(task, &type_name)?,
        GamEvent::Free { instance } => state.release(instance)?,
    }
    state.schedule(flags, topo, stop_at_first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::private_buffer_topology;

    fn one_type(instances: usize, ports: usize) -> Vec<AccInstance> {
        (0..instances)
            .map(|i| AccInstance {
                instance_id: i,
                type_name: "k".into(),
                port_count: ports,
            })
            .collect()
    }

    #[test]
    fn fifo_grants_head_first() {
        let instances = one_type(1, 2);
        let topo = private_buffer_topology(&instances);
        let mut flags = BufferFlags::new(topo.num_banks());
        let mut gam = GamState::new(&instances);

        let grants = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Reserve {
                task: 1,
                type_name: "k".into(),
            },
        )
        .unwrap();
        assert_eq!(grants.len(), 1);
        assert_eq!(grants[0].instance, 0);

        // Second request queues behind the busy instance.
        let grants = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Reserve {
                task: 2,
                type_name: "k".into(),
            },
        )
        .unwrap();
        assert!(grants.is_empty());
        assert_eq!(gam.pending().count(), 1);
    }

    #[test]
    fn free_triggers_queued_grant() {
        let instances = one_type(1, 2);
        let topo = private_buffer_topology(&instances);
        let mut flags = BufferFlags::new(topo.num_banks());
        let mut gam = GamState::new(&instances);

        let g1 = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Reserve {
                task: 1,
                type_name: "k".into(),
            },
        )
        .unwrap();
        gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Reserve {
                task: 2,
                type_name: "k".into(),
            },
        )
        .unwrap();

        // Task 1 finishes: banks drain, instance frees, task 2 is granted.
        for &bank in &g1[0].banks {
            flags.release(bank);
        }
        let grants = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Free {
                instance: g1[0].instance,
            },
        )
        .unwrap();
        assert_eq!(grants.len(), 1);
        assert_eq!(grants[0].task, 2);
    }

    #[test]
    fn unknown_type_is_protocol_error() {
        let instances = one_type(1, 1);
        let topo = private_buffer_topology(&instances);
        let mut flags = BufferFlags::new(topo.num_banks());
        let mut gam = GamState::new(&instances);
        let err = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Reserve {
                task: 1,
                type_name: "ghost".into(),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }

    #[test]
    fn freeing_ungranted_instance_is_protocol_error() {
        let instances = one_type(2, 1);
        let topo = private_buffer_topology(&instances);
        let mut flags = BufferFlags::new(topo.num_banks());
        let mut gam = GamState::new(&instances);
        let err = gam_schedule(
            &mut gam,
            &mut flags,
            &topo,
            false,
            GamEvent::Free { instance: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }
}
