//! Deterministic discrete-event simulation of the accelerator plane.
//!
//! Time is counted in accelerator-clock cycles. Events are processed in
//! (time, insertion-sequence) order, so identical inputs replay identically.
//!
//! A task moves through: reserve (FCFS queue) -> grant (instance plus one
//! bank per port from the DBA) -> prefetch (pages translate through the
//! shared TLB, misses resolve in batches, transfers queue FIFO per DMAC and
//! contend for the physical port pool) -> compute (consumes input pages in
//! order, overlapped with later transfers) -> writeback (output pages unlock
//! as compute progresses) -> cache invalidation when coherent at DRAM ->
//! free. An app's streamed pages walk a wrapping window of its address
//! space, so TLB locality across tasks follows the window size.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::crossbar::CrossbarTopology;
use crate::error::{Error, Result};
use crate::interleave::InterleaveMap;
use crate::sim::dba::BufferFlags;
use crate::sim::gam::GamState;
use crate::sim::platform::{
    handle_tlb_miss_batch, invalidate_pages, Coherency, PlatformModel, PAGE_BYTES,
};
use crate::sim::report::{CounterSnapshot, InstancePerf, PerfReport};
use crate::sim::tlb::{Lookup, TlbState};
use crate::spec::{expand_instances, AccInstance, AraSpec};
use crate::workload::{KernelDescriptor, Verb, Workload};

type TaskId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    In,
    Out,
}

#[derive(Debug, Clone)]
enum Ev {
    /// Process workload event at this index.
    Trace(usize),
    BeginExec(TaskId),
    /// A page's translation is resolved; enqueue its DMA request.
    TransferReady {
        task: TaskId,
        dir: Dir,
        idx: u64,
    },
    TransferDone {
        dmac: usize,
    },
    ComputeChunkDone(TaskId),
    TaskComplete(TaskId),
}

#[derive(Debug)]
struct QEntry {
    time: u64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for QEntry {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for QEntry {}
impl PartialOrd for QEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone)]
struct Transfer {
    task: TaskId,
    dir: Dir,
    idx: u64,
    enq_seq: u64,
}

#[derive(Debug, Default)]
struct DmacState {
    queue: VecDeque<Transfer>,
    serving: Option<Transfer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    Pending,
    Granted,
    Executing,
    Completed,
}

#[derive(Debug)]
struct TaskRun {
    app: usize,
    kernel: KernelDescriptor,
    state: TaskState,
    instance: Option<usize>,
    banks: Vec<usize>,
    n_in: u64,
    n_out: u64,
    compute_total: u64,
    in_vpns: Vec<u64>,
    out_vpns: Vec<u64>,
    arrived_in: Vec<bool>,
    consumed: u64,
    computing: bool,
    outs_unlocked: u64,
    outs_done: u64,
    out_miss_batch: Vec<u64>,
    stall_cycles: u64,
    params_time: Option<u64>,
    exec_start: u64,
    completion_scheduled: bool,
    auto_free: bool,
    free_seen: bool,
    released: bool,
}

impl TaskRun {
    fn chunk_len(&self, index: u64) -> u64 {
        if self.n_in == 0 {
            return self.compute_total;
        }
        let base = self.compute_total / self.n_in;
        let extra = self.compute_total % self.n_in;
        base + u64::from(index < extra)
    }

    /// Input pages that must be consumed before output page `j` unlocks.
    fn out_unlock_threshold(&self, j: u64) -> u64 {
        if self.n_in == 0 || self.n_out == 0 {
            return 0;
        }
        ((j + 1) * self.n_in).div_ceil(self.n_out).min(self.n_in)
    }
}

#[derive(Debug, Default, Clone)]
struct InstanceStat {
    busy: u64,
    compute: u64,
    stall: u64,
    tasks: u64,
}

#[derive(Debug)]
pub struct Simulation {
    platform: PlatformModel,
    coherency: Coherency,
    topology: CrossbarTopology,
    interleave: InterleaveMap,
    workload: Workload,
    instances: Vec<AccInstance>,

    events: BinaryHeap<Reverse<QEntry>>,
    seq: u64,
    clock: u64,

    gam: GamState,
    flags: BufferFlags,
    tlb: TlbState,
    dmacs: Vec<DmacState>,
    ports_in_use: u32,

    tasks: Vec<TaskRun>,
    open_task: BTreeMap<usize, TaskId>,
    app_cursor_in: Vec<u64>,
    app_cursor_out: Vec<u64>,

    stats: Vec<InstanceStat>,
    miss_handler_free: u64,
    dmac_bytes: Vec<u64>,
    pages_transferred: u64,
    miss_handling_cycles: u64,
    invalidation_cycles: u64,
    tasks_completed: u64,
    total_cycles: u64,
}

impl Simulation {
    pub fn new(
        spec: &AraSpec,
        topology: &CrossbarTopology,
        interleave: &InterleaveMap,
        workload: &Workload,
        platform: &PlatformModel,
    ) -> Result<Self> {
        let instances = expand_instances(spec);
        if topology.num_instances() != instances.len() {
            return Err(Error::Config(format!(
                "topology covers {} instances but the spec expands to {}",
                topology.num_instances(),
                instances.len()
            )));
        }
        for inst in &instances {
            if topology.port_count(inst.instance_id) != inst.port_count {
                return Err(Error::Config(format!(
                    "instance {} has {} ports in the topology but {} in the spec",
                    inst.instance_id,
                    topology.port_count(inst.instance_id),
                    inst.port_count
                )));
            }
        }
        if interleave.num_dmacs == 0 {
            return Err(Error::Config("interleave map has zero DMACs".into()));
        }
        for bank in topology.wired_banks() {
            if interleave.dmac_of(bank).is_none() {
                return Err(Error::Config(format!("bank {bank} has no DMAC assignment")));
            }
        }
        // Every kernel the trace invokes must name a declared type with a
        // matching port shape.
        for ev in &workload.events {
            if ev.app >= workload.apps.len() {
                return Err(Error::Config(format!(
                    "trace event references app index {} but only {} apps exist",
                    ev.app,
                    workload.apps.len()
                )));
            }
            if let Some(name) = &ev.kernel {
                let kernel = workload
                    .kernels
                    .get(name)
                    .ok_or_else(|| Error::Config(format!("unknown kernel `{name}`")))?;
                let ty = spec.acc_type(name).ok_or_else(|| {
                    Error::Config(format!("kernel `{name}` has no declared acc type"))
                })?;
                if ty.port_count != kernel.port_count {
                    return Err(Error::Config(format!(
                        "kernel `{name}` has {} ports but acc type declares {}",
                        kernel.port_count, ty.port_count
                    )));
                }
                kernel.validate()?;
            }
        }

        let coherency = if spec.coherent_cache {
            Coherency::Llc
        } else {
            Coherency::Dram
        };
        let num_apps = workload.apps.len();
        let num_dmacs = interleave.num_dmacs;
        let mut sim = Simulation {
            platform: platform.clone(),
            coherency,
            topology: topology.clone(),
            interleave: interleave.clone(),
            workload: workload.clone(),
            gam: GamState::new(&instances),
            flags: BufferFlags::new(topology.num_banks()),
            tlb: TlbState::new(spec.iommu.tlb_entries as usize),
            dmacs: (0..num_dmacs).map(|_| DmacState::default()).collect(),
            ports_in_use: 0,
            events: BinaryHeap::new(),
            seq: 0,
            clock: 0,
            tasks: Vec::new(),
            open_task: BTreeMap::new(),
            app_cursor_in: vec![0; num_apps],
            app_cursor_out: vec![0; num_apps],
            stats: vec![InstanceStat::default(); instances.len()],
            miss_handler_free: 0,
            dmac_bytes: vec![0; num_dmacs],
            pages_transferred: 0,
            miss_handling_cycles: 0,
            invalidation_cycles: 0,
            tasks_completed: 0,
            total_cycles: 0,
            instances,
        };
        for i in 0..sim.workload.events.len() {
            let t = sim.workload.events[i].time;
            sim.push(t, Ev::Trace(i));
        }
        Ok(sim)
    }

    fn push(&mut self, time: u64, ev: Ev) {
        let seq = self.seq;
        self.seq += 1;
        self.events.push(Reverse(QEntry { time, seq, ev }));
    }

    /// Process one event. Returns false once the queue is empty.
    pub fn step(&mut self) -> Result<bool> {
        let Some(Reverse(entry)) = self.events.pop() else {
            return Ok(false);
        };
        debug_assert!(entry.time >= self.clock, "time must not run backwards");
        self.clock = entry.time;
        match entry.ev {
            Ev::Trace(i) => self.on_trace(i)?,
            Ev::BeginExec(task) => self.on_begin_exec(task)?,
            Ev::TransferReady { task, dir, idx } => self.on_transfer_ready(task, dir, idx)?,
            Ev::TransferDone { dmac } => self.on_transfer_done(dmac)?,
            Ev::ComputeChunkDone(task) => self.on_chunk_done(task)?,
            Ev::TaskComplete(task) => self.on_task_complete(task)?,
        }
        Ok(true)
    }

    pub fn run_to_completion(&mut self) -> Result<()> {
        while self.step()? {}
        let blocked: Vec<String> = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.state != TaskState::Completed)
            .map(|(id, t)| {
                let why = match t.state {
                    TaskState::Pending => "waiting for an instance and buffers",
                    TaskState::Granted => "granted but never received send_param",
                    _ => "stuck mid-execution",
                };
                format!("task {id} (app {}, kernel {}): {why}", t.app, t.kernel.name)
            })
            .collect();
        if !blocked.is_empty() {
            return Err(Error::Simulation(format!(
                "no events left but {} task(s) cannot finish: {}",
                blocked.len(),
                blocked.join("; ")
            )));
        }
        Ok(())
    }

    pub fn counters(&self) -> CounterSnapshot {
        CounterSnapshot {
            tlb_accesses: self.tlb.accesses(),
            tlb_misses: self.tlb.misses(),
            miss_handling_cycles: self.miss_handling_cycles,
            pages_transferred: self.pages_transferred,
            dmac_bytes: self.dmac_bytes.clone(),
        }
    }

    /// Zero the TLB and DMAC counters; task and cycle accounting stays.
    pub fn reset_counters(&mut self) {
        self.tlb.reset_counters();
        self.miss_handling_cycles = 0;
        self.pages_transferred = 0;
        for b in self.dmac_bytes.iter_mut() {
            *b = 0;
        }
    }

    pub fn report(&self) -> PerfReport {
        let bytes_total: u64 = self.dmac_bytes.iter().sum();
        let bandwidth = if self.total_cycles == 0 {
            0.0
        } else {
            bytes_total as f64 / (self.total_cycles as f64 / self.platform.acc_clock_hz as f64)
        };
        let instances = self
            .instances
            .iter()
            .map(|inst| {
                let s = &self.stats[inst.instance_id];
                InstancePerf {
                    instance_id: inst.instance_id,
                    type_name: inst.type_name.clone(),
                    tasks_completed: s.tasks,
                    busy_cycles: s.busy,
                    compute_cycles: s.compute,
                    stall_cycles: s.stall,
                    compute_ratio: if s.busy == 0 {
                        0.0
                    } else {
                        s.compute as f64 / s.busy as f64
                    },
                }
            })
            .collect();
        PerfReport {
            total_cycles: self.total_cycles,
            tasks_completed: self.tasks_completed,
            instances,
            tlb_accesses: self.tlb.accesses(),
            tlb_misses: self.tlb.misses(),
            miss_handling_cycles: self.miss_handling_cycles,
            invalidation_cycles: self.invalidation_cycles,
            pages_transferred: self.pages_transferred,
            bytes_total,
            dmac_bytes: self.dmac_bytes.clone(),
            achieved_bandwidth_bytes_per_sec: bandwidth,
        }
    }

    // -- event handlers -----------------------------------------------------

    fn on_trace(&mut self, index: usize) -> Result<()> {
        let ev = self.workload.events[index].clone();
        match ev.verb {
            Verb::Run | Verb::Reserve => {
                let kernel_name = ev.kernel.as_deref().expect("validated at load");
                let kernel = self.workload.kernels[kernel_name].clone();
                if self.gam.type_index(kernel_name).is_none() {
                    return Err(Error::Protocol(format!("no instances of `{kernel_name}`")));
                }
                let task_id = self.tasks.len() as TaskId;
                let n_in = kernel.effective_pages_in(ev.multiplier);
                let n_out = kernel.effective_pages_out(ev.multiplier);
                let compute_total = kernel.compute_cycles(ev.multiplier);
                self.tasks.push(TaskRun {
                    app: ev.app,
                    state: TaskState::Pending,
                    instance: None,
                    banks: Vec::new(),
                    n_in,
                    n_out,
                    compute_total,
                    in_vpns: Vec::new(),
                    out_vpns: Vec::new(),
                    arrived_in: vec![false; n_in as usize],
                    consumed: 0,
                    computing: false,
                    outs_unlocked: 0,
                    outs_done: 0,
                    out_miss_batch: Vec::new(),
                    stall_cycles: 0,
                    params_time: if ev.verb == Verb::Run {
                        Some(ev.time)
                    } else {
                        None
                    },
                    exec_start: 0,
                    completion_scheduled: false,
                    auto_free: ev.verb == Verb::Run,
                    free_seen: false,
                    released: false,
                    kernel,
                });
                if ev.verb == Verb::Reserve {
                    self.open_task.insert(ev.app, task_id);
                }
                self.gam.enqueue_reserve(task_id, kernel_name)?;
                self.schedule_pass()?;
            }
            Verb::SendParam => {
                let task_id = *self.open_task.get(&ev.app).ok_or_else(|| {
                    Error::Protocol(format!("send_param with no open task (app {})", ev.app))
                })?;
                let now = self.clock;
                let task = &mut self.tasks[task_id as usize];
                task.params_time = Some(now);
                if task.state == TaskState::Granted {
                    self.push(now, Ev::BeginExec(task_id));
                }
            }
            Verb::Free => {
                let task_id = self.open_task.remove(&ev.app).ok_or_else(|| {
                    Error::Protocol(format!("free with no open task (app {})", ev.app))
                })?;
                let task = &mut self.tasks[task_id as usize];
                task.free_seen = true;
                if task.state == TaskState::Completed && !task.released {
                    self.release_task(task_id)?;
                }
            }
            Verb::CheckReserved | Verb::CheckDone => {}
        }
        Ok(())
    }

    fn schedule_pass(&mut self) -> Result<()> {
        let grants = self.gam.schedule(
            &mut self.flags,
            &self.topology,
            self.platform.dba_stop_at_first,
        )?;
        let now = self.clock;
        for grant in grants {
            let task = &mut self.tasks[grant.task as usize];
            task.state = TaskState::Granted;
            task.instance = Some(grant.instance);
            task.banks = grant.banks;
            if task.params_time.is_some() {
                let start = now + self.platform.sched_overhead_cycles;
                self.push(start, Ev::BeginExec(grant.task));
            }
        }
        Ok(())
    }

    fn on_begin_exec(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        let (n_in, n_out, app) = {
            let task = &mut self.tasks[task_id as usize];
            if task.state != TaskState::Granted {
                return Ok(()); // duplicate BeginExec from grant+send_param race
            }
            task.state = TaskState::Executing;
            task.exec_start = now;
            (task.n_in, task.n_out, task.app)
        };

        // Address streams: each app walks a wrapping window of its own
        // address space, inputs and outputs in disjoint halves.
        let region = self.platform.app_region_pages;
        let base = (app as u64) << 32;
        let out_base = base + (1 << 31);
        let mut in_vpns = Vec::with_capacity(n_in as usize);
        for i in 0..n_in {
            in_vpns.push(base + (self.app_cursor_in[app] + i) % region);
        }
        self.app_cursor_in[app] = (self.app_cursor_in[app] + n_in) % region;
        let mut out_vpns = Vec::with_capacity(n_out as usize);
        for i in 0..n_out {
            out_vpns.push(out_base + (self.app_cursor_out[app] + i) % region);
        }
        self.app_cursor_out[app] = (self.app_cursor_out[app] + n_out) % region;

        // Burst-translate the whole input stream. Misses group into batches;
        // the handler works the batches back to back, so a missing page is
        // ready when its batch completes while hits flow immediately.
        // The miss handler is one software thread shared by every
        // accelerator, so batches serialize system-wide.
        let mut batch = 0usize;
        let mut ready_times = Vec::with_capacity(n_in as usize);
        let mut stall_total = 0u64;
        for &vpn in &in_vpns {
            match self.tlb.access(vpn) {
                Lookup::Hit => ready_times.push(now),
                Lookup::Miss => {
                    batch += 1;
                    // Completion is only known once the batch closes; park the
                    // index and patch afterwards.
                    ready_times.push(u64::MAX);
                    if batch == self.platform.miss_batch_size {
                        let stall =
                            handle_tlb_miss_batch(batch, self.platform.miss_mode, &self.platform)?;
                        let done = now.max(self.miss_handler_free) + stall;
                        self.miss_handler_free = done;
                        stall_total += stall;
                        for t in ready_times.iter_mut().filter(|t| **t == u64::MAX) {
                            *t = done;
                        }
                        batch = 0;
                    }
                }
            }
        }
        if batch > 0 {
            let stall = handle_tlb_miss_batch(batch, self.platform.miss_mode, &self.platform)?;
            let done = now.max(self.miss_handler_free) + stall;
            self.miss_handler_free = done;
            stall_total += stall;
            for t in ready_times.iter_mut().filter(|t| **t == u64::MAX) {
                *t = done;
            }
        }

        {
            let task = &mut self.tasks[task_id as usize];
            task.in_vpns = in_vpns;
            task.out_vpns = out_vpns;
            task.stall_cycles += stall_total;
        }
        self.miss_handling_cycles += stall_total;

        for (i, &ready) in ready_times.iter().enumerate() {
            self.push(
                ready,
                Ev::TransferReady {
                    task: task_id,
                    dir: Dir::In,
                    idx: i as u64,
                },
            );
        }

        if n_in == 0 {
            let compute = self.tasks[task_id as usize].compute_total;
            if compute > 0 {
                self.tasks[task_id as usize].computing = true;
                self.push(now + compute, Ev::ComputeChunkDone(task_id));
            } else {
                self.unlock_outputs(task_id)?;
                self.maybe_complete(task_id)?;
            }
        }
        Ok(())
    }

    fn bank_and_dmac(&self, task_id: TaskId, dir: Dir, idx: u64) -> (usize, usize) {
        let task = &self.tasks[task_id as usize];
        let ports = task.banks.len().max(1);
        // Page k of either stream moves through port (k mod ports), i.e. the
        // bank the DBA pinned to that port.
        let offset = match dir {
            Dir::In => idx,
            Dir::Out => idx,
        };
        let bank = task.banks[(offset as usize) % ports];
        let dmac = self.interleave.dmac_of(bank).expect("validated wiring");
        (bank, dmac)
    }

    fn on_transfer_ready(&mut self, task: TaskId, dir: Dir, idx: u64) -> Result<()> {
        let (_bank, dmac) = self.bank_and_dmac(task, dir, idx);
        let enq_seq = self.seq;
        self.seq += 1;
        self.dmacs[dmac].queue.push_back(Transfer {
            task,
            dir,
            idx,
            enq_seq,
        });
        self.start_transfers();
        Ok(())
    }

    /// Start queued transfers while ports remain: among idle DMACs with
    /// pending requests, the oldest head request goes first.
    fn start_transfers(&mut self) {
        let port_cap = self.platform.port_pool(self.coherency);
        let service = self.platform.fixed_latency_cycles(self.coherency)
            + self.platform.page_transfer_cycles();
        while self.ports_in_use < port_cap {
            let next = self
                .dmacs
                .iter()
                .enumerate()
                .filter(|(_, d)| d.serving.is_none())
                .filter_map(|(i, d)| d.queue.front().map(|t| (t.enq_seq, i)))
                .min();
            let Some((_, dmac)) = next else { break };
            let transfer = self.dmacs[dmac].queue.pop_front().expect("non-empty");
            self.dmacs[dmac].serving = Some(transfer);
            self.ports_in_use += 1;
            self.push(self.clock + service, Ev::TransferDone { dmac });
        }
    }

    fn on_transfer_done(&mut self, dmac: usize) -> Result<()> {
        let transfer = self.dmacs[dmac].serving.take().expect("transfer in flight");
        self.ports_in_use -= 1;
        self.dmac_bytes[dmac] += PAGE_BYTES;
        self.pages_transferred += 1;

        match transfer.dir {
            Dir::In => {
                self.tasks[transfer.task as usize].arrived_in[transfer.idx as usize] = true;
                self.advance_compute(transfer.task);
            }
            Dir::Out => {
                self.tasks[transfer.task as usize].outs_done += 1;
                self.maybe_complete(transfer.task)?;
            }
        }
        self.start_transfers();
        Ok(())
    }

    fn advance_compute(&mut self, task_id: TaskId) {
        let now = self.clock;
        let task = &mut self.tasks[task_id as usize];
        if task.computing || task.consumed >= task.n_in {
            return;
        }
        if !task.arrived_in[task.consumed as usize] {
            return;
        }
        task.computing = true;
        let chunk = task.chunk_len(task.consumed);
        self.push(now + chunk, Ev::ComputeChunkDone(task_id));
    }

    fn on_chunk_done(&mut self, task_id: TaskId) -> Result<()> {
        {
            let task = &mut self.tasks[task_id as usize];
            task.computing = false;
            if task.n_in > 0 {
                task.consumed += 1;
            }
        }
        self.unlock_outputs(task_id)?;
        self.advance_compute(task_id);
        self.maybe_complete(task_id)?;
        Ok(())
    }

    /// Translate and queue output pages whose compute progress threshold has
    /// been reached. Misses wait for their batch; the batch flushes when full
    /// or when the last output unlocks.
    fn unlock_outputs(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        loop {
            let (j, vpn) = {
                let task = &self.tasks[task_id as usize];
                let compute_done = task.n_in == 0 || task.consumed >= task.n_in;
                if task.outs_unlocked >= task.n_out {
                    break;
                }
                let j = task.outs_unlocked;
                if !compute_done && task.consumed < task.out_unlock_threshold(j) {
                    break;
                }
                (j, task.out_vpns[j as usize])
            };
            self.tasks[task_id as usize].outs_unlocked += 1;
            match self.tlb.access(vpn) {
                Lookup::Hit => {
                    self.push(
                        now,
                        Ev::TransferReady {
                            task: task_id,
                            dir: Dir::Out,
                            idx: j,
                        },
                    );
                }
                Lookup::Miss => {
                    self.tasks[task_id as usize].out_miss_batch.push(j);
                    if self.tasks[task_id as usize].out_miss_batch.len()
                        == self.platform.miss_batch_size
                    {
                        self.flush_out_batch(task_id)?;
                    }
                }
            }
        }
        let task = &self.tasks[task_id as usize];
        let all_unlocked = task.outs_unlocked >= task.n_out;
        if all_unlocked && !task.out_miss_batch.is_empty() {
            self.flush_out_batch(task_id)?;
        }
        Ok(())
    }

    fn flush_out_batch(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        let batch = std::mem::take(&mut self.tasks[task_id as usize].out_miss_batch);
        let stall = handle_tlb_miss_batch(batch.len(), self.platform.miss_mode, &self.platform)?;
        let done = now.max(self.miss_handler_free) + stall;
        self.miss_handler_free = done;
        self.tasks[task_id as usize].stall_cycles += stall;
        self.miss_handling_cycles += stall;
        for j in batch {
            self.push(
                done,
                Ev::TransferReady {
                    task: task_id,
                    dir: Dir::Out,
                    idx: j,
                },
            );
        }
        Ok(())
    }

    fn maybe_complete(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        let (ready, n_out) = {
            let task = &self.tasks[task_id as usize];
            let compute_done = !task.computing && (task.n_in == 0 || task.consumed >= task.n_in);
            (
                task.state == TaskState::Executing
                    && compute_done
                    && task.outs_done >= task.n_out
                    && !task.completion_scheduled,
                task.n_out,
            )
        };
        if !ready {
            return Ok(());
        }
        self.tasks[task_id as usize].completion_scheduled = true;
        let inval = invalidate_pages(n_out, self.coherency, &self.platform);
        self.invalidation_cycles += inval;
        self.push(now + inval, Ev::TaskComplete(task_id));
        Ok(())
    }

    fn on_task_complete(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        let (instance, auto_free, free_seen) = {
            let task = &mut self.tasks[task_id as usize];
            task.state = TaskState::Completed;
            let instance = task.instance.expect("completed task has an instance");
            let stat = (task.compute_total, task.stall_cycles, now - task.exec_start);
            (Some((instance, stat)), task.auto_free, task.free_seen)
        };
        if let Some((instance, (compute, stall, busy))) = instance {
            let s = &mut self.stats[instance];
            s.busy += busy;
            s.compute += compute;
            s.stall += stall;
            s.tasks += 1;
        }
        self.tasks_completed += 1;
        self.total_cycles = self.total_cycles.max(now);
        if auto_free || free_seen {
            self.release_task(task_id)?;
        }
        Ok(())
    }

    fn release_task(&mut self, task_id: TaskId) -> Result<()> {
        let now = self.clock;
        let (instance, banks) = {
            let task = &mut self.tasks[task_id as usize];
            debug_assert!(!task.released);
            task.released = true;
            (
                task.instance.expect("released task was granted"),
                task.banks.clone(),
            )
        };
        for bank in banks {
            self.flags.release(bank);
        }
        self.gam.release(instance)?;
        self.total_cycles = self.total_cycles.max(now);
        self.schedule_pass()
    }
}

/// Construct, run to completion, and report.
pub fn run_simulation(
    spec: &AraSpec,
    topology: &CrossbarTopology,
    interleave: &InterleaveMap,
    workload: &Workload,
    platform: &PlatformModel,
) -> Result<PerfReport> {
    let mut sim = Simulation::new(spec, topology, interleave, workload, platform)?;
    sim.run_to_completion()?;
    Ok(sim.report())
}
