//! The accelerator-plane simulator: platform timing model, TLB, dynamic
//! buffer allocator, global accelerator manager, and the event engine.

pub mod dba;
pub mod engine;
pub mod gam;
pub mod platform;
pub mod report;
pub mod tlb;

pub use dba::{apply_outcome, dba_allocate, BufferFlags, DbaOutcome, DbaRequest, Grant};
pub use engine::{run_simulation, Simulation};
pub use gam::{gam_schedule, GamEvent, GamState};
pub use platform::{
    handle_tlb_miss_batch, invalidate_pages, Coherency, MissMode, PlatformModel, PAGE_BYTES,
};
pub use report::{CounterSnapshot, InstancePerf, PerfReport};
pub use tlb::{Lookup, TlbState};
