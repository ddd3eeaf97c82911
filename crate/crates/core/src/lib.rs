//! arasim: interconnect synthesis and memory-system simulation for
//! accelerator-rich architectures.
//!
//! The crate turns a declarative system specification into a customized
//! partial crossbar (accelerator ports to shared buffer banks) and an
//! interleaved bank-to-DMAC network, then replays timed application traces
//! through a deterministic discrete-event model of the accelerator plane:
//! FCFS accelerator management, starvation-free dynamic buffer allocation,
//! an LRU TLB with batched software miss handling, DMA page transfers over a
//! contended physical port pool, and a coherency choice at the LLC or DRAM.

pub mod crossbar;
pub mod dse;
pub mod error;
pub mod interleave;
pub mod matching;
pub mod sim;
pub mod spec;
pub mod workload;

pub use error::{Error, Result};
