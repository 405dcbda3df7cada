//! Deadline-aware broadcast scheduling for layered content over lossy links.
//!
//! The sender holds one block of source packets organised into priority layers
//! (base layer first, refinements after) and has a fixed number of slots to
//! push them to a set of receivers with heterogeneous loss rates.  Everything
//! here revolves around XOR combinations that are *instantly* decodable: a
//! receiver either recovers a new packet the moment a transmission arrives or
//! it discards the transmission.  The crate provides the sender-side state
//! model ([`model`]), the coding-conflict graph ([`graph`]), completion
//! probability bounds ([`prob`]), the schedulers built on top of them
//! ([`sched`]), and an open-loop random-coding baseline ([`rlnc`]).

pub mod error;
pub mod graph;
pub mod model;
pub mod prob;
pub mod rlnc;
pub mod sched;

pub use error::{Error, Result};
