//! Monte Carlo simulator for deadline-constrained broadcast of layered
//! content over heterogeneous erasure channels.
//!
//! A scenario fixes the block structure, the audience, the per-slot policy,
//! and the slot budget; each run replays one block broadcast over freshly
//! drawn channel noise.  Summaries report the worst-case and average decoded
//! percentage and a pooled histogram of decoded layer depths.

pub mod config;
pub mod episode;
pub mod report;
pub mod rng;
