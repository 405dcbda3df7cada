//! Deterministic stream assignment for all simulation randomness.
//!
//! Everything flows from one base seed through a counter-based generator
//! whose independent streams are carved up by purpose, so results do not
//! depend on scheduling or execution order:
//!
//! - stream `u64::MAX` draws the per-scenario receiver erasure probabilities;
//! - stream `run << 20` covers a run's miscellaneous draws (block sampling);
//! - stream `(run << 20) | (receiver + 1)` drives one receiver's channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RECEIVER_BITS: u64 = 20;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Scenario-level draws shared by every run (erasure probabilities).
pub fn scenario_stream(seed: u64) -> ChaCha8Rng {
    stream(seed, u64::MAX)
}

/// One run's miscellaneous draws.
pub fn run_stream(seed: u64, run: u64) -> ChaCha8Rng {
    assert!(run < 1 << (64 - RECEIVER_BITS), "run index too large");
    stream(seed, run << RECEIVER_BITS)
}

/// One receiver's channel within one run.
pub fn receiver_stream(seed: u64, run: u64, receiver: usize) -> ChaCha8Rng {
    assert!(run < 1 << (64 - RECEIVER_BITS), "run index too large");
    let slot = receiver as u64 + 1;
    assert!(slot < 1 << RECEIVER_BITS, "receiver index too large");
    stream(seed, (run << RECEIVER_BITS) | slot)
}
