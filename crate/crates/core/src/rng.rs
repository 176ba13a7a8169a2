//! Seeding for reproducible, worker-count-independent simulation.
//!
//! Every replication gets its own ChaCha stream derived from the master seed
//! and the replication index, so the draws of replication `i` never depend on
//! how replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for replication `index` under `master_seed`.
pub fn replication_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for a sub-experiment (e.g. one table cell).
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
