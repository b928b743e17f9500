//! Addressable random substreams.
//!
//! Every draw is a function of `(master seed, purpose, index)`: each triple maps
//! to its own ChaCha8 stream, so results do not depend on how paths are
//! scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sources of randomness in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Market = 0,
    Catastrophe = 1,
    Loading = 2,
    Auxiliary = 3,
}

const PURPOSES: u64 = 4;

/// Generator for substream `(purpose, index)` of `master_seed`.
pub fn substream(master_seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(
        index
            .checked_mul(PURPOSES)
            .and_then(|s| s.checked_add(purpose as u64))
            .expect("substream index out of range"),
    );
    rng
}

/// Seed of replication `index` derived from `master_seed` (splitmix64 finalizer).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
