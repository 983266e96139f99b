//! Counter-based random-number streams for replicated simulation.
//!
//! Each replicate draws from its own ChaCha stream keyed by (master seed,
//! cell index, replicate index), so results are independent of how work is
//! distributed across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one replicate of one grid cell.
///
/// The stream id packs the cell index into the high bits and the replicate
/// index into the low bits; the master seed selects the key.
pub fn replicate_rng(master_seed: u64, cell_index: usize, replicate_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((cell_index as u64) << 40) ^ replicate_index as u64);
    rng
}
