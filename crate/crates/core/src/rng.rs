//! Counter-based random streams.
//!
//! Every simulated path draws from its own ChaCha stream, keyed by the master
//! seed, the replication index and the path index. A path's variates are
//! therefore a pure function of `(seed, replication, path, step)`, whatever
//! the thread that produces them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Stream for one path of one replication.
pub fn path_stream(seed: u64, replication: u64, path: u64) -> PathRng {
    assert!(
        replication < (1 << 32) && path < (1 << 32),
        "replication and path indices are limited to 32 bits"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 32) | path);
    rng
}

/// Stream for auxiliary randomness (property sweeps, bootstrap) that is not
/// tied to a path. Uses the top of the replication range.
pub fn aux_stream(seed: u64, index: u64) -> PathRng {
    path_stream(seed, (1 << 32) - 1, index)
}
