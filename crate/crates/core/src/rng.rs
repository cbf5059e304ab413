//! Counter-based random streams: every (point, trial) pair gets its own
//! ChaCha stream under one master seed, so results do not depend on the
//! order in which work items run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(master: u64, point: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((u64::from(point) << 32) | u64::from(trial));
    rng
}
