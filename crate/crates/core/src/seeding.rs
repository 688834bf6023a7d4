//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is keyed by `(base seed, sweep index,
//! trial index, stream tag)`. The key is folded through SplitMix64 so that
//! adding trials or sweep points never perturbs the streams of existing ones,
//! and every estimator in a trial sees the same scenario and noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    Pilots = 2,
    Noise = 3,
    Covariance = 4,
    Dataset = 5,
    Model = 6,
    Evaluation = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, sweep: u64, trial: u64, stream: Stream) -> u64 {
    [sweep, trial, stream as u64]
        .into_iter()
        .fold(splitmix64(base), |acc, part| splitmix64(acc ^ splitmix64(part)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(base: u64, sweep: u64, trial: u64, stream: Stream) -> Rng {
    rng(derive_seed(base, sweep, trial, stream))
}
