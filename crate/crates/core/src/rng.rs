//! Seed derivation for reproducible Monte-Carlo runs.
//!
//! Every random draw in a simulation comes from a ChaCha8 generator keyed by
//! a derived 64-bit seed and one of a few fixed stream ids. ChaCha is a
//! counter-mode generator, so distinct `(seed, stream)` pairs give
//! independent sequences, and a trial's randomness depends only on
//! `(master seed, experiment id, trial index)`, never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent substreams of a trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    Noise = 2,
    Data = 3,
    Training = 4,
    Partition = 5,
    Selection = 6,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a label, used to fold experiment ids into seeds.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for child `index` of `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Seed keyed by (master seed, experiment id, trial index).
pub fn trial_seed(master: u64, experiment: &str, trial: u64) -> u64 {
    derive(derive(master, label_hash(experiment)), trial)
}

/// Generator for one substream of `seed`.
pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
