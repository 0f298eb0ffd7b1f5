//! Reproducible per-task random streams.
//!
//! Every (cell, trial, role) gets its own generator, seeded by a SplitMix64
//! avalanche of the master seed and the task coordinates. Results therefore
//! do not depend on which worker runs a task or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Network,
    Portfolio,
    Losses,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Network => 0x6e65_7477_6f72_6b00,
            StreamRole::Portfolio => 0x706f_7274_666f_6c69,
            StreamRole::Losses => 0x6c6f_7373_6573_0000,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(
    master_seed: u64,
    p_index: usize,
    d_index: usize,
    trial_index: usize,
    role: StreamRole,
) -> u64 {
    [
        p_index as u64,
        d_index as u64,
        trial_index as u64,
        role.tag(),
    ]
    .into_iter()
    .fold(splitmix64(master_seed), |h, word| {
        splitmix64(h ^ splitmix64(word))
    })
}

pub fn derive_stream(
    master_seed: u64,
    p_index: usize,
    d_index: usize,
    trial_index: usize,
    role: StreamRole,
) -> Stream {
    Stream::seed_from_u64(derive_seed(
        master_seed,
        p_index,
        d_index,
        trial_index,
        role,
    ))
}
