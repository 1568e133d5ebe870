//! Labeled random substreams.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] keyed by the
//! master seed and a `(episode, slot, purpose)` label, so user positions,
//! fading, exploration and replay sampling can each be reproduced on their own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    UserPositions,
    PathAngles,
    PathGains,
    Placement,
    Exploration,
    Quantiles,
    Replay,
    KMeans,
    Init,
    Custom(u64),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::UserPositions => 1,
            Purpose::PathAngles => 2,
            Purpose::PathGains => 3,
            Purpose::Placement => 4,
            Purpose::Exploration => 5,
            Purpose::Quantiles => 6,
            Purpose::Replay => 7,
            Purpose::KMeans => 8,
            Purpose::Init => 9,
            Purpose::Custom(c) => 0x100 + c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent generator for one `(episode, slot, purpose)` label.
    pub fn rng(&self, episode: u64, slot: u64, purpose: Purpose) -> ChaCha8Rng {
        let mut h = splitmix(self.master_seed ^ 0x6a09_e667_f3bc_c908);
        h = splitmix(h ^ episode);
        h = splitmix(h ^ slot.rotate_left(21));
        h = splitmix(h ^ purpose.code().rotate_left(42));
        ChaCha8Rng::seed_from_u64(h)
    }

    /// Derived stream, e.g. one per evaluation seed of a sweep cell.
    pub fn fork(&self, label: u64) -> SeedStream {
        SeedStream::new(splitmix(self.master_seed ^ splitmix(label ^ 0xbb67_ae85_84ca_a73b)))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
