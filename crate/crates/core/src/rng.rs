//! Named, independent random streams derived from one episode seed.
//!
//! Each consumer (task placement, agent placement, per-agent exploration,
//! per-agent policy tie-breaks) draws from its own stream, so adding draws in
//! one place never shifts the numbers another place sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const TASK_PLACEMENT: &str = "task-placement";
pub const AGENT_PLACEMENT: &str = "agent-placement";
pub const EXPLORATION: &str = "exploration";
pub const POLICY: &str = "policy";

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; spreads nearby inputs across the seed space.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed source for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream identified by `name` alone.
    pub fn stream(&self, name: &str) -> StreamRng {
        self.sub_stream(name, 0)
    }

    /// Stream identified by `name` and an index (usually an agent id).
    pub fn sub_stream(&self, name: &str, index: u64) -> StreamRng {
        let s = mix64(self.seed ^ mix64(fnv1a(name.as_bytes()) ^ mix64(index)));
        ChaCha8Rng::seed_from_u64(s)
    }
}
