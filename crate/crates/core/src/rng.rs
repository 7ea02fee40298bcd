//! Counter-based random streams.
//!
//! Every stochastic gradient draw is addressed by `(seed, node, iteration,
//! round)`. The stream for a key does not depend on how many other draws
//! happened before it, so runs that visit the same keys in a different
//! order (multi-round gossip vs. its `W^R` reformulation) see identical
//! noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Address of one stochastic-gradient draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub node: u64,
    pub iter: u64,
    pub round: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, node: usize, iter: usize, round: usize) -> Self {
        Self {
            seed,
            node: node as u64,
            iter: iter as u64,
            round: round as u64,
        }
    }

    /// Independent generator for this key.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        h = splitmix64(h ^ self.node);
        h = splitmix64(h ^ self.iter.rotate_left(21));
        h = splitmix64(h ^ self.round.rotate_left(42));
        ChaCha8Rng::seed_from_u64(h)
    }

    /// Fills `out` with i.i.d. standard normals from this key's stream.
    pub fn fill_normal(&self, out: &mut [f64]) {
        let mut rng = self.rng();
        for x in out {
            *x = StandardNormal.sample(&mut rng);
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
