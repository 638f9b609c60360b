//! Seeded rational sample points. Identities on polynomial models are
//! certified by evaluation at generic lattice points; small numerators keep
//! the exact arithmetic fast.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{rat, Rat};

pub struct SamplePool {
    rng: ChaCha8Rng,
}

impl SamplePool {
    pub fn new(seed: u64) -> Self {
        SamplePool {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rat(&mut self) -> Rat {
        let mut n = self.rng.gen_range(-3i64..=3);
        if n == 0 {
            n = 1;
        }
        let d = self.rng.gen_range(1i64..=3);
        rat(n, d)
    }

    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    /// A chart point with the requested dimension.
    pub fn point(&mut self, dim: usize) -> Vec<Rat> {
        (0..dim).map(|_| self.rat()).collect()
    }

    /// A chart point with pairwise distinct coordinates (avoids accidental
    /// unit arrows on pair-groupoid tuples).
    pub fn distinct_points(&mut self, count: usize, dim: usize) -> Vec<Vec<Rat>> {
        let mut out: Vec<Vec<Rat>> = Vec::new();
        while out.len() < count {
            let p = self.point(dim);
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn points(&mut self, count: usize, dim: usize) -> Vec<Vec<Rat>> {
        (0..count).map(|_| self.point(dim)).collect()
    }
}
