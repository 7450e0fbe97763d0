//! Seeded random sample points on the slit tangent bundle.
//!
//! Every randomized check in the library and CLI draws through this module so
//! identical seeds reproduce identical reports.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::structure::PointTM;

pub const DEFAULT_SEED: u64 = 0;

pub struct PointSampler {
    rng: StdRng,
    n: usize,
    /// Base coordinates are drawn from `[-x_extent, x_extent]^n`.
    pub x_extent: f64,
}

impl PointSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        PointSampler {
            rng: StdRng::seed_from_u64(seed),
            n,
            x_extent: std::f64::consts::PI,
        }
    }

    /// Sampler confined to a chart ball, for structures that are only
    /// well-conditioned near the origin.
    pub fn in_ball(n: usize, seed: u64, extent: f64) -> Self {
        let mut s = Self::new(n, seed);
        s.x_extent = extent;
        s
    }

    pub fn point(&mut self) -> PointTM {
        let x = (0..self.n)
            .map(|_| self.rng.random_range(-self.x_extent..self.x_extent))
            .collect();
        let y = self.fiber_vector();
        PointTM { x, y }
    }

    /// Nonzero fiber vector with norm in [0.5, 2].
    pub fn fiber_vector(&mut self) -> Vec<f64> {
        loop {
            let y: Vec<f64> = (0..self.n)
                .map(|_| self.rng.random_range(-1.0..1.0))
                .collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.2 {
                let target = self.rng.random_range(0.5..2.0);
                return y.iter().map(|v| v * target / norm).collect();
            }
        }
    }

    pub fn unit(&mut self) -> Vec<f64> {
        let y = self.fiber_vector();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter().map(|v| v / norm).collect()
    }
}
