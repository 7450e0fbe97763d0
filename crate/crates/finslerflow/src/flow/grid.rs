//! Sphere-bundle grid over the 2-torus: periodic base nodes times uniform
//! fiber angles.

use crate::error::{FinslerError, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereBundleGrid {
    nx: usize,
    ntheta: usize,
}

fn power_of_two_at_least_16(n: usize) -> bool {
    n >= 16 && n.is_power_of_two()
}

impl SphereBundleGrid {
    pub fn new(nx: usize, ntheta: usize) -> Result<SphereBundleGrid> {
        if !power_of_two_at_least_16(nx) || !power_of_two_at_least_16(ntheta) {
            return Err(FinslerError::InvalidConfig(format!(
                "grid sizes must be powers of two >= 16, got Nx = {nx}, Ntheta = {ntheta}"
            )));
        }
        Ok(SphereBundleGrid { nx, ntheta })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn nodes(&self) -> usize {
        self.nx * self.nx * self.ntheta
    }

    pub fn base_nodes(&self) -> usize {
        self.nx * self.nx
    }

    pub fn dx(&self) -> f64 {
        TWO_PI / self.nx as f64
    }

    pub fn dtheta(&self) -> f64 {
        TWO_PI / self.ntheta as f64
    }

    pub fn x_coord(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    pub fn fiber_vector(&self, k: usize) -> [f64; 2] {
        let t = self.theta(k);
        [t.cos(), t.sin()]
    }

    /// Row-major node index, x1 slowest, theta fastest.
    pub fn idx(&self, ix1: usize, ix2: usize, itheta: usize) -> usize {
        (ix1 * self.nx + ix2) * self.ntheta + itheta
    }

    pub fn base_idx(&self, ix1: usize, ix2: usize) -> usize {
        ix1 * self.nx + ix2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SphereBundleGrid::new(8, 32).is_err());
        assert!(SphereBundleGrid::new(48, 32).is_err());
        assert!(SphereBundleGrid::new(32, 8).is_err());
        assert!(SphereBundleGrid::new(16, 16).is_ok());
    }

    #[test]
    fn node_layout() {
        let g = SphereBundleGrid::new(16, 32).unwrap();
        assert_eq!(g.nodes(), 16 * 16 * 32);
        assert_eq!(g.idx(0, 0, 1), 1);
        assert_eq!(g.idx(0, 1, 0), 32);
        assert_eq!(g.idx(1, 0, 0), 16 * 32);
        assert!((g.x_coord(8) - std::f64::consts::PI).abs() < 1e-15);
    }
}
