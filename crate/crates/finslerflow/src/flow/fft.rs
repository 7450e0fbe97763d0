//! Batched 3D Fourier transforms on the sphere-bundle grid, with the
//! wavenumber bookkeeping used for spectral differentiation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::SphereBundleGrid;
use crate::parallel;

#[derive(Clone)]
pub struct Fft3 {
    grid: SphereBundleGrid,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_t: Arc<dyn Fft<f64>>,
    inv_t: Arc<dyn Fft<f64>>,
}

/// Plans are cached per grid shape.
pub fn plans(grid: SphereBundleGrid) -> Fft3 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Fft3>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry((grid.nx(), grid.ntheta()))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Fft3 {
                grid,
                fwd_x: planner.plan_fft_forward(grid.nx()),
                inv_x: planner.plan_fft_inverse(grid.nx()),
                fwd_t: planner.plan_fft_forward(grid.ntheta()),
                inv_t: planner.plan_fft_inverse(grid.ntheta()),
            }
        })
        .clone()
}

/// Signed wavenumber for bin `j` of an N-point transform.
pub fn wavenumber(n: usize, j: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// (i k)^order with the Nyquist bin zeroed for odd orders.
pub fn ik_pow(n: usize, j: usize, order: usize) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if j == n / 2 && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let k = wavenumber(n, j) as f64;
    let ik = Complex64::new(0.0, k);
    let mut p = ik;
    for _ in 1..order {
        p *= ik;
    }
    p
}

pub enum Axis {
    X1,
    X2,
    Theta,
}

impl Fft3 {
    pub fn grid(&self) -> SphereBundleGrid {
        self.grid
    }

    /// Inverse plan along the fiber axis, for fused line-wise passes.
    pub fn theta_plan(&self) -> Arc<dyn Fft<f64>> {
        self.inv_t.clone()
    }

    fn axis_geometry(&self, axis: &Axis) -> (usize, usize) {
        // (length, stride) in the [x1][x2][theta] row-major layout
        let nx = self.grid.nx();
        let nt = self.grid.ntheta();
        match axis {
            Axis::X1 => (nx, nx * nt),
            Axis::X2 => (nx, nt),
            Axis::Theta => (nt, 1),
        }
    }

    /// In-place 1D transforms along one axis over the whole 3D buffer.
    pub fn transform_axis(&self, data: &mut [Complex64], axis: Axis, forward: bool) {
        let (len, stride) = self.axis_geometry(&axis);
        let plan = match (&axis, forward) {
            (Axis::Theta, true) => &self.fwd_t,
            (Axis::Theta, false) => &self.inv_t,
            (_, true) => &self.fwd_x,
            (_, false) => &self.inv_x,
        };
        let total = data.len();
        let lines = total / len;
        // map line index -> offset of its first element
        let line_offset = |line: usize| -> usize {
            if stride == 1 {
                line * len
            } else {
                // lines are enumerated over the complementary indices
                let block = stride * len;
                let outer = line / stride;
                let inner = line % stride;
                outer * block + inner
            }
        };
        // disjoint line batches may run concurrently; all access goes
        // through the raw pointer
        let data_ptr = SendPtr(data.as_mut_ptr());
        let run_batch = |buf: &mut [Complex64],
                         scratch: &mut [Complex64],
                         lo: usize,
                         hi: usize| {
            let ptr = data_ptr;
            let count = hi - lo;
            if stride == 1 {
                let slice =
                    unsafe { std::slice::from_raw_parts_mut(ptr.0.add(lo * len), count * len) };
                plan.process_with_scratch(slice, scratch);
                return;
            }
            // gather a batch of strided lines, one call, scatter back
            for (q, line) in (lo..hi).enumerate() {
                let base = line_offset(line);
                unsafe {
                    for i in 0..len {
                        *buf.get_unchecked_mut(q * len + i) = *ptr.0.add(base + i * stride);
                    }
                }
            }
            plan.process_with_scratch(&mut buf[..count * len], scratch);
            for (q, line) in (lo..hi).enumerate() {
                let base = line_offset(line);
                unsafe {
                    for i in 0..len {
                        *ptr.0.add(base + i * stride) = *buf.get_unchecked(q * len + i);
                    }
                }
            }
        };
        if parallel::serial() {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut buf = vec![Complex64::default(); if stride == 1 { 0 } else { len * lines }];
            run_batch(&mut buf, &mut scratch, 0, lines);
            return;
        }
        let chunk = lines.div_ceil(parallel::threads() * 2).max(16);
        parallel::pool().install(|| {
            use rayon::prelude::*;
            (0..lines.div_ceil(chunk)).into_par_iter().for_each_init(
                || {
                    let scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                    (vec![Complex64::default(); len * chunk], scratch)
                },
                |(buf, scratch), ci| {
                    let lo = ci * chunk;
                    let hi = ((ci + 1) * chunk).min(lines);
                    run_batch(buf, scratch, lo, hi);
                },
            );
        });
    }

    /// Full forward 3D transform of a real field, normalized so that the
    /// result holds true Fourier coefficients.
    pub fn forward(&self, w: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_axis(&mut buf, Axis::Theta, true);
        self.transform_axis(&mut buf, Axis::X2, true);
        self.transform_axis(&mut buf, Axis::X1, true);
        let scale = 1.0 / self.grid.nodes() as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }

    /// Full inverse 3D transform, returning the real part.
    pub fn inverse_real(&self, modes: &[Complex64]) -> Vec<f64> {
        let mut buf = modes.to_vec();
        self.transform_axis(&mut buf, Axis::Theta, false);
        self.transform_axis(&mut buf, Axis::X2, false);
        self.transform_axis(&mut buf, Axis::X1, false);
        buf.iter().map(|v| v.re).collect()
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_derivative() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let f = plans(grid);
        let mut w = vec![0.0; grid.nodes()];
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    let x1 = grid.x_coord(i1);
                    let th = grid.theta(k);
                    w[grid.idx(i1, i2, k)] = (2.0 * x1).sin() + 0.3 * (3.0 * th).cos();
                }
            }
        }
        let modes = f.forward(&w);
        let back = f.inverse_real(&modes);
        for (a, b) in w.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        // d/dx1
        let mut dm = modes.clone();
        for i1 in 0..16 {
            let fac = ik_pow(16, i1, 1);
            for i2 in 0..16 {
                for k in 0..16 {
                    dm[grid.idx(i1, i2, k)] *= fac;
                }
            }
        }
        let d = f.inverse_real(&dm);
        for i1 in 0..16 {
            let x1 = grid.x_coord(i1);
            let want = 2.0 * (2.0 * x1).cos();
            assert!((d[grid.idx(i1, 3, 5)] - want).abs() < 1e-11);
        }
    }
}
