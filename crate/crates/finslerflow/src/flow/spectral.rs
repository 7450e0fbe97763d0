//! Spectral representation of the evolved field W = F²|_{r=1} and the
//! machinery turning its trigonometric interpolant into jets of F².
//!
//! The homogeneous extension F²(x, r y(θ)) = r² W(x, θ) is differentiated by
//! composing the interpolant's Taylor polynomial with jets of (x, r², Δθ);
//! since that composition is linear in the W-partials, per-angle sparse
//! matrices precomputed from the same routine drive the hot per-node path.

use rustfft::num_complex::Complex64;

use super::fft::{ik_pow, plans};
use super::grid::{SphereBundleGrid, TWO_PI};
use crate::error::{FinslerError, Result};
use crate::jet::{index_table, Jet, Scalar};

/// Partial-derivative request (b1, b2, c) = ∂x1^b1 ∂x2^b2 ∂θ^c.
pub type PartialSpec = (usize, usize, usize);

/// All specs with b1 + b2 + c <= m, ranked like the (3, m) index table.
pub fn partial_specs(m: usize) -> Vec<PartialSpec> {
    index_table(3, m)
        .indices()
        .iter()
        .map(|idx| (idx.exp(0), idx.exp(1), idx.exp(2)))
        .collect()
}

/// Specs needed by the flow kernel: total order <= 4, at most 3 base
/// derivatives (pure fourth x-derivatives never enter the pipeline).
/// Grouped by base pattern with the fiber order running fastest, so each
/// assembly row reads a contiguous run.
pub fn kernel_specs() -> Vec<PartialSpec> {
    let mut v = Vec::new();
    for b1 in 0..=3usize {
        for b2 in 0..=(3 - b1) {
            for c in 0..=(4 - b1 - b2) {
                v.push((b1, b2, c));
            }
        }
    }
    v
}

/// Reusable buffers for the batched derivative-field evaluation; repeated
/// right-hand sides run allocation-free.
#[derive(Default)]
pub struct FieldWorkspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    d: Vec<Complex64>,
    pub fields: FieldSet,
}

#[derive(Default)]
pub struct FieldSet {
    pub data: Vec<Vec<f64>>,
}

impl FieldSet {
    fn pick_two(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(i < j);
        let (lo, hi) = self.data.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    }
}

impl FieldWorkspace {
    fn ensure(&mut self, n: usize, nspecs: usize) {
        if self.a.len() != n {
            self.a = vec![Complex64::default(); n];
            self.b = vec![Complex64::default(); n];
            self.d = vec![Complex64::default(); n];
        }
        if self.fields.data.len() != nspecs || self.fields.data.first().is_some_and(|f| f.len() != n)
        {
            self.fields.data = vec![vec![0.0; n]; nspecs];
        }
    }
}

/// Fourier modes of a field on the sphere-bundle grid.
#[derive(Clone)]
pub struct Modes {
    pub grid: SphereBundleGrid,
    pub c: Vec<Complex64>,
}

impl Modes {
    pub fn from_field(grid: SphereBundleGrid, w: &[f64]) -> Modes {
        let f = plans(grid);
        Modes {
            grid,
            c: f.forward(w),
        }
    }

    /// Batch-evaluate the requested partial fields at every node into the
    /// workspace (allocation-free after warm-up).
    ///
    /// Transforms are staged per axis so intermediate spectra are shared,
    /// with the branch-heavy fiber stage last: its lines are contiguous in
    /// memory, so the leaf transforms run in place without gathers; two
    /// leaves of one branch share each complex transform through the real
    /// and imaginary parts.
    pub fn partial_fields_ws(&self, specs: &[PartialSpec], ws: &mut FieldWorkspace) {
        let grid = self.grid;
        let f = plans(grid);
        let nx = grid.nx();
        let nt = grid.ntheta();
        let n = self.c.len();
        ws.ensure(n, specs.len());
        let (a, b) = (&mut ws.a, &mut ws.b);

        let mut b1s: Vec<usize> = specs.iter().map(|s| s.0).collect();
        b1s.sort_unstable();
        b1s.dedup();
        for &b1 in &b1s {
            // base x1 stage: scale by (ik1)^b1 while copying, then transform
            let xfac: Vec<Complex64> = (0..nx).map(|j| ik_pow(nx, j, b1)).collect();
            for i1 in 0..nx {
                let fac = xfac[i1];
                let base = grid.idx(i1, 0, 0);
                for (av, sv) in a[base..base + nx * nt]
                    .iter_mut()
                    .zip(&self.c[base..base + nx * nt])
                {
                    *av = sv * fac;
                }
            }
            f.transform_axis(a, super::fft::Axis::X1, false);

            let mut b2s: Vec<usize> = specs
                .iter()
                .filter(|s| s.0 == b1)
                .map(|s| s.1)
                .collect();
            b2s.sort_unstable();
            b2s.dedup();
            for &b2 in &b2s {
                // x2 stage
                let xfac: Vec<Complex64> = (0..nx).map(|j| ik_pow(nx, j, b2)).collect();
                for i1 in 0..nx {
                    for i2 in 0..nx {
                        let fac = xfac[i2];
                        let base = grid.idx(i1, i2, 0);
                        for (bv, av) in b[base..base + nt].iter_mut().zip(&a[base..base + nt]) {
                            *bv = av * fac;
                        }
                    }
                }
                f.transform_axis(b, super::fft::Axis::X2, false);

                // fiber stage: the θ-spectrum of a real field is Hermitian,
                // so leaves c and c' ride one transform as real/imag parts;
                // the whole scale-transform-extract chain runs line by line
                // to keep the traffic down
                let branch: Vec<usize> = specs
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.0 == b1 && s.1 == b2)
                    .map(|(i, _)| i)
                    .collect();
                for pair in branch.chunks(2) {
                    let c0 = specs[pair[0]].2;
                    let fac: Vec<Complex64> = if let Some(&s1) = pair.get(1) {
                        let c1 = specs[s1].2;
                        (0..nt)
                            .map(|k| ik_pow(nt, k, c0) + ik_pow(nt, k, c1) * Complex64::i())
                            .collect()
                    } else {
                        (0..nt).map(|k| ik_pow(nt, k, c0)).collect()
                    };
                    let (f0, f1) = if let Some(&s1) = pair.get(1) {
                        let (a0, a1) = ws.fields.pick_two(pair[0], s1);
                        (a0, Some(a1))
                    } else {
                        (&mut ws.fields.data[pair[0]][..], None)
                    };
                    theta_leaf(&f, b, &fac, f0, f1, nt);
                }
            }
        }
    }

    /// Convenience wrapper allocating a fresh workspace.
    pub fn partial_fields(&self, specs: &[PartialSpec]) -> Vec<Vec<f64>> {
        let mut ws = FieldWorkspace::default();
        self.partial_fields_ws(specs, &mut ws);
        ws.fields.data
    }
}

/// Fused fiber-leaf pass: per contiguous θ-line, scale the spectrum, run one
/// small transform, and scatter the real/imaginary parts into the one or two
/// destination fields.
fn theta_leaf(
    f: &super::fft::Fft3,
    b: &[Complex64],
    fac: &[Complex64],
    f0: &mut [f64],
    mut f1: Option<&mut [f64]>,
    nt: usize,
) {
    let lines = b.len() / nt;
    let run = |range: std::ops::Range<usize>,
               buf: &mut [Complex64],
               scratch: &mut [Complex64],
               f0: &mut [f64],
               f1: Option<&mut [f64]>| {
        let plan = f.theta_plan();
        for line in range.clone() {
            let base = line * nt;
            for (q, (bb, fc)) in b[base..base + nt].iter().zip(fac).enumerate() {
                buf[(line - range.start) * nt + q] = bb * fc;
            }
        }
        plan.process_with_scratch(buf, scratch);
        let lo = range.start * nt;
        let n = range.len() * nt;
        if let Some(f1) = f1 {
            for q in 0..n {
                f0[lo + q] = buf[q].re;
                f1[lo + q] = buf[q].im;
            }
        } else {
            for q in 0..n {
                f0[lo + q] = buf[q].re;
            }
        }
    };
    if crate::parallel::serial() {
        let plan = f.theta_plan();
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::default(); b.len()];
        run(0..lines, &mut buf, &mut scratch, f0, f1.as_deref_mut());
        return;
    }
    use rayon::prelude::*;
    let chunk = lines.div_ceil(crate::parallel::threads() * 2).max(16);
    let tasks: Vec<(usize, usize)> = (0..lines.div_ceil(chunk))
        .map(|ci| (ci * chunk, ((ci + 1) * chunk).min(lines)))
        .collect();
    let p0 = SendMutPtr(f0.as_mut_ptr());
    let p1 = f1.map(|s| SendMutPtr(s.as_mut_ptr()));
    crate::parallel::pool().install(|| {
        tasks.par_iter().for_each_init(
            || {
                let plan = f.theta_plan();
                (
                    vec![Complex64::default(); chunk * nt],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), &(lo, hi)| {
                let (q0, q1) = (p0, p1);
                let len = b.len();
                let f0 = unsafe { std::slice::from_raw_parts_mut(q0.0, len) };
                let f1 = q1
                    .as_ref()
                    .map(|p| unsafe { std::slice::from_raw_parts_mut(p.0, len) });
                run(
                    lo..hi,
                    &mut buf[..(hi - lo) * nt],
                    scratch,
                    f0,
                    f1,
                );
            },
        );
    });
}

#[derive(Clone, Copy)]
struct SendMutPtr(*mut f64);
unsafe impl Send for SendMutPtr {}
unsafe impl Sync for SendMutPtr {}

impl Modes {
    /// All partials of total order <= m at one continuous point, ranked like
    /// the (3, m) index table. Separable accumulation over the mode box.
    pub fn point_partials(&self, x: [f64; 2], theta: f64, m: usize) -> Vec<f64> {
        let grid = self.grid;
        let nx = grid.nx();
        let nt = grid.ntheta();
        let e1: Vec<Complex64> = (0..nx)
            .map(|j| Complex64::from_polar(1.0, super::fft::wavenumber(nx, j) as f64 * x[0]))
            .collect();
        let e2: Vec<Complex64> = (0..nx)
            .map(|j| Complex64::from_polar(1.0, super::fft::wavenumber(nx, j) as f64 * x[1]))
            .collect();
        let et: Vec<Complex64> = (0..nt)
            .map(|j| Complex64::from_polar(1.0, super::fft::wavenumber(nt, j) as f64 * theta))
            .collect();
        // collapse x1: A[b1][k2 * nt + m2]
        let mut a = vec![vec![Complex64::default(); nx * nt]; m + 1];
        for i1 in 0..nx {
            let ph = e1[i1];
            let facs: Vec<Complex64> = (0..=m).map(|b| ik_pow(nx, i1, b) * ph).collect();
            for i2 in 0..nx {
                for k in 0..nt {
                    let w = self.c[grid.idx(i1, i2, k)];
                    let slot = i2 * nt + k;
                    for (b, fac) in facs.iter().enumerate() {
                        a[b][slot] += w * fac;
                    }
                }
            }
        }
        // collapse x2: B[b1][b2][m2]
        let mut b = vec![vec![vec![Complex64::default(); nt]; m + 1]; m + 1];
        for b1 in 0..=m {
            for i2 in 0..nx {
                let ph = e2[i2];
                let facs: Vec<Complex64> = (0..=(m - b1)).map(|q| ik_pow(nx, i2, q) * ph).collect();
                for k in 0..nt {
                    let w = a[b1][i2 * nt + k];
                    for (q, fac) in facs.iter().enumerate() {
                        b[b1][q][k] += w * fac;
                    }
                }
            }
        }
        // collapse theta
        let table = index_table(3, m);
        let mut out = vec![0.0; table.len()];
        for (rank, idx) in table.indices().iter().enumerate() {
            let (b1, b2, c) = (idx.exp(0), idx.exp(1), idx.exp(2));
            let mut acc = Complex64::default();
            for k in 0..nt {
                acc += b[b1][b2][k] * ik_pow(nt, k, c) * et[k];
            }
            out[rank] = acc.re;
        }
        out
    }

    /// Fiber-profile coefficients at an arbitrary base point: the complex
    /// theta-modes of W(x, ·).
    pub fn theta_profile(&self, x: [f64; 2]) -> Vec<Complex64> {
        let grid = self.grid;
        let nx = grid.nx();
        let nt = grid.ntheta();
        let e1: Vec<Complex64> = (0..nx)
            .map(|j| Complex64::from_polar(1.0, super::fft::wavenumber(nx, j) as f64 * x[0]))
            .collect();
        let e2: Vec<Complex64> = (0..nx)
            .map(|j| Complex64::from_polar(1.0, super::fft::wavenumber(nx, j) as f64 * x[1]))
            .collect();
        let mut prof = vec![Complex64::default(); nt];
        for i1 in 0..nx {
            for i2 in 0..nx {
                let ph = e1[i1] * e2[i2];
                let base = grid.idx(i1, i2, 0);
                for (k, p) in prof.iter_mut().enumerate() {
                    *p += self.c[base + k] * ph;
                }
            }
        }
        prof
    }

    /// Evaluate a profile at a fiber angle.
    pub fn profile_value(&self, prof: &[Complex64], theta: f64) -> f64 {
        let nt = self.grid.ntheta();
        let mut acc = Complex64::default();
        for (k, p) in prof.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, super::fft::wavenumber(nt, k) as f64 * theta);
            acc += p * ph;
        }
        acc.re
    }

    /// Zero every mode past two thirds of the Nyquist frequency in each
    /// direction (orszag rule applied to the nonlinear right-hand side).
    pub fn dealias(&mut self) {
        let grid = self.grid;
        let nx = grid.nx();
        let nt = grid.ntheta();
        let cut_x = nx as i64 / 3;
        let cut_t = nt as i64 / 3;
        for i1 in 0..nx {
            let k1 = super::fft::wavenumber(nx, i1).abs();
            for i2 in 0..nx {
                let k2 = super::fft::wavenumber(nx, i2).abs();
                for k in 0..nt {
                    let m = super::fft::wavenumber(nt, k).abs();
                    if k1 > cut_x || k2 > cut_x || m > cut_t {
                        self.c[grid.idx(i1, i2, k)] = Complex64::default();
                    }
                }
            }
        }
    }
}

/// Jets of the Taylor monomials r² Δx1^a1 Δx2^a2 Δθ^a3 / α! at a point with
/// fiber value (y1, y2) (as outer scalars) and base angle theta0. Summing
/// them against the W-partials of the interpolant yields the jet of
/// F² = r² W(x, θ(y)) exactly up to the truncation orders.
pub fn f2_taylor_basis<S: Scalar>(
    y: [S; 2],
    theta0: f64,
    inner_order: usize,
    taylor_order: usize,
) -> Result<Vec<Jet<S>>> {
    let m = 4usize; // inner variables (x1, x2, y1, y2)
    let dx1 = Jet::seed(0, y[0].lift(0.0), m, inner_order)?;
    let dx2 = Jet::seed(1, y[0].lift(0.0), m, inner_order)?;
    let y1 = Jet::seed(2, y[0].clone(), m, inner_order)?;
    let y2 = Jet::seed(3, y[1].clone(), m, inner_order)?;
    let r2 = y1.mul(&y1)?.add(&y2.mul(&y2)?)?;
    let (c0, s0) = (theta0.cos(), theta0.sin());
    let u = y1.scale(c0).add(&y2.scale(s0))?;
    let v = y1.scale(-s0).add(&y2.scale(c0))?;
    // Δθ = atan(v / u), exact while u stays away from zero
    let dth = v.mul(&u.recip())?.atan();

    let one = {
        let mut j = dx1.scale(0.0);
        let lifted = j.value().lift(1.0);
        j.coeffs_mut()[0] = lifted;
        j
    };
    let pow_list = |base: &Jet<S>| -> Result<Vec<Jet<S>>> {
        let mut l = vec![one.clone()];
        for k in 1..=taylor_order {
            l.push(l[k - 1].mul(base)?);
        }
        Ok(l)
    };
    let p1 = pow_list(&dx1)?;
    let p2 = pow_list(&dx2)?;
    let p3 = pow_list(&dth)?;

    let table = index_table(3, taylor_order);
    let mut fact = vec![1.0; taylor_order + 1];
    for k in 1..=taylor_order {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut basis = Vec::with_capacity(table.len());
    for idx in table.indices() {
        let (a1, a2, a3) = (idx.exp(0), idx.exp(1), idx.exp(2));
        if a1 + a2 > inner_order {
            // pure base monomials beyond the jet order vanish identically
            basis.push(r2.scale(0.0));
            continue;
        }
        let t = p1[a1].mul(&p2[a2])?.mul(&p3[a3])?.mul(&r2)?;
        basis.push(t.scale(1.0 / (fact[a1] * fact[a2] * fact[a3])));
    }
    Ok(basis)
}

/// Σ w_α · basis_α.
pub fn assemble_f2_jet<S: Scalar>(basis: &[Jet<S>], w: &[f64]) -> Jet<S> {
    let mut out = basis[0].scale(w[0]);
    for (b, &c) in basis.iter().zip(w).skip(1) {
        if c != 0.0 {
            out = out.add(&b.scale(c)).expect("basis shapes agree");
        }
    }
    out
}

/// Per-angle map from kernel partial fields to the order-4 coefficient
/// table of F² (x-derivative count <= 3).
///
/// Base derivatives commute with the fiber chain rule, so the map
/// factorizes: entry (b1, b2, μ) of the F² table is Σ_c K[μ][c] ·
/// ∂x1^b1 ∂x2^b2 ∂θ^c W, with K depending only on the fiber pattern μ and
/// the angle. K[μ][c] is the pure-fiber coefficient of the Taylor basis
/// jet r²Δθ^c/c!.
pub struct AngleAssembly {
    /// K[μ][c] for the 15 fiber patterns, c <= degree(μ).
    pub ky: [[f64; 5]; 15],
}

/// Static plan shared by all angles: for each fiber pattern μ, the rows of
/// the (4,4) table it fills (one per admissible x-pattern) and the field
/// columns (b1, b2, c) feeding them.
pub struct AssemblyPlan {
    /// per fiber pattern: (degree of μ, list of (row44, col_base)) where the
    /// c-th contributing column is col_base + c.
    pub per_mu: Vec<(usize, Vec<(u32, u32)>)>,
}

/// The kernel field list is ordered so that (b1, b2, c) and (b1, b2, c+1)
/// are adjacent, giving each assembly row a contiguous column run.
pub fn assembly_plan() -> &'static AssemblyPlan {
    use std::sync::OnceLock;
    static PLAN: OnceLock<AssemblyPlan> = OnceLock::new();
    PLAN.get_or_init(|| {
        let specs = kernel_specs();
        let t44 = index_table(4, 4);
        let ty = index_table(2, 4); // fiber patterns (m1, m2)
        let mut per_mu = Vec::with_capacity(ty.len());
        for mu in ty.indices() {
            let (m1, m2) = (mu.exp(0), mu.exp(1));
            let deg = m1 + m2;
            let mut rows = Vec::new();
            for b1 in 0..=3usize.min(4 - deg) {
                for b2 in 0..=(3usize.min(4 - deg) - b1) {
                    if b1 + b2 + deg > 4 {
                        continue;
                    }
                    let row = t44
                        .rank_of(&crate::jet::MultiIndex::new(&[b1, b2, m1, m2]))
                        .unwrap() as u32;
                    let col = specs
                        .iter()
                        .position(|&s| s == (b1, b2, 0))
                        .unwrap() as u32;
                    rows.push((row, col));
                }
            }
            per_mu.push((deg, rows));
        }
        AssemblyPlan { per_mu }
    })
}

/// Assembly matrices for every fiber angle of the grid, cached per shape and
/// driven by `f2_taylor_basis` so the hot path and the generic path share one
/// definition.
pub fn angle_assemblies(grid: SphereBundleGrid) -> Result<std::sync::Arc<Vec<AngleAssembly>>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<AngleAssembly>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let map = cache.lock().unwrap();
        if let Some(a) = map.get(&(grid.nx(), grid.ntheta())) {
            return Ok(a.clone());
        }
    }
    let built = Arc::new(build_angle_assemblies(grid)?);
    cache
        .lock()
        .unwrap()
        .insert((grid.nx(), grid.ntheta()), built.clone());
    Ok(built)
}

fn build_angle_assemblies(grid: SphereBundleGrid) -> Result<Vec<AngleAssembly>> {
    let t3 = index_table(3, 4);
    let t44 = index_table(4, 4);
    let ty = index_table(2, 4);
    (0..grid.ntheta())
        .map(|k| {
            let th = grid.theta(k);
            let y = [th.cos(), th.sin()];
            let basis = f2_taylor_basis::<f64>(y, th, 4, 4)?;
            let mut ky = [[0.0; 5]; 15];
            for (mu, slot) in ky.iter_mut().enumerate() {
                let pat = ty.indices()[mu];
                let row = t44
                    .rank_of(&crate::jet::MultiIndex::new(&[
                        0,
                        0,
                        pat.exp(0),
                        pat.exp(1),
                    ]))
                    .unwrap();
                for (c, s) in slot.iter_mut().enumerate().take(pat.degree() + 1) {
                    let col = t3
                        .rank_of(&crate::jet::MultiIndex::new(&[0, 0, c]))
                        .unwrap();
                    *s = basis[col].coeffs()[row];
                }
            }
            Ok(AngleAssembly { ky })
        })
        .collect()
}

/// Lane-major assembly: wf[col][lane] -> f2 partial tables per lane.
#[inline(always)]
pub(crate) fn apply_assembly(
    plan: &AssemblyPlan,
    ky: &[[crate::flow::kernel::V; 5]; 15],
    wf: &[crate::flow::kernel::V],
    out: &mut [crate::flow::kernel::V; crate::flow::kernel::N44],
) {
    use crate::flow::kernel::LANES;
    for (mu, (deg, rows)) in plan.per_mu.iter().enumerate() {
        let k = &ky[mu];
        for &(row, col) in rows {
            let c = col as usize;
            let mut acc = unsafe { *wf.get_unchecked(c) };
            for l in 0..LANES {
                acc[l] *= k[0][l];
            }
            for q in 1..=*deg {
                let src = unsafe { wf.get_unchecked(c + q) };
                for l in 0..LANES {
                    acc[l] = k[q][l].mul_add(src[l], acc[l]);
                }
            }
            out[row as usize] = acc;
        }
    }
}

/// Wrap a coordinate into [0, 2π).
pub fn wrap_angle(x: f64) -> f64 {
    let mut v = x % TWO_PI;
    if v < 0.0 {
        v += TWO_PI;
    }
    v
}

/// Fiber coordinates (r, θ) of a nonzero tangent vector.
pub fn polar_of(y: &[f64]) -> Result<(f64, f64)> {
    let r2 = y[0] * y[0] + y[1] * y[1];
    if r2 < 1e-24 {
        return Err(FinslerError::InvalidStructure(
            "fiber vector must be nonzero (|y| >= 1e-12)".into(),
        ));
    }
    Ok((r2.sqrt(), wrap_angle(y[1].atan2(y[0]))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::MultiIndex;

    #[test]
    fn basis_reproduces_flat_field() {
        // W identically 1: only the α = 0 basis term contributes and the jet
        // must be that of r² = y1² + y2².
        let th = 0.7f64;
        let y = [th.cos(), th.sin()];
        let basis = f2_taylor_basis::<f64>(y, th, 4, 4).unwrap();
        let table = index_table(3, 4);
        let mut w = vec![0.0; table.len()];
        w[0] = 1.0;
        let jet = assemble_f2_jet(&basis, &w);
        assert!((jet.value() - 1.0).abs() < 1e-14);
        // second y-derivatives give twice the identity metric
        let g11 = jet.partial(&MultiIndex::new(&[0, 0, 2, 0])).unwrap();
        let g12 = jet.partial(&MultiIndex::new(&[0, 0, 1, 1])).unwrap();
        let g22 = jet.partial(&MultiIndex::new(&[0, 0, 0, 2])).unwrap();
        assert!((g11 - 2.0).abs() < 1e-13);
        assert!(g12.abs() < 1e-13);
        assert!((g22 - 2.0).abs() < 1e-13);
        // fourth derivatives of r² vanish
        let q = jet.partial(&MultiIndex::new(&[0, 0, 2, 2])).unwrap();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn point_partials_match_analytic_field() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let mut w = vec![0.0; grid.nodes()];
        let func = |x1: f64, x2: f64, th: f64| (x1).sin() * (2.0 * x2).cos() + 0.5 * (2.0 * th).cos();
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    w[grid.idx(i1, i2, k)] = func(grid.x_coord(i1), grid.x_coord(i2), grid.theta(k));
                }
            }
        }
        let modes = Modes::from_field(grid, &w);
        let (x, th) = ([0.37, 1.21], 2.3);
        let p = modes.point_partials(x, th, 3);
        let table = index_table(3, 3);
        // value
        assert!((p[0] - func(x[0], x[1], th)).abs() < 1e-11);
        // ∂x1: cos(x1) cos(2 x2)
        let r = table
            .rank_of(&MultiIndex::new(&[1, 0, 0]))
            .unwrap();
        assert!((p[r] - x[0].cos() * (2.0 * x[1]).cos()).abs() < 1e-11);
        // ∂θ²: -2 cos(2θ)
        let r = table.rank_of(&MultiIndex::new(&[0, 0, 2])).unwrap();
        assert!((p[r] + 2.0 * (2.0 * th).cos()).abs() < 1e-10);
        // mixed ∂x1∂x2: -2 cos(x1) sin(2x2)
        let r = table.rank_of(&MultiIndex::new(&[1, 1, 0])).unwrap();
        assert!((p[r] + 2.0 * x[0].cos() * (2.0 * x[1]).sin()).abs() < 1e-10);
    }

    #[test]
    fn theta_profile_interpolates() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let mut w = vec![0.0; grid.nodes()];
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    w[grid.idx(i1, i2, k)] =
                        1.0 + 0.3 * (grid.x_coord(i1) + grid.theta(k)).sin() * (grid.x_coord(i2)).cos();
                }
            }
        }
        let modes = Modes::from_field(grid, &w);
        let x = [0.9, 2.7];
        let prof = modes.theta_profile(x);
        for th in [0.0, 1.1, 4.4] {
            let want = 1.0 + 0.3 * (x[0] + th).sin() * (x[1]).cos();
            let got = modes.profile_value(&prof, th);
            assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        }
    }
}
