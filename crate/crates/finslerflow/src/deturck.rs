//! The gauge machinery: the connection-difference vector field, the
//! contracted Lie-derivative term, the second-order operator on lifted maps,
//! the diffeomorphism ODE on the sphere bundle, and structure pullback.


use rayon::prelude::*;

use crate::connection::{conn_jets, delta_derivative};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::flow::grid::SphereBundleGrid;
use crate::flow::spectral::wrap_angle;
use crate::flow::state::FlowState;
use crate::jet::{Jet, MultiIndex};
use crate::parallel;
use crate::structure::{FinslerStructure, PointTM};

/// Source of ξ-jets for Lie-derivative contractions: order-1 jets of the
/// components in the 2n variables.
pub trait XiField {
    fn dim(&self) -> usize;
    fn xi_jets(&self, p: &PointTM) -> Result<Vec<Jet<f64>>>;
    fn eval(&self, p: &PointTM) -> Result<Vec<f64>> {
        Ok(self
            .xi_jets(p)?
            .iter()
            .map(|j| *j.value())
            .collect())
    }
}

/// ξ^i = g̃^{pq}(−Γ̃^i_pq + Γ̄^i_pq): the trace of the connection difference
/// between an evolving structure and a fixed background, 0-homogeneous in y.
pub struct DeturckField {
    evolving: FinslerStructure,
    background: FinslerStructure,
}

impl DeturckField {
    pub fn new(evolving: FinslerStructure, background: FinslerStructure) -> Result<DeturckField> {
        if evolving.dim() != background.dim() {
            return Err(FinslerError::InvalidConfig(
                "evolving and background structures must share a dimension".into(),
            ));
        }
        Ok(DeturckField {
            evolving,
            background,
        })
    }
}

impl XiField for DeturckField {
    fn dim(&self) -> usize {
        self.evolving.dim()
    }

    fn xi_jets(&self, p: &PointTM) -> Result<Vec<Jet<f64>>> {
        let n = self.dim();
        let ev = conn_jets::<f64>(&self.evolving, p)?;
        let bg = conn_jets::<f64>(&self.background, p)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = ev.chern[0][0][0].scale(0.0);
            for pq in 0..n {
                for q in 0..n {
                    let diff = bg.chern[i][pq][q].sub(&ev.chern[i][pq][q])?;
                    acc = acc.add(&ev.g_inv[pq][q].truncated(1)?.mul(&diff)?)?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Analytic vector field with expression components over the 2n coordinates
/// (components of x-only fields are 0-homogeneous automatically).
pub struct AnalyticVectorField {
    n: usize,
    comps: Vec<Expr>,
}

impl AnalyticVectorField {
    pub fn new(n: usize, comps: Vec<Expr>) -> Result<AnalyticVectorField> {
        if comps.len() != n {
            return Err(FinslerError::InvalidConfig(format!(
                "vector field needs {n} components"
            )));
        }
        for e in &comps {
            if let Some(m) = e.max_coord() {
                if m >= 2 * n {
                    return Err(FinslerError::InvalidConfig(format!(
                        "component references coordinate {m}, bundle has {}",
                        2 * n
                    )));
                }
            }
        }
        Ok(AnalyticVectorField { n, comps })
    }

    pub fn constant(n: usize, v: &[f64]) -> Result<AnalyticVectorField> {
        Self::new(n, v.iter().map(|&c| Expr::constant(c)).collect())
    }
}

impl XiField for AnalyticVectorField {
    fn dim(&self) -> usize {
        self.n
    }

    fn xi_jets(&self, p: &PointTM) -> Result<Vec<Jet<f64>>> {
        let (x, y) = crate::structure::coordinate_jets::<f64>(p, 1)?;
        let coords: Vec<Jet<f64>> = x.into_iter().chain(y).collect();
        let proto = crate::jet::Scalar::lift(&coords[0], 0.0);
        Ok(self.comps.iter().map(|e| e.eval(&coords, &proto)).collect())
    }
}

/// Gauge vector field of the pair (evolving, background) at one point.
pub fn deturck_vector(
    evolving: &FinslerStructure,
    background: &FinslerStructure,
    p: &PointTM,
) -> Result<Vec<f64>> {
    DeturckField::new(evolving.clone(), background.clone())?.eval(p)
}

/// Contracted Lie-derivative term 2 y^i y^j ∇_j (g_ik ξ^k), the gauge term of
/// the flow equation.
pub fn lie_derivative_f2(
    s: &FinslerStructure,
    xi: &dyn XiField,
    p: &PointTM,
) -> Result<f64> {
    if xi.dim() != s.dim() {
        return Err(FinslerError::InvalidConfig(
            "vector field dimension does not match the structure".into(),
        ));
    }
    let n = s.dim();
    let cj = conn_jets::<f64>(s, p)?;
    let xj = xi.xi_jets(p)?;
    let nval: Vec<Vec<f64>> = cj
        .nonlinear
        .iter()
        .map(|row| row.iter().map(|x| *x.value()).collect())
        .collect();
    let mut acc = 0.0;
    for j in 0..n {
        for k in 0..n {
            // ∇_j ξ^k = δ_j ξ^k + ξ^s Γ^k_sj
            let mut nab = xj[k].partial(&MultiIndex::unit(2 * n, j))?;
            for m in 0..n {
                nab -= nval[m][j] * xj[k].partial(&MultiIndex::unit(2 * n, n + m))?;
            }
            for sdx in 0..n {
                nab += xj[sdx].value() * cj.chern[k][sdx][j].value();
            }
            let dyf2 = cj.f2.partial(&MultiIndex::unit(2 * n, n + k))?;
            acc += p.y[j] * dyf2 * nab;
        }
    }
    Ok(acc)
}

/// Analytic lifted map on TM: 2n expression components over the 2n
/// coordinates (x first, then y).
#[derive(Clone)]
pub struct AnalyticMap {
    n: usize,
    comps: Vec<Expr>,
}

impl AnalyticMap {
    pub fn new(n: usize, comps: Vec<Expr>) -> Result<AnalyticMap> {
        if comps.len() != 2 * n {
            return Err(FinslerError::InvalidConfig(format!(
                "lifted map needs {} components",
                2 * n
            )));
        }
        Ok(AnalyticMap { n, comps })
    }

    pub fn identity(n: usize) -> AnalyticMap {
        AnalyticMap {
            n,
            comps: (0..2 * n).map(Expr::coord).collect(),
        }
    }

    /// (x, y) -> (x + c, y).
    pub fn translation(n: usize, c: &[f64]) -> AnalyticMap {
        let mut comps: Vec<Expr> = (0..n)
            .map(|i| Expr::coord(i).add(Expr::constant(c[i])))
            .collect();
        comps.extend((n..2 * n).map(Expr::coord));
        AnalyticMap { n, comps }
    }

    /// Natural lift of a linear base map: (x, y) -> (Ax, Ay).
    pub fn linear(n: usize, a: &[Vec<f64>]) -> AnalyticMap {
        let mut comps = Vec::with_capacity(2 * n);
        for block in 0..2 {
            for i in 0..n {
                comps.push(Expr::sum((0..n).filter(|&j| a[i][j] != 0.0).map(|j| {
                    Expr::coord(block * n + j).scaled(a[i][j])
                })));
            }
        }
        AnalyticMap { n, comps }
    }

    /// Pullback by an affine map of TM: returns self ∘ ψ where
    /// ψ(z) = A z + b over all 2n coordinates.
    pub fn compose_affine(&self, a: &[Vec<f64>], b: &[f64]) -> AnalyticMap {
        AnalyticMap {
            n: self.n,
            comps: self
                .comps
                .iter()
                .map(|e| e.substitute_affine(a, b))
                .collect(),
        }
    }

    pub fn image(&self, p: &PointTM) -> PointTM {
        let coords: Vec<f64> = p.x.iter().chain(p.y.iter()).copied().collect();
        let vals: Vec<f64> = self.comps.iter().map(|e| e.eval_f64(&coords)).collect();
        PointTM::new(vals[..self.n].to_vec(), vals[self.n..].to_vec())
    }

    fn jets(&self, p: &PointTM, order: usize) -> Result<Vec<Jet<f64>>> {
        let (x, y) = crate::structure::coordinate_jets::<f64>(p, order)?;
        let coords: Vec<Jet<f64>> = x.into_iter().chain(y).collect();
        let proto = crate::jet::Scalar::lift(&coords[0], 0.0);
        Ok(self.comps.iter().map(|e| e.eval(&coords, &proto)).collect())
    }
}

/// The 2n components of the second-order operator on lifted maps whose
/// identity-map value is the gauge field.
pub fn phi_operator(
    phi: &AnalyticMap,
    s: &FinslerStructure,
    background: &FinslerStructure,
    p: &PointTM,
) -> Result<Vec<f64>> {
    let n = s.dim();
    if phi.n != n || background.dim() != n {
        return Err(FinslerError::InvalidConfig(
            "map, structure, and background dimensions must agree".into(),
        ));
    }
    let cj = conn_jets::<f64>(s, p)?;
    let f2 = *cj.f2.value();
    let ginv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| *cj.g_inv[i][j].value()).collect())
        .collect();
    let nval: Vec<Vec<f64>> = cj
        .nonlinear
        .iter()
        .map(|row| row.iter().map(|x| *x.value()).collect())
        .collect();
    let phi_jets = phi.jets(p, 2)?;
    let image = phi.image(p);
    let bg = conn_jets::<f64>(background, &image)?;

    // δ-derivatives of the map components, as order-1 jets
    let mut dphi: Vec<Vec<Jet<f64>>> = Vec::with_capacity(2 * n);
    for jet in &phi_jets {
        let row: Vec<Jet<f64>> = (0..n)
            .map(|q| delta_derivative(jet, &cj.nonlinear, q, n))
            .collect::<Result<Vec<_>>>()?;
        dphi.push(row);
    }
    let delta_value = |jet: &Jet<f64>, pdx: usize| -> Result<f64> {
        let mut v = jet.partial(&MultiIndex::unit(2 * n, pdx))?;
        for m in 0..n {
            v -= nval[m][pdx] * jet.partial(&MultiIndex::unit(2 * n, n + m))?;
        }
        Ok(v)
    };

    let mut out = vec![0.0; 2 * n];
    for alpha in 0..2 * n {
        let jet = &phi_jets[alpha];
        let mut acc = 0.0;
        for pdx in 0..n {
            for q in 0..n {
                let gpq = ginv[pdx][q];
                if gpq == 0.0 {
                    continue;
                }
                // δ²φ/δx^p δx^q
                let mut term = delta_value(&dphi[alpha][q], pdx)?;
                // F² ∂²φ/∂y^p∂y^q
                term += f2 * jet.partial(&MultiIndex::unit(2 * n, n + pdx).plus(n + q))?;
                if alpha < n {
                    for h in 0..n {
                        term -= *dphi[alpha][h].value() * cj.chern[h][pdx][q].value();
                    }
                    for j in 0..n {
                        for k in 0..n {
                            term += bg.chern[alpha][j][k].value()
                                * dphi[j][pdx].value()
                                * dphi[k][q].value();
                        }
                    }
                } else {
                    for k in 0..n {
                        let dyk = jet.partial(&MultiIndex::unit(2 * n, n + k))?;
                        let dn = delta_value(&cj.nonlinear[k][q], pdx)?;
                        term += dyk * dn;
                    }
                }
                acc += gpq * term;
            }
        }
        out[alpha] = acc;
    }
    Ok(out)
}

/// Time-dependent vector field on the sphere bundle driving the
/// diffeomorphism ODE.
pub trait TimeField: Sync {
    fn eval(&self, t: f64, x: [f64; 2], theta: f64) -> Result<[f64; 2]>;
    fn jacobian(&self, t: f64, x: [f64; 2], theta: f64) -> Result<[[f64; 2]; 2]>;
    fn fiber_independent(&self) -> bool {
        false
    }
}

/// Closure-backed time field.
pub struct FnTimeField<F, G> {
    pub field: F,
    pub jac: G,
    pub fiber_independent: bool,
}

impl<F, G> TimeField for FnTimeField<F, G>
where
    F: Fn(f64, [f64; 2], f64) -> [f64; 2] + Sync,
    G: Fn(f64, [f64; 2], f64) -> [[f64; 2]; 2] + Sync,
{
    fn eval(&self, t: f64, x: [f64; 2], theta: f64) -> Result<[f64; 2]> {
        Ok((self.field)(t, x, theta))
    }
    fn jacobian(&self, t: f64, x: [f64; 2], theta: f64) -> Result<[[f64; 2]; 2]> {
        Ok((self.jac)(t, x, theta))
    }
    fn fiber_independent(&self) -> bool {
        self.fiber_independent
    }
}

/// Grid map on the sphere bundle: per node, the image base point, the image
/// fiber angle, and the radial stretch of the lifted differential.
#[derive(Clone)]
pub struct LiftedDiffeo {
    pub grid: SphereBundleGrid,
    pub x_image: Vec<[f64; 2]>,
    pub theta_image: Vec<f64>,
    pub radial_scale: Vec<f64>,
    pub identity: bool,
    pub fiber_uniform: bool,
}

struct Trajectory {
    x: [f64; 2],
    jac: [[f64; 2]; 2],
}

fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn advance_trajectories(
    xi: &dyn TimeField,
    thetas: &[f64],
    trajs: &mut [Trajectory],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<()> {
    if t1 <= t0 {
        return Ok(());
    }
    let steps = (((t1 - t0) / dt).round() as usize).max(1);
    let h = (t1 - t0) / steps as f64;
    let results: Vec<Result<()>> = parallel::pool().install(|| {
        trajs
            .par_iter_mut()
            .zip(thetas.par_iter())
            .map(|(tr, &theta)| {
                for s in 0..steps {
                    let t = t0 + s as f64 * h;
                    rk4_lifted(xi, tr, theta, t, h)?;
                    let det = det2(&tr.jac);
                    if !(det > 1e-12) {
                        return Err(FinslerError::DiffeoBreakdown {
                            t: t + h,
                            det,
                        });
                    }
                }
                Ok(())
            })
            .collect()
    });
    for r in results {
        r?;
    }
    Ok(())
}

fn rk4_lifted(
    xi: &dyn TimeField,
    tr: &mut Trajectory,
    theta: f64,
    t: f64,
    h: f64,
) -> Result<()> {
    type State = ([f64; 2], [[f64; 2]; 2]);
    let deriv = |t: f64, s: &State| -> Result<State> {
        let v = xi.eval(t, s.0, theta)?;
        let dj = xi.jacobian(t, s.0, theta)?;
        let mut jdot = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                jdot[i][j] = dj[i][0] * s.1[0][j] + dj[i][1] * s.1[1][j];
            }
        }
        Ok((v, jdot))
    };
    let add = |a: &State, b: &State, w: f64| -> State {
        let mut out = *a;
        for i in 0..2 {
            out.0[i] += w * b.0[i];
            for j in 0..2 {
                out.1[i][j] += w * b.1[i][j];
            }
        }
        out
    };
    let s0: State = (tr.x, tr.jac);
    let k1 = deriv(t, &s0)?;
    let k2 = deriv(t + 0.5 * h, &add(&s0, &k1, 0.5 * h))?;
    let k3 = deriv(t + 0.5 * h, &add(&s0, &k2, 0.5 * h))?;
    let k4 = deriv(t + h, &add(&s0, &k3, h))?;
    let mut s = add(&s0, &k1, h / 6.0);
    s = add(&s, &k2, h / 3.0);
    s = add(&s, &k3, h / 3.0);
    s = add(&s, &k4, h / 6.0);
    tr.x = s.0;
    tr.jac = s.1;
    Ok(())
}

fn capture(grid: SphereBundleGrid, trajs: &[Trajectory], fiber_uniform: bool) -> LiftedDiffeo {
    let nt = grid.ntheta();
    let nodes = grid.nodes();
    let mut x_image = vec![[0.0; 2]; nodes];
    let mut theta_image = vec![0.0; nodes];
    let mut radial_scale = vec![0.0; nodes];
    let mut max_disp = 0.0f64;
    let mut max_jdev = 0.0f64;
    for node in 0..nodes {
        let b = node / nt;
        let k = node % nt;
        let tr = if fiber_uniform { &trajs[b] } else { &trajs[node] };
        x_image[node] = tr.x;
        let y = grid.fiber_vector(k);
        let v = [
            tr.jac[0][0] * y[0] + tr.jac[0][1] * y[1],
            tr.jac[1][0] * y[0] + tr.jac[1][1] * y[1],
        ];
        radial_scale[node] = (v[0] * v[0] + v[1] * v[1]).sqrt();
        theta_image[node] = wrap_angle(v[1].atan2(v[0]));
        let home = [
            grid.x_coord(b / grid.nx()),
            grid.x_coord(b % grid.nx()),
        ];
        max_disp = max_disp
            .max((tr.x[0] - home[0]).abs())
            .max((tr.x[1] - home[1]).abs());
        for i in 0..2 {
            for j in 0..2 {
                max_jdev = max_jdev.max((tr.jac[i][j] - f64::from(i == j)).abs());
            }
        }
    }
    LiftedDiffeo {
        grid,
        x_image,
        theta_image,
        radial_scale,
        identity: max_disp == 0.0 && max_jdev == 0.0,
        fiber_uniform,
    }
}

/// Solve ∂_t φ = ξ(φ, t) from the identity at t0, capturing the lifted map
/// at each requested time (ascending, all >= t0).
pub fn integrate_diffeo_at_times(
    xi: &dyn TimeField,
    grid: SphereBundleGrid,
    t0: f64,
    times: &[f64],
    dt: f64,
) -> Result<Vec<LiftedDiffeo>> {
    if !(dt > 0.0) {
        return Err(FinslerError::InvalidConfig("dt must be positive".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(FinslerError::InvalidConfig(
            "capture times must ascend from the start time".into(),
        ));
    }
    let fiber_uniform = xi.fiber_independent();
    let nt = grid.ntheta();
    let count = if fiber_uniform {
        grid.base_nodes()
    } else {
        grid.nodes()
    };
    let mut trajs: Vec<Trajectory> = (0..count)
        .map(|q| {
            let b = if fiber_uniform { q } else { q / nt };
            Trajectory {
                x: [grid.x_coord(b / grid.nx()), grid.x_coord(b % grid.nx())],
                jac: [[1.0, 0.0], [0.0, 1.0]],
            }
        })
        .collect();
    let thetas: Vec<f64> = (0..count)
        .map(|q| if fiber_uniform { 0.0 } else { grid.theta(q % nt) })
        .collect();
    let mut out = Vec::with_capacity(times.len());
    let mut t_cur = t0;
    for &target in times {
        advance_trajectories(xi, &thetas, &mut trajs, t_cur, target, dt)?;
        t_cur = target;
        out.push(capture(grid, &trajs, fiber_uniform));
    }
    Ok(out)
}

/// Grid map approximating the flow of ξ at time t1.
pub fn integrate_diffeo(
    xi: &dyn TimeField,
    grid: SphereBundleGrid,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<LiftedDiffeo> {
    Ok(integrate_diffeo_at_times(xi, grid, t0, &[t1], dt)?
        .pop()
        .expect("one capture"))
}

/// Pull a structure back along a lifted grid map: samples F²(φ(z)), with the
/// fiber acted on by the map's differential. Returns the sampled state.
pub fn pullback_state(phi: &LiftedDiffeo, f_tilde: &FinslerStructure, t: f64) -> Result<FlowState> {
    let grid = phi.grid;
    let nt = grid.ntheta();
    let mut w = vec![0.0; grid.nodes()];
    let profile_path = phi.fiber_uniform && f_tilde.fiber_profile([0.0, 0.0]).is_some();
    if profile_path {
        let results: Vec<Result<Vec<f64>>> = parallel::pool().install(|| {
            (0..grid.base_nodes())
                .into_par_iter()
                .map(|b| {
                    let node0 = b * nt;
                    let prof = f_tilde
                        .fiber_profile(phi.x_image[node0])
                        .expect("profile support checked");
                    let mut row = vec![0.0; nt];
                    for (k, slot) in row.iter_mut().enumerate() {
                        let node = node0 + k;
                        let r = phi.radial_scale[node];
                        *slot = r * r * prof(phi.theta_image[node]);
                    }
                    Ok(row)
                })
                .collect()
        });
        for (b, row) in results.into_iter().enumerate() {
            w[b * nt..(b + 1) * nt].copy_from_slice(&row?);
        }
    } else {
        let results: Vec<Result<f64>> = parallel::pool().install(|| {
            (0..grid.nodes())
                .into_par_iter()
                .map(|node| {
                    let r = phi.radial_scale[node];
                    let th = phi.theta_image[node];
                    let p = PointTM::new(
                        phi.x_image[node].to_vec(),
                        vec![r * th.cos(), r * th.sin()],
                    );
                    f_tilde.f2(&p)
                })
                .collect()
        });
        for (node, v) in results.into_iter().enumerate() {
            w[node] = v?;
        }
    }
    let state = FlowState { t, grid, w };
    state.check_positive()?;
    Ok(state)
}

/// Pullback as a grid-backed structure (spectral interpolant of the sampled
/// state).
pub fn pullback_structure(
    phi: &LiftedDiffeo,
    f_tilde: &FinslerStructure,
) -> Result<FinslerStructure> {
    Ok(pullback_state(phi, f_tilde, 0.0)?.to_structure())
}
