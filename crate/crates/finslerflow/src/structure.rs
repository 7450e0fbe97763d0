//! Evaluable Finsler structures and their pointwise metric data.
//!
//! A structure knows how to produce the jet of F² in the 2n variables
//! (x, y) at any point of the slit tangent bundle, either from analytic
//! coefficient expressions (Riemannian, Randers) or from a grid-backed
//! spectral interpolant owned by the flow module. Everything downstream
//! (connection, curvature, flows) consumes only that capability.

use std::sync::Arc;

use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, MultiIndex, Scalar};
use crate::linalg;
use crate::sampling::{PointSampler, DEFAULT_SEED};

/// Point of the slit tangent bundle TM₀.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTM {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PointTM {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> PointTM {
        PointTM { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

pub(crate) fn check_point(p: &PointTM, n: usize) -> Result<()> {
    if p.x.len() != n || p.y.len() != n {
        return Err(FinslerError::InvalidStructure(format!(
            "point dimension {}/{} does not match structure dimension {}",
            p.x.len(),
            p.y.len(),
            n
        )));
    }
    let norm2: f64 = p.y.iter().map(|v| v * v).sum();
    if norm2 < 1e-24 {
        return Err(FinslerError::InvalidStructure(
            "fiber vector must be nonzero (|y| >= 1e-12)".into(),
        ));
    }
    Ok(())
}

/// Grid-backed F² fields implement this; the flow module provides the
/// spectral interpolant. `f2_jet_nested` carries two extra derivative slots
/// in the fiber offsets (outer jets in n variables, order 2) so y-Hessians
/// of derived scalars can be extracted through the full pipeline.
pub trait F2Field: Send + Sync {
    fn dim(&self) -> usize;
    fn f2_jet(&self, p: &PointTM, order: usize) -> Result<Jet<f64>>;
    fn f2_jet_nested(&self, p: &PointTM, order: usize) -> Result<Jet<Jet<f64>>>;
    /// Fast fiber profile θ -> F²(x, y(θ)) at a fixed base point, when the
    /// representation supports one (spectral grids do).
    fn fiber_profile(&self, _x: [f64; 2]) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        None
    }
}

/// Scalars a structure can be evaluated over: plain values, or outer jets in
/// the fiber offsets for nested pipelines.
pub trait EvalScalar: Scalar {
    fn lift_x(x: f64, n: usize) -> Self;
    fn lift_y(y: f64, i: usize, n: usize) -> Self;
    fn grid_jet(field: &dyn F2Field, p: &PointTM, order: usize) -> Result<Jet<Self>>;
}

impl EvalScalar for f64 {
    fn lift_x(x: f64, _n: usize) -> f64 {
        x
    }
    fn lift_y(y: f64, _i: usize, _n: usize) -> f64 {
        y
    }
    fn grid_jet(field: &dyn F2Field, p: &PointTM, order: usize) -> Result<Jet<f64>> {
        field.f2_jet(p, order)
    }
}

impl EvalScalar for Jet<f64> {
    fn lift_x(x: f64, n: usize) -> Jet<f64> {
        Jet::constant(x, n, 2).expect("outer jet shape")
    }
    fn lift_y(y: f64, i: usize, n: usize) -> Jet<f64> {
        Jet::seed(i, y, n, 2).expect("outer jet shape")
    }
    fn grid_jet(field: &dyn F2Field, p: &PointTM, order: usize) -> Result<Jet<Jet<f64>>> {
        field.f2_jet_nested(p, order)
    }
}

#[derive(Clone)]
enum Kind {
    Riemannian { a: Arc<Vec<Vec<Expr>>> },
    Randers {
        a: Arc<Vec<Vec<Expr>>>,
        b: Arc<Vec<Expr>>,
    },
    Grid(Arc<dyn F2Field>),
}

/// An evaluable Finsler structure, positively 1-homogeneous in y.
#[derive(Clone)]
pub struct FinslerStructure {
    n: usize,
    kind: Kind,
}

fn validate_coefficients(n: usize, a: &[Vec<Expr>]) -> Result<()> {
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(FinslerError::InvalidStructure(format!(
            "coefficient table must be {n}x{n}"
        )));
    }
    for row in a {
        for e in row {
            if let Some(m) = e.max_coord() {
                if m >= n {
                    return Err(FinslerError::InvalidStructure(format!(
                        "coefficient expression references coordinate {m}, dimension is {n}"
                    )));
                }
            }
        }
    }
    // numeric symmetry spot check
    let mut s = PointSampler::new(n, DEFAULT_SEED);
    for _ in 0..8 {
        let p = s.point();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (a[i][j].eval_f64(&p.x) - a[j][i].eval_f64(&p.x)).abs();
                if !(d < 1e-12) {
                    return Err(FinslerError::InvalidStructure(format!(
                        "coefficient table is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {d:.3e}"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl FinslerStructure {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(self.kind, Kind::Riemannian { .. })
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, Kind::Grid(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Riemannian { .. } => "riemannian",
            Kind::Randers { .. } => "randers",
            Kind::Grid(_) => "numeric_grid",
        }
    }

    /// Riemannian structure from a symmetric coefficient table a_ij(x).
    pub fn riemannian(n: usize, a: Vec<Vec<Expr>>) -> Result<FinslerStructure> {
        validate_coefficients(n, &a)?;
        let s = FinslerStructure {
            n,
            kind: Kind::Riemannian { a: Arc::new(a) },
        };
        s.check_convexity_by_sampling()?;
        Ok(s)
    }

    /// Randers structure F = sqrt(a_ij y^i y^j) + b_i y^i. Requires
    /// ||b||_a < 1 everywhere, enforced by sampling.
    pub fn randers(n: usize, a: Vec<Vec<Expr>>, b: Vec<Expr>) -> Result<FinslerStructure> {
        let s = Self::randers_unchecked(n, a, b)?;
        s.check_randers_norm()?;
        Ok(s)
    }

    /// Randers-form structure without the ||b||_a < 1 gate; used to feed
    /// degenerate inputs to `verify_structure`, which reports rather than
    /// throws.
    pub fn randers_unchecked(
        n: usize,
        a: Vec<Vec<Expr>>,
        b: Vec<Expr>,
    ) -> Result<FinslerStructure> {
        validate_coefficients(n, &a)?;
        if b.len() != n {
            return Err(FinslerError::InvalidStructure(format!(
                "covector table must have {n} entries"
            )));
        }
        Ok(FinslerStructure {
            n,
            kind: Kind::Randers {
                a: Arc::new(a),
                b: Arc::new(b),
            },
        })
    }

    pub fn from_grid(field: Arc<dyn F2Field>) -> FinslerStructure {
        FinslerStructure {
            n: field.dim(),
            kind: Kind::Grid(field),
        }
    }

    /// Flat Euclidean structure F² = sum (y^i)².
    pub fn euclidean(n: usize) -> FinslerStructure {
        let a = identity_exprs(n);
        FinslerStructure {
            n,
            kind: Kind::Riemannian { a: Arc::new(a) },
        }
    }

    /// Constant-curvature chart a_ij = δ_ij / (1 + (k/4)|x|²)².
    pub fn sphere_chart(n: usize, k: f64) -> FinslerStructure {
        let q = Expr::sum((0..n).map(|i| Expr::coord(i).mul(Expr::coord(i)).scaled(k / 4.0)))
            .add(Expr::constant(1.0));
        let conf = q.clone().mul(q).recip();
        let mut a = zero_exprs(n);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = conf.clone();
        }
        FinslerStructure {
            n,
            kind: Kind::Riemannian { a: Arc::new(a) },
        }
    }

    /// Conformally perturbed flat metric a_ij = (1 + amp sin x¹) δ_ij.
    pub fn perturbed_flat(n: usize, amp: f64) -> FinslerStructure {
        let conf = Expr::constant(1.0).add(Expr::coord(0).sin().scaled(amp));
        let mut a = zero_exprs(n);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = conf.clone();
        }
        FinslerStructure {
            n,
            kind: Kind::Riemannian { a: Arc::new(a) },
        }
    }

    /// Flat Randers structure with constant covector b.
    pub fn randers_flat(n: usize, b: &[f64]) -> Result<FinslerStructure> {
        FinslerStructure::randers(
            n,
            identity_exprs(n),
            b.iter().map(|&c| Expr::constant(c)).collect(),
        )
    }

    /// Structure with F² scaled by tau (F scaled by sqrt(tau)).
    pub fn scaled(&self, tau: f64) -> Result<FinslerStructure> {
        if tau <= 0.0 {
            return Err(FinslerError::PositivityViolation { tau });
        }
        let kind = match &self.kind {
            Kind::Riemannian { a } => Kind::Riemannian {
                a: Arc::new(scale_exprs(a, tau)),
            },
            Kind::Randers { a, b } => Kind::Randers {
                a: Arc::new(scale_exprs(a, tau)),
                b: Arc::new(b.iter().map(|e| e.clone().scaled(tau.sqrt())).collect()),
            },
            Kind::Grid(field) => Kind::Grid(Arc::new(ScaledField {
                inner: field.clone(),
                tau,
            })),
        };
        Ok(FinslerStructure { n: self.n, kind })
    }

    /// Pullback by the base translation x -> x + c (exact, expression level).
    pub fn translated(&self, c: &[f64]) -> Result<FinslerStructure> {
        let ident: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| f64::from(i == j)).collect())
            .collect();
        self.affine_pullback(&ident, c)
    }

    /// Pullback by the lifted linear map (x, y) -> (Ax, Ay).
    pub fn linear_pullback(&self, amat: &[Vec<f64>]) -> Result<FinslerStructure> {
        self.affine_pullback(amat, &vec![0.0; self.n])
    }

    /// Pullback by (x, y) -> (Ax + c, Ay): coefficients transform tensorially,
    /// arguments affinely.
    pub fn affine_pullback(&self, amat: &[Vec<f64>], c: &[f64]) -> Result<FinslerStructure> {
        let n = self.n;
        let sub = |e: &Expr| e.substitute_affine(amat, c);
        let kind = match &self.kind {
            Kind::Riemannian { a } => Kind::Riemannian {
                a: Arc::new(tensor_pullback(a, amat, &sub)),
            },
            Kind::Randers { a, b } => {
                let b2: Vec<Expr> = (0..n)
                    .map(|i| {
                        Expr::sum((0..n).filter(|&p| amat[p][i] != 0.0).map(|p| {
                            sub(&b[p]).scaled(amat[p][i])
                        }))
                    })
                    .collect();
                Kind::Randers {
                    a: Arc::new(tensor_pullback(a, amat, &sub)),
                    b: Arc::new(b2),
                }
            }
            Kind::Grid(_) => {
                return Err(FinslerError::InvalidStructure(
                    "affine pullback of grid-backed structures is not supported".into(),
                ))
            }
        };
        Ok(FinslerStructure { n, kind })
    }

    /// Jet of F² in the 2n variables (x, y) at p, over any evaluation scalar.
    pub fn f2_jet_in<S: EvalScalar>(&self, p: &PointTM, order: usize) -> Result<Jet<S>> {
        check_point(p, self.n)?;
        let n = self.n;
        match &self.kind {
            Kind::Grid(field) => S::grid_jet(field.as_ref(), p, order),
            Kind::Riemannian { a } => {
                let (x, y) = coordinate_jets::<S>(p, order)?;
                let proto = Scalar::lift(&x[0], 0.0);
                let mut f2 = proto.clone();
                for i in 0..n {
                    for j in i..n {
                        let w = if i == j { 1.0 } else { 2.0 };
                        let aij = a[i][j].eval(&x, &proto);
                        let term = aij.mul(&y[i])?.mul(&y[j])?;
                        f2 = f2.add(&term.scale(w))?;
                    }
                }
                Ok(f2)
            }
            Kind::Randers { a, b } => {
                let (x, y) = coordinate_jets::<S>(p, order)?;
                let proto = Scalar::lift(&x[0], 0.0);
                let mut alpha2 = proto.clone();
                for i in 0..n {
                    for j in i..n {
                        let w = if i == j { 1.0 } else { 2.0 };
                        let aij = a[i][j].eval(&x, &proto);
                        alpha2 = alpha2.add(&aij.mul(&y[i])?.mul(&y[j])?.scale(w))?;
                    }
                }
                let mut f = Jet::sqrt(&alpha2);
                for i in 0..n {
                    f = f.add(&b[i].eval(&x, &proto).mul(&y[i])?)?;
                }
                f.mul(&f)
            }
        }
    }

    pub fn f2_jet(&self, p: &PointTM, order: usize) -> Result<Jet<f64>> {
        self.f2_jet_in::<f64>(p, order)
    }

    pub fn f2(&self, p: &PointTM) -> Result<f64> {
        Ok(*self.f2_jet_in::<f64>(p, 0)?.value())
    }

    /// Fiber profile θ -> F²(x, y(θ)) when the backing representation has a
    /// fast path (grid-backed structures).
    pub fn fiber_profile(&self, x: [f64; 2]) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match &self.kind {
            Kind::Grid(field) => field.fiber_profile(x),
            _ => None,
        }
    }

    pub fn norm(&self, p: &PointTM) -> Result<f64> {
        let f2 = self.f2(p)?;
        if f2 <= 0.0 {
            return Err(FinslerError::StructuralDegeneracy {
                min_eig: f2,
                location: None,
            });
        }
        Ok(f2.sqrt())
    }

    fn check_convexity_by_sampling(&self) -> Result<()> {
        let mut s = PointSampler::new(self.n, DEFAULT_SEED);
        for _ in 0..16 {
            let p = s.point();
            fundamental_tensor(self, &p)?;
        }
        Ok(())
    }

    fn check_randers_norm(&self) -> Result<()> {
        let Kind::Randers { a, b } = &self.kind else {
            unreachable!()
        };
        let mut s = PointSampler::new(self.n, DEFAULT_SEED);
        for _ in 0..32 {
            let p = s.point();
            let amat: Vec<Vec<f64>> = a
                .iter()
                .map(|row| row.iter().map(|e| e.eval_f64(&p.x)).collect())
                .collect();
            let ainv = linalg::invert(&amat)?;
            let bv: Vec<f64> = b.iter().map(|e| e.eval_f64(&p.x)).collect();
            let mut norm2 = 0.0;
            for i in 0..self.n {
                for j in 0..self.n {
                    norm2 += ainv[i][j] * bv[i] * bv[j];
                }
            }
            if !(norm2 < 1.0) {
                return Err(FinslerError::InvalidStructure(format!(
                    "Randers covector norm ||b||_a = {:.6} >= 1 at x = {:?}",
                    norm2.sqrt(),
                    p.x
                )));
            }
        }
        Ok(())
    }
}

fn identity_exprs(n: usize) -> Vec<Vec<Expr>> {
    let mut a = zero_exprs(n);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = Expr::constant(1.0);
    }
    a
}

fn zero_exprs(n: usize) -> Vec<Vec<Expr>> {
    vec![vec![Expr::constant(0.0); n]; n]
}

fn scale_exprs(a: &[Vec<Expr>], tau: f64) -> Vec<Vec<Expr>> {
    a.iter()
        .map(|row| row.iter().map(|e| e.clone().scaled(tau)).collect())
        .collect()
}

fn tensor_pullback(
    a: &[Vec<Expr>],
    amat: &[Vec<f64>],
    sub: &impl Fn(&Expr) -> Expr,
) -> Vec<Vec<Expr>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    Expr::sum((0..n).flat_map(|p| {
                        (0..n).filter_map(move |q| {
                            let w = amat[p][i] * amat[q][j];
                            (w != 0.0).then_some((p, q, w))
                        })
                    })
                    .map(|(p, q, w)| sub(&a[p][q]).scaled(w)))
                })
                .collect()
        })
        .collect()
}

/// Coordinate seed jets in the 2n inner variables over scalar S.
pub(crate) fn coordinate_jets<S: EvalScalar>(
    p: &PointTM,
    order: usize,
) -> Result<(Vec<Jet<S>>, Vec<Jet<S>>)> {
    let n = p.x.len();
    let m = 2 * n;
    let x = (0..n)
        .map(|i| Jet::seed(i, S::lift_x(p.x[i], n), m, order))
        .collect::<Result<Vec<_>>>()?;
    let y = (0..n)
        .map(|i| Jet::seed(n + i, S::lift_y(p.y[i], i, n), m, order))
        .collect::<Result<Vec<_>>>()?;
    Ok((x, y))
}

struct ScaledField {
    inner: Arc<dyn F2Field>,
    tau: f64,
}

impl F2Field for ScaledField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn f2_jet(&self, p: &PointTM, order: usize) -> Result<Jet<f64>> {
        Ok(self.inner.f2_jet(p, order)?.scale(self.tau))
    }
    fn f2_jet_nested(&self, p: &PointTM, order: usize) -> Result<Jet<Jet<f64>>> {
        Ok(self.inner.f2_jet_nested(p, order)?.scale(self.tau))
    }
}

/// Pointwise metric data: F, fundamental tensor, its inverse, Cartan tensor.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub f: f64,
    pub g: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub cartan: Vec<Vec<Vec<f64>>>,
}

/// g_ij = ½ ∂²F²/∂y^i∂y^j with inverse and Cartan components; fails with the
/// offending eigenvalue when g is not positive definite.
pub fn fundamental_tensor(s: &FinslerStructure, p: &PointTM) -> Result<MetricData> {
    let n = s.dim();
    let jet = s.f2_jet(p, 3)?;
    let f2 = *jet.value();
    if !f2.is_finite() || f2 <= 0.0 {
        return Err(FinslerError::StructuralDegeneracy {
            min_eig: f2,
            location: None,
        });
    }
    let g = metric_from_jet(&jet, n)?;
    let min_eig = linalg::min_eigenvalue(&g);
    if !(min_eig > 0.0) {
        return Err(FinslerError::StructuralDegeneracy {
            min_eig,
            location: None,
        });
    }
    let g_inv = linalg::invert(&g)?;
    let cartan = cartan_from_jet(&jet, n)?;
    Ok(MetricData {
        f: f2.sqrt(),
        g,
        g_inv,
        cartan,
    })
}

pub(crate) fn metric_from_jet(jet: &Jet<f64>, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut idx = MultiIndex::zero(2 * n);
            idx = idx.plus(n + i).plus(n + j);
            let v = 0.5 * jet.partial(&idx)?;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}

fn cartan_from_jet(jet: &Jet<f64>, n: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut c = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = MultiIndex::zero(2 * n)
                    .plus(n + i)
                    .plus(n + j)
                    .plus(n + k);
                c[i][j][k] = 0.5 * jet.partial(&idx)?;
            }
        }
    }
    Ok(c)
}

/// Cartan tensor C_ijk = ∂g_ij/∂y^k (the source convention, no extra ½).
pub fn cartan_tensor(s: &FinslerStructure, p: &PointTM) -> Result<Vec<Vec<Vec<f64>>>> {
    Ok(fundamental_tensor(s, p)?.cartan)
}

/// Aggregate validity report over seeded random samples.
#[derive(Clone, Debug)]
pub struct ValidityReport {
    pub samples: usize,
    pub seed: u64,
    /// max |F(x, 2y) - 2 F(x, y)|
    pub homogeneity: f64,
    /// max |y^i ∂F/∂y^i - F|
    pub euler_f: f64,
    /// max |g_ij y^i y^j - F²|
    pub euler_g: f64,
    /// min over samples of the smallest eigenvalue of g
    pub min_eig: f64,
    /// max |C_ijk - C_jik| and |C_ijk - C_ikj|
    pub cartan_symmetry: f64,
    pub pass: bool,
}

pub fn verify_structure(s: &FinslerStructure, samples: usize) -> Result<ValidityReport> {
    verify_structure_seeded(s, samples, DEFAULT_SEED)
}

pub fn verify_structure_seeded(
    s: &FinslerStructure,
    samples: usize,
    seed: u64,
) -> Result<ValidityReport> {
    if samples == 0 {
        return Err(FinslerError::InvalidConfig(
            "verification needs at least one sample".into(),
        ));
    }
    let n = s.dim();
    let mut sampler = PointSampler::new(n, seed);
    let mut rep = ValidityReport {
        samples,
        seed,
        homogeneity: 0.0,
        euler_f: 0.0,
        euler_g: 0.0,
        min_eig: f64::INFINITY,
        cartan_symmetry: 0.0,
        pass: false,
    };
    for _ in 0..samples {
        let p = sampler.point();
        let jet = s.f2_jet(&p, 3)?;
        let f2 = *jet.value();
        let f = f2.max(0.0).sqrt();

        let p2 = PointTM::new(p.x.clone(), p.y.iter().map(|v| 2.0 * v).collect());
        let f2scaled = s.f2(&p2)?;
        let fs = f2scaled.max(0.0).sqrt();
        rep.homogeneity = rep.homogeneity.max((fs - 2.0 * f).abs());

        // y^i ∂F/∂y^i with ∂F/∂y^i = ∂F²/∂y^i / (2F)
        let mut euler = 0.0;
        for i in 0..n {
            let d = jet.partial(&MultiIndex::unit(2 * n, n + i))?;
            euler += p.y[i] * d / (2.0 * f);
        }
        rep.euler_f = rep.euler_f.max((euler - f).abs());

        let g = metric_from_jet(&jet, n)?;
        let mut gyy = 0.0;
        for i in 0..n {
            for j in 0..n {
                gyy += g[i][j] * p.y[i] * p.y[j];
            }
        }
        rep.euler_g = rep.euler_g.max((gyy - f2).abs());
        rep.min_eig = rep.min_eig.min(linalg::min_eigenvalue(&g));

        let c = cartan_from_jet(&jet, n)?;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    rep.cartan_symmetry = rep
                        .cartan_symmetry
                        .max((c[i][j][k] - c[j][i][k]).abs())
                        .max((c[i][j][k] - c[i][k][j]).abs());
                }
            }
        }
    }
    let tol = 1e-8;
    rep.pass = rep.homogeneity < tol
        && rep.euler_f < tol
        && rep.euler_g < tol
        && rep.cartan_symmetry < tol
        && rep.min_eig > 1e-6;
    Ok(rep)
}

/// g-orthonormal frame with e_n = l = y/F; u columns are the frame vectors,
/// v rows the coframe.
#[derive(Clone, Debug)]
pub struct FrameData {
    /// u[i][a] = u^i_a, so column a is the frame vector e_a.
    pub u: Vec<Vec<f64>>,
    /// v[a][i] = v^a_i.
    pub v: Vec<Vec<f64>>,
}

pub fn orthonormal_frame(s: &FinslerStructure, p: &PointTM) -> Result<FrameData> {
    let n = s.dim();
    let md = fundamental_tensor(s, p)?;
    let g = &md.g;
    let gdot = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g[i][j] * a[i] * b[j];
            }
        }
        acc
    };
    let l: Vec<f64> = p.y.iter().map(|v| v / md.f).collect();
    let mut accepted: Vec<Vec<f64>> = vec![l.clone()];
    for i in 0..n {
        if accepted.len() == n {
            break;
        }
        let mut w: Vec<f64> = (0..n).map(|k| f64::from(k == i)).collect();
        for e in &accepted {
            let c = gdot(&w, e);
            for k in 0..n {
                w[k] -= c * e[k];
            }
        }
        let norm = gdot(&w, &w).max(0.0).sqrt();
        if norm < 1e-10 {
            continue;
        }
        accepted.push(w.iter().map(|v| v / norm).collect());
    }
    if accepted.len() < n {
        return Err(FinslerError::StructuralDegeneracy {
            min_eig: 0.0,
            location: Some("frame construction".into()),
        });
    }
    // complement first, l = e_n last
    let mut u = vec![vec![0.0; n]; n];
    for a in 0..n {
        let src = if a + 1 == n { &accepted[0] } else { &accepted[a + 1] };
        for i in 0..n {
            u[i][a] = src[i];
        }
    }
    let mut v = vec![vec![0.0; n]; n];
    for a in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += g[i][j] * u[j][a];
            }
            v[a][i] = acc;
        }
    }
    Ok(FrameData { u, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_metric_is_identity() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.3, -0.7], vec![0.8, 0.6]);
        let md = fundamental_tensor(&s, &p).unwrap();
        assert!((md.f - 1.0).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                let want = f64::from(i == j);
                assert!((md.g[i][j] - want).abs() < 1e-14);
                for k in 0..2 {
                    assert!(md.cartan[i][j][k].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn constant_riemannian_reduces_to_a() {
        let a = vec![
            vec![Expr::constant(2.0), Expr::constant(0.0)],
            vec![Expr::constant(0.0), Expr::constant(1.0)],
        ];
        let s = FinslerStructure::riemannian(2, a).unwrap();
        let p = PointTM::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let md = fundamental_tensor(&s, &p).unwrap();
        assert!((md.g[0][0] - 2.0).abs() < 1e-14);
        assert!((md.g[1][1] - 1.0).abs() < 1e-14);
        assert!((md.f * md.f - 3.0).abs() < 1e-13);
    }

    #[test]
    fn randers_cartan_contracts_to_zero() {
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
        for y in [vec![0.0, 1.0], vec![1.0, 2.0], vec![-0.4, 0.9]] {
            let p = PointTM::new(vec![0.1, 0.2], y.clone());
            let c = cartan_tensor(&s, &p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..2 {
                        acc += c[i][j][k] * y[k];
                    }
                    assert!(acc.abs() < 1e-10, "C_ij. y = {acc}");
                }
            }
        }
    }

    #[test]
    fn verify_euclidean_passes_exactly() {
        let s = FinslerStructure::euclidean(2);
        let rep = verify_structure(&s, 50).unwrap();
        assert!(rep.pass);
        assert!(rep.homogeneity < 1e-12);
        assert!(rep.euler_g < 1e-12);
        assert!((rep.min_eig - 1.0).abs() < 1e-12);
    }

    #[test]
    fn verify_reports_wide_randers_failure() {
        let s = FinslerStructure::randers_unchecked(
            2,
            identity_exprs(2),
            vec![Expr::constant(1.2), Expr::constant(0.0)],
        )
        .unwrap();
        let rep = verify_structure(&s, 200).unwrap();
        assert!(!rep.pass);
        assert!(rep.min_eig <= 1e-6, "min_eig = {}", rep.min_eig);
    }

    #[test]
    fn randers_constructor_rejects_wide_covector() {
        let got = FinslerStructure::randers_flat(2, &[1.2, 0.0]);
        assert!(got.is_err());
    }

    #[test]
    fn frame_euclidean_axis_fiber() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let fr = orthonormal_frame(&s, &p).unwrap();
        // e_2 = l = (1, 0); e_1 = (0, 1) up to sign
        assert!((fr.u[0][1] - 1.0).abs() < 1e-14);
        assert!(fr.u[1][1].abs() < 1e-14);
        assert!(fr.u[0][0].abs() < 1e-14);
        assert!((fr.u[1][0].abs() - 1.0).abs() < 1e-14);
        // coframe row n equals dF/dy = (1, 0)
        assert!((fr.v[1][0] - 1.0).abs() < 1e-14);
        assert!(fr.v[1][1].abs() < 1e-14);
    }

    #[test]
    fn scaled_structure_scales_f2() {
        let s = FinslerStructure::sphere_chart(2, 1.0);
        let p = PointTM::new(vec![0.2, -0.1], vec![0.5, 1.0]);
        let f2 = s.f2(&p).unwrap();
        let s2 = s.scaled(0.7).unwrap();
        assert!((s2.f2(&p).unwrap() - 0.7 * f2).abs() < 1e-13);
        assert!(s.scaled(0.0).is_err());
    }

    #[test]
    fn translated_structure_shifts_coefficients() {
        let s = FinslerStructure::perturbed_flat(2, 0.05);
        let t = s.translated(&[0.4, 0.0]).unwrap();
        let p = PointTM::new(vec![0.1, 0.2], vec![0.7, -0.3]);
        let q = PointTM::new(vec![0.5, 0.2], vec![0.7, -0.3]);
        assert!((t.f2(&p).unwrap() - s.f2(&q).unwrap()).abs() < 1e-14);
    }
}
