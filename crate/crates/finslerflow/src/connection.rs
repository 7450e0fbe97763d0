//! Spray coefficients, nonlinear connection, formal Christoffel symbols,
//! Chern connection coefficients, and horizontal covariant derivatives.
//!
//! Everything is assembled from one order-4 jet of F² per point, following
//! the dependency chain g -> G -> N -> delta-derivatives -> Γ. The pipeline
//! is generic over the evaluation scalar so it can run inside an outer jet.

use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, Scalar};
use crate::linalg;
use crate::structure::{check_point, EvalScalar, FinslerStructure, PointTM};

/// Connection quantities evaluated at one point.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    /// Formal Christoffel symbols γ^i_jk.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// Spray coefficients G^i.
    pub spray: Vec<f64>,
    /// Nonlinear connection N^i_j.
    pub nonlinear: Vec<Vec<f64>>,
    /// Chern connection coefficients Γ^i_jk.
    pub chern: Vec<Vec<Vec<f64>>>,
}

/// Jet-valued connection pipeline state at one point.
pub(crate) struct ConnJets<S: Scalar> {
    pub n: usize,
    /// Order-4 jet of F² in the 2n variables.
    pub f2: Jet<S>,
    /// Fiber coordinate values.
    pub y: Vec<S>,
    /// Fundamental tensor, order 2.
    pub g: Vec<Vec<Jet<S>>>,
    /// Inverse metric, order 2.
    pub g_inv: Vec<Vec<Jet<S>>>,
    /// Spray coefficients, order 2.
    pub spray: Vec<Jet<S>>,
    /// Nonlinear connection, order 1.
    pub nonlinear: Vec<Vec<Jet<S>>>,
    /// Chern coefficients, order 1.
    pub chern: Vec<Vec<Vec<Jet<S>>>>,
}

/// Gauss-Jordan inverse over the jet ring, pivoting on leading values.
pub(crate) fn invert_jet_matrix<S: Scalar>(m: &[Vec<Jet<S>>]) -> Result<Vec<Vec<Jet<S>>>> {
    let n = m.len();
    let mut a: Vec<Vec<Jet<S>>> = m.to_vec();
    let zero = a[0][0].scale(0.0);
    let mut inv: Vec<Vec<Jet<S>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut z = zero.clone();
                    if i == j {
                        let v = z.value().lift(1.0);
                        z.coeffs_mut()[0] = v;
                    }
                    z
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .value()
                    .abs()
                    .total_cmp(&a[j][col].value().value().abs())
            })
            .unwrap();
        if a[pivot][col].value().value().abs() < 1e-300 {
            return Err(FinslerError::StructuralDegeneracy {
                min_eig: 0.0,
                location: None,
            });
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col].recip();
        for j in 0..n {
            a[col][j] = a[col][j].mul(&d)?;
            inv[col][j] = inv[col][j].mul(&d)?;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..n {
                a[i][j] = a[i][j].sub(&f.mul(&a[col][j])?)?;
                inv[i][j] = inv[i][j].sub(&f.mul(&inv[col][j])?)?;
            }
        }
    }
    Ok(inv)
}

/// δ/δx^k as jet post-processing: x-partial minus N-weighted y-partials.
pub(crate) fn delta_derivative<S: Scalar>(
    q: &Jet<S>,
    nonlinear: &[Vec<Jet<S>>],
    k: usize,
    n: usize,
) -> Result<Jet<S>> {
    let t = (q.order() - 1).min(1);
    let mut out = q.derivative(k)?.truncated(t)?;
    for (j, row) in nonlinear.iter().enumerate() {
        let corr = row[k]
            .truncated(t)?
            .mul(&q.derivative(n + j)?.truncated(t)?)?;
        out = out.sub(&corr)?;
    }
    Ok(out)
}

pub(crate) fn conn_jets<S: EvalScalar>(s: &FinslerStructure, p: &PointTM) -> Result<ConnJets<S>> {
    check_point(p, s.dim())?;
    let n = s.dim();
    let m = 2 * n;
    let f2 = s.f2_jet_in::<S>(p, 4)?;
    let y: Vec<S> = (0..n).map(|i| S::lift_y(p.y[i], i, n)).collect();

    // g_ij = ½ ∂²F²/∂y^i ∂y^j, exact to order 2
    let mut g: Vec<Vec<Jet<S>>> = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let gij = f2.derivative(n + i)?.derivative(n + j)?.scale(0.5);
            g[i].push(gij);
        }
    }

    // positive definiteness at the point
    let gval: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| g[i][j].value().value()).collect())
        .collect();
    let min_eig = linalg::min_eigenvalue(&gval);
    if !(min_eig > 0.0) {
        return Err(FinslerError::StructuralDegeneracy {
            min_eig,
            location: None,
        });
    }
    let g_inv = invert_jet_matrix(&g)?;

    // G^i = ¼ g^{ih} (∂²F²/∂y^h∂x^j y^j − ∂F²/∂x^h)
    let y_seeds: Vec<Jet<S>> = (0..n)
        .map(|j| Jet::seed(n + j, y[j].clone(), m, 2))
        .collect::<Result<Vec<_>>>()?;
    let mut t_cov: Vec<Jet<S>> = Vec::with_capacity(n);
    for h in 0..n {
        let mut t = f2.derivative(h)?.truncated(2)?.neg();
        for (j, ys) in y_seeds.iter().enumerate() {
            let mixed = f2.derivative(n + h)?.derivative(j)?;
            t = t.add(&mixed.mul(ys)?)?;
        }
        t_cov.push(t);
    }
    let mut spray: Vec<Jet<S>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut gi = t_cov[0].scale(0.0);
        for h in 0..n {
            gi = gi.add(&g_inv[i][h].mul(&t_cov[h])?)?;
        }
        spray.push(gi.scale(0.25));
    }

    // N^i_j = ½ ∂G^i/∂y^j
    let nonlinear: Vec<Vec<Jet<S>>> = spray
        .iter()
        .map(|gi| {
            (0..n)
                .map(|j| Ok(gi.derivative(n + j)?.scale(0.5)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // Γ^i_jk = ½ g^{ih} (δ_j g_hk + δ_k g_jh − δ_h g_jk)
    let mut dg: Vec<Vec<Vec<Option<Jet<S>>>>> = vec![vec![vec![None; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let d = delta_derivative(&g[i][j], &nonlinear, k, n)?;
                dg[k][i][j] = Some(d.clone());
                dg[k][j][i] = Some(d);
            }
        }
    }
    let dgf = |k: usize, i: usize, j: usize| -> &Jet<S> { dg[k][i][j].as_ref().unwrap() };
    let mut chern = vec![vec![Vec::with_capacity(n); n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = g[0][0].scale(0.0).truncated(1)?;
                for h in 0..n {
                    let sym = dgf(j, h, k).add(dgf(k, j, h))?.sub(dgf(h, j, k))?;
                    acc = acc.add(&g_inv[i][h].truncated(1)?.mul(&sym)?)?;
                }
                chern[i][j].push(acc.scale(0.5));
            }
        }
    }

    Ok(ConnJets {
        n,
        f2,
        y,
        g,
        g_inv,
        spray,
        nonlinear,
        chern,
    })
}

/// Formal Christoffel symbols γ^i_jk from plain x-partials of g.
pub(crate) fn gamma_jets<S: Scalar>(cj: &ConnJets<S>) -> Result<Vec<Vec<Vec<Jet<S>>>>> {
    let n = cj.n;
    let mut gamma = vec![vec![Vec::with_capacity(n); n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = cj.g[0][0].scale(0.0).truncated(1)?;
                for h in 0..n {
                    let sym = cj.g[h][k]
                        .derivative(j)?
                        .add(&cj.g[j][h].derivative(k)?)?
                        .sub(&cj.g[j][k].derivative(h)?)?;
                    acc = acc.add(&cj.g_inv[i][h].truncated(1)?.mul(&sym)?)?;
                }
                gamma[i][j].push(acc.scale(0.5));
            }
        }
    }
    Ok(gamma)
}

/// All four connection tensors at one point.
pub fn connection_data(s: &FinslerStructure, p: &PointTM) -> Result<ConnectionData> {
    let cj = conn_jets::<f64>(s, p)?;
    let gamma = gamma_jets(&cj)?;
    let n = cj.n;
    let val3 = |t: &Vec<Vec<Vec<Jet<f64>>>>| -> Vec<Vec<Vec<f64>>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| *t[i][j][k].value()).collect())
                    .collect()
            })
            .collect()
    };
    Ok(ConnectionData {
        gamma: val3(&gamma),
        spray: cj.spray.iter().map(|g| *g.value()).collect(),
        nonlinear: cj
            .nonlinear
            .iter()
            .map(|row| row.iter().map(|x| *x.value()).collect())
            .collect(),
        chern: val3(&cj.chern),
    })
}

/// Field whose horizontal covariant derivative is requested. Expression
/// components may depend on all 2n coordinates (x first, then y).
pub enum TensorField {
    Covector(Vec<Expr>),
    Tensor02(Vec<Vec<Expr>>),
    /// The structure's own fundamental tensor.
    Metric,
}

/// Horizontal covariant derivative, one extra lower index in front.
pub enum CovDerivative {
    /// [l][i] = ∇_l w_i
    Covector(Vec<Vec<f64>>),
    /// [l][j][k] = ∇_l S_jk
    Tensor02(Vec<Vec<Vec<f64>>>),
}

fn field_jets(comps: &[Expr], p: &PointTM, n: usize) -> Result<Vec<Jet<f64>>> {
    for e in comps {
        if let Some(m) = e.max_coord() {
            if m >= 2 * n {
                return Err(FinslerError::InvalidStructure(format!(
                    "field expression references coordinate {m}, bundle has {}",
                    2 * n
                )));
            }
        }
    }
    let (x, y) = crate::structure::coordinate_jets::<f64>(p, 1)?;
    let coords: Vec<Jet<f64>> = x.into_iter().chain(y).collect();
    let proto = Scalar::lift(&coords[0], 0.0);
    Ok(comps.iter().map(|e| e.eval(&coords, &proto)).collect())
}

pub fn horizontal_covariant_derivative(
    field: &TensorField,
    s: &FinslerStructure,
    p: &PointTM,
) -> Result<CovDerivative> {
    let cj = conn_jets::<f64>(s, p)?;
    let n = cj.n;
    let nval: Vec<Vec<f64>> = cj
        .nonlinear
        .iter()
        .map(|row| row.iter().map(|x| *x.value()).collect())
        .collect();
    let cval = |i: usize, j: usize, k: usize| *cj.chern[i][j][k].value();
    let delta_val = |w: &Jet<f64>, l: usize| -> Result<f64> {
        let mut d = *w.derivative(l)?.value();
        for j in 0..n {
            d -= nval[j][l] * w.derivative(n + j)?.value();
        }
        Ok(d)
    };
    match field {
        TensorField::Covector(comps) => {
            if comps.len() != n {
                return Err(FinslerError::InvalidStructure(format!(
                    "covector field needs {n} components"
                )));
            }
            let w = field_jets(comps, p, n)?;
            let mut out = vec![vec![0.0; n]; n];
            for l in 0..n {
                for i in 0..n {
                    let mut v = delta_val(&w[i], l)?;
                    for sdx in 0..n {
                        v -= w[sdx].value() * cval(sdx, i, l);
                    }
                    out[l][i] = v;
                }
            }
            Ok(CovDerivative::Covector(out))
        }
        TensorField::Tensor02(comps) => {
            if comps.len() != n || comps.iter().any(|r| r.len() != n) {
                return Err(FinslerError::InvalidStructure(format!(
                    "(0,2) tensor field needs {n}x{n} components"
                )));
            }
            let flat: Vec<Expr> = comps.iter().flatten().cloned().collect();
            let w = field_jets(&flat, p, n)?;
            let wj = |j: usize, k: usize| &w[j * n + k];
            let mut out = vec![vec![vec![0.0; n]; n]; n];
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = delta_val(wj(j, k), l)?;
                        for sdx in 0..n {
                            v -= wj(sdx, k).value() * cval(sdx, j, l);
                            v -= wj(j, sdx).value() * cval(sdx, k, l);
                        }
                        out[l][j][k] = v;
                    }
                }
            }
            Ok(CovDerivative::Tensor02(out))
        }
        TensorField::Metric => {
            let mut out = vec![vec![vec![0.0; n]; n]; n];
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = *delta_derivative(&cj.g[j][k], &cj.nonlinear, l, n)?.value();
                        for sdx in 0..n {
                            v -= cj.g[sdx][k].value() * cval(sdx, j, l);
                            v -= cj.g[j][sdx].value() * cval(sdx, k, l);
                        }
                        out[l][j][k] = v;
                    }
                }
            }
            Ok(CovDerivative::Tensor02(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::PointSampler;

    fn max_abs3(t: &[Vec<Vec<f64>>]) -> f64 {
        t.iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn flat_structures_have_vanishing_connection() {
        for s in [
            FinslerStructure::euclidean(2),
            FinslerStructure::riemannian(
                2,
                vec![
                    vec![Expr::constant(2.0), Expr::constant(0.3)],
                    vec![Expr::constant(0.3), Expr::constant(1.0)],
                ],
            )
            .unwrap(),
        ] {
            let p = PointTM::new(vec![0.4, -0.2], vec![0.9, 0.5]);
            let cd = connection_data(&s, &p).unwrap();
            assert!(max_abs3(&cd.gamma) < 1e-13);
            assert!(cd.spray.iter().all(|v| v.abs() < 1e-13));
            assert!(cd.nonlinear.iter().flatten().all(|v| v.abs() < 1e-13));
            assert!(max_abs3(&cd.chern) < 1e-13);
        }
    }

    #[test]
    fn sin_metric_christoffel_value() {
        // a = diag(1 + ½ sin x¹, 1): γ¹₁₁ = ½ a^{11} ∂₁ a₁₁ = 0.25 at x = 0
        let a = vec![
            vec![
                Expr::constant(1.0).add(Expr::coord(0).sin().scaled(0.5)),
                Expr::constant(0.0),
            ],
            vec![Expr::constant(0.0), Expr::constant(1.0)],
        ];
        let s = FinslerStructure::riemannian(2, a).unwrap();
        for y in [vec![1.0, 0.0], vec![0.3, 0.8], vec![-1.0, 0.4]] {
            let p = PointTM::new(vec![0.0, 0.0], y);
            let cd = connection_data(&s, &p).unwrap();
            assert!(
                (cd.gamma[0][0][0] - 0.25).abs() < 1e-12,
                "gamma^1_11 = {}",
                cd.gamma[0][0][0]
            );
        }
    }

    #[test]
    fn nonlinear_connection_contracts_chern() {
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
        let mut sampler = PointSampler::new(2, 7);
        for _ in 0..20 {
            let p = sampler.point();
            let cd = connection_data(&s, &p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..2 {
                        acc += cd.chern[i][j][k] * p.y[k];
                    }
                    assert!(
                        (cd.nonlinear[i][j] - acc).abs() < 1e-8,
                        "N - Gamma.y = {}",
                        cd.nonlinear[i][j] - acc
                    );
                }
            }
        }
    }

    #[test]
    fn spray_and_nonlinear_homogeneity() {
        let s = FinslerStructure::randers_flat(2, &[0.2, 0.1]).unwrap();
        let mut sampler = PointSampler::new(2, 11);
        for _ in 0..10 {
            let p = sampler.point();
            let p2 = PointTM::new(p.x.clone(), p.y.iter().map(|v| 2.0 * v).collect());
            let cd = connection_data(&s, &p).unwrap();
            let cd2 = connection_data(&s, &p2).unwrap();
            for i in 0..2 {
                assert!((cd2.spray[i] - 4.0 * cd.spray[i]).abs() < 1e-9);
                for j in 0..2 {
                    assert!((cd2.nonlinear[i][j] - 2.0 * cd.nonlinear[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn riemannian_chern_equals_christoffel() {
        let s = FinslerStructure::perturbed_flat(2, 0.3);
        let mut sampler = PointSampler::new(2, 3);
        for _ in 0..10 {
            let p = sampler.point();
            let cd = connection_data(&s, &p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        assert!(
                            (cd.chern[i][j][k] - cd.gamma[i][j][k]).abs() < 1e-10,
                            "Chern vs Levi-Civita mismatch"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn metric_compatibility_small_sample() {
        for s in [
            FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap(),
            FinslerStructure::perturbed_flat(2, 0.4),
            FinslerStructure::sphere_chart(2, 1.0),
        ] {
            let mut sampler = PointSampler::new(2, 5);
            for _ in 0..10 {
                let p = sampler.point();
                let CovDerivative::Tensor02(nabla) =
                    horizontal_covariant_derivative(&TensorField::Metric, &s, &p).unwrap()
                else {
                    panic!("metric derivative is a (0,2) tensor")
                };
                assert!(max_abs3(&nabla) < 1e-8, "grad g = {}", max_abs3(&nabla));
            }
        }
    }

    #[test]
    fn flat_constant_covector_is_parallel() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.1, 0.7], vec![0.5, -0.2]);
        let field = TensorField::Covector(vec![Expr::constant(0.4), Expr::constant(-1.1)]);
        let CovDerivative::Covector(nabla) =
            horizontal_covariant_derivative(&field, &s, &p).unwrap()
        else {
            panic!("covector derivative shape")
        };
        assert!(nabla.iter().flatten().all(|v| v.abs() < 1e-14));
    }
}
