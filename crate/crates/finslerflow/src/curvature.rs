//! Chern hh-curvature, reduced curvature, Ricci scalar and tensor, flag
//! curvature, and isotropy diagnostics.
//!
//! Two independent routes to curvature are kept side by side: the hh-tensor
//! from delta-derivatives of the Chern coefficients, and the reduced tensor
//! built purely from spray derivatives. Their agreement is a standing
//! cross-check. The Ricci tensor is the fiber Hessian of ½F²·Ric, obtained by
//! running the whole pipeline in outer-jet arithmetic over the y-offsets
//! rather than by a hand-derived expansion.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::connection::{conn_jets, ConnJets};
use crate::error::{FinslerError, Result};
use crate::jet::{Jet, MultiIndex, Scalar};
use crate::sampling::DEFAULT_SEED;
use crate::structure::{FinslerStructure, PointTM};

/// Full curvature stack at one point.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    /// hh-curvature R_j{}^i{}_kl indexed [j][i][k][l].
    pub hh: Vec<Vec<Vec<Vec<f64>>>>,
    /// Reduced curvature R^i_k.
    pub reduced: Vec<Vec<f64>>,
    pub ric_scalar: f64,
    pub ric_tensor: Vec<Vec<f64>>,
}

/// hh-curvature values from the connection jets:
/// R_j{}^i{}_kl = δ_k Γ^i_jl − δ_l Γ^i_jk + Γ^i_hk Γ^h_jl − Γ^i_hl Γ^h_jk.
pub(crate) fn hh_values<S: Scalar>(cj: &ConnJets<S>) -> Result<Vec<Vec<Vec<Vec<S>>>>> {
    let n = cj.n;
    let m = 2 * n;
    let nval: Vec<Vec<S>> = cj
        .nonlinear
        .iter()
        .map(|row| row.iter().map(|x| x.value().clone()).collect())
        .collect();
    // δ_k Γ^i_jl at the point
    let dgam = |i: usize, j: usize, l: usize, k: usize| -> Result<S> {
        let jet = &cj.chern[i][j][l];
        let mut d = jet.partial(&MultiIndex::unit(m, k))?;
        for t in 0..n {
            let dy = jet.partial(&MultiIndex::unit(m, n + t))?;
            d = d.sub(&nval[t][k].mul(&dy));
        }
        Ok(d)
    };
    let gval = |i: usize, j: usize, k: usize| cj.chern[i][j][k].value().clone();
    let mut hh = vec![vec![vec![vec![cj.y[0].lift(0.0); n]; n]; n]; n];
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = dgam(i, j, l, k)?.sub(&dgam(i, j, k, l)?);
                    for h in 0..n {
                        r = r.add(&gval(i, h, k).mul(&gval(h, j, l)));
                        r = r.sub(&gval(i, h, l).mul(&gval(h, j, k)));
                    }
                    hh[j][i][k][l] = r;
                }
            }
        }
    }
    Ok(hh)
}

/// Reduced curvature from spray derivatives:
/// R^i_k = (1/F²)(2 ∂G^i/∂x^k − y^j ∂²G^i/∂x^j∂y^k + 2 G^j ∂²G^i/∂y^j∂y^k
///         − ∂G^i/∂y^j ∂G^j/∂y^k).
pub(crate) fn reduced_values<S: Scalar>(cj: &ConnJets<S>) -> Result<Vec<Vec<S>>> {
    let n = cj.n;
    let m = 2 * n;
    let f2_inv = cj.f2.value().recip();
    let mut red = vec![vec![cj.y[0].lift(0.0); n]; n];
    for i in 0..n {
        let gi = &cj.spray[i];
        for k in 0..n {
            let mut acc = gi.partial(&MultiIndex::unit(m, k))?.scale(2.0);
            for j in 0..n {
                let mixed = gi.partial(&MultiIndex::unit(m, j).plus(n + k))?;
                acc = acc.sub(&cj.y[j].mul(&mixed));
                let yy = gi.partial(&MultiIndex::unit(m, n + j).plus(n + k))?;
                acc = acc.add(&cj.spray[j].value().mul(&yy).scale(2.0));
                let dgi = gi.partial(&MultiIndex::unit(m, n + j))?;
                let dgj = cj.spray[j].partial(&MultiIndex::unit(m, n + k))?;
                acc = acc.sub(&dgi.mul(&dgj));
            }
            red[i][k] = acc.mul(&f2_inv);
        }
    }
    Ok(red)
}

pub(crate) fn ricci_scalar_from<S: Scalar>(red: &[Vec<S>]) -> S {
    let mut tr = red[0][0].clone();
    for (i, row) in red.iter().enumerate().skip(1) {
        tr = tr.add(&row[i]);
    }
    tr
}

/// Chern hh-curvature tensor R_j{}^i{}_kl at one point, indexed [j][i][k][l].
pub fn hh_curvature(s: &FinslerStructure, p: &PointTM) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let cj = conn_jets::<f64>(s, p)?;
    hh_values(&cj)
}

/// Reduced hh-curvature R^i_k at one point.
pub fn reduced_curvature(s: &FinslerStructure, p: &PointTM) -> Result<Vec<Vec<f64>>> {
    let cj = conn_jets::<f64>(s, p)?;
    reduced_values(&cj)
}

#[derive(Clone, Debug)]
pub struct RicciData {
    pub scalar: f64,
    pub tensor: Vec<Vec<f64>>,
}

/// Ricci scalar (trace of the reduced curvature) and the Akbar-Zadeh Ricci
/// tensor, the y-Hessian of ½F²·Ric extracted through nested jets.
pub fn ricci(s: &FinslerStructure, p: &PointTM) -> Result<RicciData> {
    let n = s.dim();
    let cj = conn_jets::<Jet<f64>>(s, p)?;
    let red = reduced_values(&cj)?;
    let ric = ricci_scalar_from(&red);
    let phi = Scalar::mul(cj.f2.value(), &ric).scale(0.5);
    let mut tensor = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            tensor[i][j] = phi.partial(&MultiIndex::unit(n, i).plus(j))?;
        }
    }
    Ok(RicciData {
        scalar: Scalar::value(&ric),
        tensor,
    })
}

/// Ricci scalar alone (plain pipeline, no nesting).
pub fn ricci_scalar(s: &FinslerStructure, p: &PointTM) -> Result<f64> {
    let cj = conn_jets::<f64>(s, p)?;
    Ok(ricci_scalar_from(&reduced_values(&cj)?))
}

/// Flag curvature K(x, y, X) of the flag spanned by y and the transverse
/// edge X.
pub fn flag_curvature(s: &FinslerStructure, p: &PointTM, x_edge: &[f64]) -> Result<f64> {
    let cj = conn_jets::<f64>(s, p)?;
    let n = cj.n;
    let g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| *cj.g[i][j].value()).collect())
        .collect();
    let pair = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g[i][j] * a[i] * b[j];
            }
        }
        acc
    };
    let gyy = *cj.f2.value();
    let gxx = pair(x_edge, x_edge);
    let gxy = pair(x_edge, &p.y);
    let den = gxx * gyy - gxy * gxy;
    if den.abs() < 1e-12 {
        return Err(FinslerError::DegenerateFlag { denom: den });
    }
    let hh = hh_values(&cj)?;
    // g(R(X, y)y, X) with R(X, y)y^i = R_j{}^i{}_kl y^j X^k y^l
    let mut num = 0.0;
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for mm in 0..n {
                        num += g[i][mm] * hh[j][i][k][l] * p.y[j] * x_edge[k] * p.y[l] * x_edge[mm];
                    }
                }
            }
        }
    }
    Ok(num / den)
}

/// Max deviation of the flag curvature over sampled transverse edges; small
/// means isotropic at (x, y).
pub fn isotropy_check(s: &FinslerStructure, p: &PointTM, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(FinslerError::InvalidConfig(
            "isotropy check needs at least two flags".into(),
        ));
    }
    let n = s.dim();
    let mut rng = StdRng::seed_from_u64(DEFAULT_SEED);
    let mut reference: Option<f64> = None;
    let mut deviation = 0.0f64;
    let mut taken = 0;
    while taken < samples {
        let x_edge: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        match flag_curvature(s, p, &x_edge) {
            Ok(k) => {
                match reference {
                    None => reference = Some(k),
                    Some(k0) => deviation = deviation.max((k - k0).abs()),
                }
                taken += 1;
            }
            Err(FinslerError::DegenerateFlag { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(deviation)
}

/// Everything at once, for reports.
pub fn curvature_data(s: &FinslerStructure, p: &PointTM) -> Result<CurvatureData> {
    let hh = hh_curvature(s, p)?;
    let reduced = reduced_curvature(s, p)?;
    let r = ricci(s, p)?;
    Ok(CurvatureData {
        hh,
        reduced,
        ric_scalar: r.scalar,
        ric_tensor: r.tensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::PointSampler;
    use crate::structure::fundamental_tensor;

    #[test]
    fn flat_curvature_vanishes() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.3, 0.1], vec![0.7, -0.4]);
        let hh = hh_curvature(&s, &p).unwrap();
        let red = reduced_curvature(&s, &p).unwrap();
        let r = ricci(&s, &p).unwrap();
        assert!(hh
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .all(|v| v.abs() < 1e-13));
        assert!(red.iter().flatten().all(|v| v.abs() < 1e-13));
        assert!(r.scalar.abs() < 1e-13);
        assert!(r.tensor.iter().flatten().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn hh_antisymmetric_in_last_pair() {
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.1]).unwrap();
        let mut sampler = PointSampler::new(2, 17);
        for _ in 0..10 {
            let p = sampler.point();
            let hh = hh_curvature(&s, &p).unwrap();
            for j in 0..2 {
                for i in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            assert!(
                                (hh[j][i][k][l] + hh[j][i][l][k]).abs() < 1e-9,
                                "antisymmetry residual"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_chart_constant_curvature() {
        let s = FinslerStructure::sphere_chart(2, 1.0);
        let mut sampler = PointSampler::in_ball(2, 23, 1.0);
        for _ in 0..10 {
            let p = sampler.point();
            let md = fundamental_tensor(&s, &p).unwrap();
            let hh = hh_curvature(&s, &p).unwrap();
            // closed form K (δ^i_k a_jl − δ^i_l a_jk), K = 1, a = g here
            for j in 0..2 {
                for i in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            let want = f64::from(i == k) * md.g[j][l] - f64::from(i == l) * md.g[j][k];
                            assert!(
                                (hh[j][i][k][l] - want).abs() < 1e-6,
                                "hh {} vs closed form {want}",
                                hh[j][i][k][l]
                            );
                        }
                    }
                }
            }
            // R^i_k = δ^i_k − l^i l_k
            let red = reduced_curvature(&s, &p).unwrap();
            let f = md.f;
            for i in 0..2 {
                for k in 0..2 {
                    let mut lk = 0.0;
                    for j in 0..2 {
                        lk += md.g[k][j] * p.y[j] / f;
                    }
                    let want = f64::from(i == k) - p.y[i] / f * lk;
                    assert!((red[i][k] - want).abs() < 1e-6);
                }
            }
            let r = ricci(&s, &p).unwrap();
            assert!((r.scalar - 1.0).abs() < 1e-6, "Ric = {}", r.scalar);
        }
    }

    #[test]
    fn reduced_matches_hh_contraction() {
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
        let mut sampler = PointSampler::new(2, 29);
        for _ in 0..25 {
            let p = sampler.point();
            let cj = conn_jets::<f64>(&s, &p).unwrap();
            let hh = hh_values(&cj).unwrap();
            let red = reduced_values(&cj).unwrap();
            let f2 = *cj.f2.value();
            for i in 0..2 {
                for k in 0..2 {
                    let mut acc = 0.0;
                    for j in 0..2 {
                        for m in 0..2 {
                            acc += p.y[j] * hh[j][i][k][m] * p.y[m];
                        }
                    }
                    acc /= f2;
                    let scale = red[i][k].abs().max(1.0);
                    assert!(
                        (red[i][k] - acc).abs() / scale < 1e-6,
                        "route mismatch {} vs {acc}",
                        red[i][k]
                    );
                }
            }
        }
    }

    #[test]
    fn ricci_tensor_contraction_and_symmetry() {
        let s = FinslerStructure::randers_flat(2, &[0.25, 0.1]).unwrap();
        let mut sampler = PointSampler::new(2, 31);
        for _ in 0..10 {
            let p = sampler.point();
            let r = ricci(&s, &p).unwrap();
            let f2 = s.f2(&p).unwrap();
            let mut yy = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    yy += r.tensor[i][j] * p.y[i] * p.y[j];
                    assert!((r.tensor[i][j] - r.tensor[j][i]).abs() < 1e-10);
                }
            }
            assert!(
                (yy - f2 * r.scalar).abs() < 1e-8,
                "Euler contraction residual {}",
                yy - f2 * r.scalar
            );
        }
    }

    #[test]
    fn reduced_curvature_zero_homogeneous() {
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
        let mut sampler = PointSampler::new(2, 37);
        for _ in 0..10 {
            let p = sampler.point();
            let p2 = PointTM::new(p.x.clone(), p.y.iter().map(|v| 2.0 * v).collect());
            let red = reduced_curvature(&s, &p).unwrap();
            let red2 = reduced_curvature(&s, &p2).unwrap();
            let ric = ricci_scalar(&s, &p).unwrap();
            let ric2 = ricci_scalar(&s, &p2).unwrap();
            for i in 0..2 {
                for k in 0..2 {
                    assert!((red[i][k] - red2[i][k]).abs() < 1e-9);
                }
            }
            assert!((ric - ric2).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_flag_rejected() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.0, 0.0], vec![1.0, 0.5]);
        let parallel = [2.0, 1.0];
        assert!(matches!(
            flag_curvature(&s, &p, &parallel),
            Err(FinslerError::DegenerateFlag { .. })
        ));
    }

    #[test]
    fn flat_flags_and_isotropy() {
        let s = FinslerStructure::euclidean(2);
        let p = PointTM::new(vec![0.0, 0.0], vec![1.0, 0.3]);
        let k = flag_curvature(&s, &p, &[0.0, 1.0]).unwrap();
        assert!(k.abs() < 1e-13);
        let dev = isotropy_check(&s, &p, 10).unwrap();
        assert!(dev < 1e-13);
    }

    #[test]
    fn sphere_chart_isotropic_flags() {
        let s = FinslerStructure::sphere_chart(2, 1.0);
        let p = PointTM::new(vec![0.4, -0.3], vec![0.8, 0.5]);
        for x_edge in [[0.0, 1.0], [1.0, -1.0], [0.3, 0.9]] {
            let k = flag_curvature(&s, &p, &x_edge).unwrap();
            assert!((k - 1.0).abs() < 1e-6, "flag K = {k}");
        }
        let dev = isotropy_check(&s, &p, 20).unwrap();
        assert!(dev < 1e-6);
    }

    #[test]
    fn anisotropic_witness_in_three_dims() {
        // different sectional curvatures along different 2-planes
        let a = vec![
            vec![
                crate::expr::Expr::constant(1.0)
                    .add(crate::expr::Expr::coord(1).sin().scaled(0.5)),
                crate::expr::Expr::constant(0.0),
                crate::expr::Expr::constant(0.0),
            ],
            vec![
                crate::expr::Expr::constant(0.0),
                crate::expr::Expr::constant(1.0)
                    .add(crate::expr::Expr::coord(2).cos().scaled(0.5)),
                crate::expr::Expr::constant(0.0),
            ],
            vec![
                crate::expr::Expr::constant(0.0),
                crate::expr::Expr::constant(0.0),
                crate::expr::Expr::constant(1.0),
            ],
        ];
        let s = FinslerStructure::riemannian(3, a).unwrap();
        let p = PointTM::new(vec![0.7, 0.9, 0.4], vec![1.0, 0.2, -0.3]);
        let dev = isotropy_check(&s, &p, 12).unwrap();
        assert!(dev > 1e-3, "anisotropy deviation = {dev}");
    }
}
