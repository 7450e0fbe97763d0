//! Dense helpers for the small (n <= 4) pointwise matrices.

use crate::error::{FinslerError, Result};

/// Inverse by Gauss-Jordan with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(FinslerError::StructuralDegeneracy {
                min_eig: 0.0,
                location: None,
            });
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = 1.0 / a[col][col];
        for j in 0..n {
            a[col][j] *= d;
            inv[col][j] *= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a = m.to_vec();
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    symmetric_eigenvalues(m)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_2x2() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let inv = invert(&m).unwrap();
        assert!((inv[0][0] - 0.6).abs() < 1e-14);
        assert!((inv[0][1] + 0.2).abs() < 1e-14);
        assert!((inv[1][1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn eigen_3x3() {
        let m = vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, 3.0, 1.0],
            vec![0.0, 1.0, 3.0],
        ];
        let eig = symmetric_eigenvalues(&m);
        assert!((eig[0] - 2.0).abs() < 1e-12);
        assert!((eig[1] - 2.0).abs() < 1e-12);
        assert!((eig[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(invert(&m).is_err());
    }
}
