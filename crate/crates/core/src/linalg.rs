//! Dense symmetric kernels: cyclic Jacobi eigensolver and Cholesky solves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
/// Rotations are skipped once `|a_pq| <= REL_TOL * sqrt(|a_pp a_qq|)`.
const REL_TOL: f64 = 1e-15;

fn off_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and orthonormal eigenvectors as
/// columns. Each column is signed so that its first entry with magnitude
/// above `1e-8` of the column max is positive.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq == 0.0 || apq.abs() <= REL_TOL * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            let off = off_norm(&a);
            if off > 1e-12 * scale {
                return Err(Error::EigenNoConvergence { sweeps, off });
            }
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_fn(n, |k, _| a[(order[k], order[k])]);
    let mut vectors = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    for k in 0..n {
        let mut col = vectors.column_mut(k);
        let cmax = col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * cmax).copied() {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok((values, vectors))
}

/// Cholesky factorization that reports failure as an error.
pub fn cholesky(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or(Error::NotPositiveDefinite)
}

/// 2-norm condition number of a symmetric positive semidefinite matrix.
pub fn spd_condition(a: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = jacobi_eigen(a)?;
    let lo = vals[0];
    let hi = vals[vals.len() - 1];
    Ok(if lo <= 0.0 { f64::INFINITY } else { hi / lo })
}

/// Composite trapezoid weights for `n + 1` equispaced samples.
pub fn trapezoid_weights(n: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n + 1];
    w[0] = 0.5 * dt;
    w[n] = 0.5 * dt;
    w
}
