//! Dense factorizations for small symmetric systems.

use alloc::vec;
use alloc::vec::Vec;


use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};
use num_traits::Float;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = m`.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotSpd { pivot: j, value: pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` by forward substitution.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &y[..i]);
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `Lᵀ x = y` by back substitution.
pub fn solve_upper_t(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    solve_upper_t(l, &solve_lower(l, b))
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let l = cholesky(m)?;
    let n = m.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Solves `(m + gamma·I) x = rhs` for symmetric positive semi-definite `m`.
///
/// With `gamma = 0` a rank-deficient `m` is reported as [`Error::Singular`].
pub fn solve_damped(m: &Matrix, rhs: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if m.rows() != rhs.len() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: rhs.len(),
        });
    }
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::Domain(alloc::format!("damping must be >= 0, got {gamma}")));
    }
    let damped = m.add_diag(gamma);
    let scale = damped.diag().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let l = cholesky(&damped).map_err(|_| Error::Singular)?;
    // A pivot many orders below the diagonal scale means m was numerically singular.
    let tiny = scale * 1e-13 * damped.rows() as f64;
    if l.diag().iter().any(|&p| p * p <= tiny) {
        return Err(Error::Singular);
    }
    Ok(cholesky_solve(&l, rhs))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(m.is_square(), "eigen-decomposition needs a square matrix");
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-30 * (1.0 + a.frobenius_norm().powi(2)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    (values, vectors)
}

/// Householder QR of a square matrix. Returns `(Q, R)`.
pub fn qr(m: &Matrix) -> (Matrix, Matrix) {
    assert!(m.is_square(), "qr expects a square matrix");
    let n = m.rows();
    let mut r = m.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let mut x: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let alpha = -x[0].signum() * x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        x[0] -= alpha;
        let vnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= vnorm);
        // R <- (I - 2vvᵀ) R
        for j in 0..n {
            let s: f64 = (k..n).map(|i| x[i - k] * r[(i, j)]).sum();
            for i in k..n {
                r[(i, j)] -= 2.0 * x[i - k] * s;
            }
        }
        // Q <- Q (I - 2vvᵀ)
        for i in 0..n {
            let s: f64 = (k..n).map(|j| q[(i, j)] * x[j - k]).sum();
            for j in k..n {
                q[(i, j)] -= 2.0 * s * x[j - k];
            }
        }
    }
    (q, r)
}
