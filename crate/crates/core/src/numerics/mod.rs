//! Dense linear algebra, random streams, and quadrature.

mod linalg;
mod matrix;
mod quadrature;
mod rng;

pub use linalg::{
    cholesky, cholesky_solve, qr, solve_damped, solve_lower, solve_upper_t, spd_inverse,
    symmetric_eigen,
};
pub use matrix::{dot, norm, Matrix};
pub use quadrature::{
    gauss_hermite_expectation, gauss_hermite_rule, linspace, trapezoid, DEFAULT_HERMITE_NODES,
};
pub use rng::RngStream;
use num_traits::Float;

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// standard-normal matrix, with the sign of each column fixed by `R`'s
/// diagonal.
pub fn haar_orthogonal(d: usize, rng: &mut RngStream) -> Matrix {
    assert!(d >= 1, "dimension must be positive");
    let g = rng.normal_matrix(d, d);
    let (mut q, r) = qr(&g);
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
