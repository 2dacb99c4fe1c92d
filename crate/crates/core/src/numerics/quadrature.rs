use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;


/// Default node count for 1-D Gaussian expectations.
pub const DEFAULT_HERMITE_NODES: usize = 64;

/// Gauss–Hermite nodes and weights for the weight function `exp(-t²)`.
///
/// Roots are refined by Newton iteration on the normalized Hermite
/// recurrence; weights sum to `√π`.
pub fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let pi_m4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pi_m4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(X)]` for `X ~ N(mean, variance)`, exact for polynomials of degree
/// up to `2·nodes − 1`.
pub fn gauss_hermite_expectation(
    f: impl Fn(f64) -> f64,
    mean: f64,
    variance: f64,
    nodes: usize,
) -> f64 {
    assert!(nodes >= 2, "need at least two nodes");
    assert!(variance > 0.0, "variance must be positive");
    let (t, w) = gauss_hermite_rule(nodes);
    let s = (2.0 * variance).sqrt();
    let total: f64 = t.iter().zip(&w).map(|(&ti, &wi)| wi * f(mean + s * ti)).sum();
    total / PI.sqrt()
}

/// Uniform grid on `[lo, hi]` with `n` points.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

/// Trapezoid rule for samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}
