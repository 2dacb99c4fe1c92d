//! Quartic bosonic Hamiltonians with unit kinetic term,
//!
//! ```text
//! H = ½|p|² + α·½ xᵀ h_xx x + ⅛ (x⊙x)ᵀ u (x⊙x),
//! ```
//!
//! which is the general quartic form with `h = diag(h_xx, 1)` and quartic
//! couplings `λ_ijkl = 3 δ_ij δ_kl u_ik`. Only `u` is stored.

use alloc::format;
use alloc::vec::Vec;


use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::numerics::{haar_orthogonal, symmetric_eigen, Matrix, RngStream};
use num_traits::Float;

/// Interval from which random spectra are drawn.
pub const SPECTRUM_RANGE: (f64, f64) = (0.1, 2.0);

const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuarticHamiltonian {
    h_xx: Matrix,
    u: Matrix,
    alpha: f64,
}

impl QuarticHamiltonian {
    /// Validates and builds a Hamiltonian.
    ///
    /// `h_xx` must be symmetric and `u` symmetric positive semidefinite
    /// (a zero `u` gives a purely quadratic problem).
    pub fn new(h_xx: Matrix, u: Matrix, alpha: f64) -> Result<Self> {
        let d = h_xx.rows();
        if d == 0 || !h_xx.is_square() {
            return Err(Error::InvalidConfig(format!(
                "h_xx must be a non-empty square matrix, got {}x{}",
                h_xx.rows(),
                h_xx.cols()
            )));
        }
        if u.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: u.rows(),
            });
        }
        if !h_xx.is_finite() || !u.is_finite() {
            return Err(Error::NonFinite("hamiltonian coefficients"));
        }
        if !h_xx.is_symmetric(SYMMETRY_RTOL) {
            return Err(Error::InvalidConfig("h_xx is not symmetric".into()));
        }
        if !u.is_symmetric(SYMMETRY_RTOL) {
            return Err(Error::InvalidConfig("u is not symmetric".into()));
        }
        let (eig, _) = symmetric_eigen(&u);
        let scale = u.max_abs().max(1.0);
        if eig.iter().any(|&e| e < -1e-12 * scale) {
            return Err(Error::InvalidConfig("u is not positive semidefinite".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { h_xx, u, alpha })
    }

    /// `H = ½(p² + x²)` in `d` decoupled modes.
    pub fn oscillator(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self {
            h_xx: Matrix::identity(d),
            u: Matrix::zeros(d, d),
            alpha: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.h_xx.rows()
    }

    pub fn h_xx(&self) -> &Matrix {
        &self.h_xx
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Copy with the quadratic term scaled by `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    /// Quadratic part `½ xᵀ h_xx x` without the `α` factor.
    pub fn quadratic_part(&self, x: &[f64]) -> f64 {
        0.5 * self.h_xx.quad_form(x)
    }

    /// Quartic part `⅛ (x⊙x)ᵀ u (x⊙x)`.
    pub fn quartic_part(&self, x: &[f64]) -> f64 {
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        0.125 * self.u.quad_form(&x2)
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        self.alpha * self.quadratic_part(x) + self.quartic_part(x)
    }

    /// Potential for every row of `xs`.
    pub fn potential_batch(&self, xs: &Matrix) -> Vec<f64> {
        (0..xs.rows()).map(|i| self.potential(xs.row(i))).collect()
    }

    /// Potential of every row of `x` as an `N×1` node.
    pub fn potential_graph(&self, g: &mut Graph, x: Var) -> Var {
        let h = g.constant(self.h_xx.scale(0.5 * self.alpha));
        let xh = g.matmul(x, h);
        let quad = g.mul(xh, x);
        let x2 = g.square(x);
        let u = g.constant(self.u.scale(0.125));
        let x2u = g.matmul(x2, u);
        let quart = g.mul(x2u, x2);
        let total = g.add(quad, quart);
        g.sum_cols(total)
    }
}

/// Random instance with `u = UΣUᵀ` and `h_xx = −U′Σ′U′ᵀ`, spectra drawn
/// uniformly from [`SPECTRUM_RANGE`] and rotations Haar-distributed.
pub fn random_hamiltonian(d: usize, rng: &mut RngStream) -> QuarticHamiltonian {
    assert!(d >= 1, "dimension must be positive");
    let u = random_spd(d, rng);
    let h_xx = random_spd(d, rng).scale(-1.0);
    QuarticHamiltonian { h_xx, u, alpha: 1.0 }
}

fn random_spd(d: usize, rng: &mut RngStream) -> Matrix {
    let (lo, hi) = SPECTRUM_RANGE;
    let sigma: Vec<f64> = (0..d).map(|_| rng.uniform_in(lo, hi)).collect();
    let q = haar_orthogonal(d, rng);
    let m = q.matmul(&Matrix::from_diag(&sigma)).matmul_t(&q);
    // exact symmetry
    let mt = m.transpose();
    m.add(&mt).scale(0.5)
}

/// One-dimensional quadratic Hamiltonian `½ [x p] h [x p]ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic1D {
    pub h_xx: f64,
    pub h_xp: f64,
    pub h_pp: f64,
}

/// Ground-state parameters `(a, b)` of `ψ ∝ exp(−(a + i b) x² / 2)`.
pub fn quadratic1d_ground(q: Quadratic1D) -> Result<(f64, f64)> {
    let disc = q.h_xx * q.h_pp - q.h_xp * q.h_xp;
    if !(q.h_pp > 0.0) || !(disc > 0.0) {
        return Err(Error::Domain(format!(
            "need h_pp > 0 and h_xx h_pp - h_xp² > 0, got h_pp = {}, discriminant = {disc}",
            q.h_pp
        )));
    }
    Ok((disc.sqrt() / q.h_pp, q.h_xp / q.h_pp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_hermite_expectation;

    fn brute_force_potential(h: &QuarticHamiltonian, x: &[f64]) -> f64 {
        let d = x.len();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += 0.5 * h.h_xx()[(i, j)] * x[i] * x[j];
            }
        }
        let mut quart = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let lam = if i == j && k == l { 3.0 * h.u()[(i, k)] } else { 0.0 };
                        quart += lam * x[i] * x[j] * x[k] * x[l];
                    }
                }
            }
        }
        h.alpha() * quad + quart / 24.0
    }

    #[test]
    fn one_dimensional_example() {
        let h = QuarticHamiltonian::new(Matrix::identity(1).scale(-1.0), Matrix::identity(1), 1.0)
            .unwrap();
        assert!((h.potential(&[2.0]) - 0.0).abs() < 1e-15);
        assert_eq!(h.potential(&[0.0]), 0.0);
    }

    #[test]
    fn matches_four_index_sum() {
        let mut rng = RngStream::new(5);
        for d in [1, 2, 3] {
            let h = random_hamiltonian(d, &mut rng);
            for _ in 0..10 {
                let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.normal()).collect();
                let a = h.potential(&x);
                let b = brute_force_potential(&h, &x);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn random_spectra_in_range() {
        let mut rng = RngStream::new(17);
        for d in 1..=6 {
            let h = random_hamiltonian(d, &mut rng);
            let (eu, _) = symmetric_eigen(h.u());
            let (eh, _) = symmetric_eigen(&h.h_xx().scale(-1.0));
            for e in eu.iter().chain(&eh) {
                assert!(*e >= 0.1 - 1e-10 && *e <= 2.0 + 1e-10, "eigenvalue {e}");
            }
        }
    }

    #[test]
    fn random_hamiltonian_is_reproducible() {
        let a = random_hamiltonian(4, &mut RngStream::new(9));
        let b = random_hamiltonian(4, &mut RngStream::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_scales_quadratic_only() {
        let h = random_hamiltonian(3, &mut RngStream::new(2));
        let x = [0.3, -1.2, 0.7];
        let p = h.quadratic_part(&x);
        let q = h.quartic_part(&x);
        assert!((h.with_alpha(0.0).unwrap().potential(&x) - q).abs() < 1e-15);
        assert_eq!(h.with_alpha(1.0).unwrap().potential(&x), h.potential(&x));
        assert!((h.with_alpha(0.5).unwrap().potential(&x) - (0.5 * p + q)).abs() < 1e-14);
        assert!(h.with_alpha(1.5).is_err());
    }

    #[test]
    fn graph_potential_matches_pointwise() {
        let h = random_hamiltonian(3, &mut RngStream::new(4)).with_alpha(0.7).unwrap();
        let xs = RngStream::new(1).normal_matrix(5, 3);
        let mut g = Graph::new();
        let x = g.data(xs.clone());
        let v = h.potential_graph(&mut g, x);
        for (i, &pv) in g.value(v).as_slice().iter().enumerate() {
            assert!((pv - h.potential(xs.row(i))).abs() < 1e-13);
        }
    }

    #[test]
    fn validation() {
        let bad_u = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(QuarticHamiltonian::new(Matrix::identity(2), bad_u, 1.0).is_err());
        let asym = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(QuarticHamiltonian::new(asym, Matrix::identity(2), 1.0).is_err());
        assert!(QuarticHamiltonian::new(Matrix::identity(2), Matrix::zeros(2, 2), 1.0).is_ok());
    }

    #[test]
    fn quadratic_ground_states() {
        let q = |h_xx, h_xp, h_pp| Quadratic1D { h_xx, h_xp, h_pp };
        assert_eq!(quadratic1d_ground(q(1.0, 0.0, 1.0)).unwrap(), (1.0, 0.0));
        assert_eq!(quadratic1d_ground(q(4.0, 0.0, 1.0)).unwrap(), (2.0, 0.0));
        let (a, b) = quadratic1d_ground(q(1.0, 1.0, 2.0)).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert!(matches!(quadratic1d_ground(q(1.0, 1.0, 1.0)), Err(Error::Domain(_))));
    }

    /// `⟨H⟩` of `exp(−(a+ib)x²/2)`, with `⟨x²⟩` by quadrature and
    /// `⟨p²⟩ = (a²+b²)⟨x²⟩`, `Re⟨xp⟩ = −b⟨x²⟩`.
    fn quadratic_energy(q: Quadratic1D, a: f64, b: f64) -> f64 {
        let x2 = gauss_hermite_expectation(|x| x * x, 0.0, 0.5 / a, 16);
        0.5 * q.h_xx * x2 - q.h_xp * b * x2 + 0.5 * q.h_pp * (a * a + b * b) * x2
    }

    #[test]
    fn ground_state_minimizes_energy_on_grid() {
        for q in [
            Quadratic1D { h_xx: 4.0, h_xp: 0.0, h_pp: 1.0 },
            Quadratic1D { h_xx: 1.0, h_xp: 1.0, h_pp: 2.0 },
        ] {
            let (a0, b0) = quadratic1d_ground(q).unwrap();
            let e0 = quadratic_energy(q, a0, b0);
            for i in 1..200 {
                for j in 0..41 {
                    let a = 0.02 * i as f64;
                    let b = -1.0 + 0.05 * j as f64;
                    assert!(quadratic_energy(q, a, b) >= e0 - 1e-12);
                }
            }
        }
    }
}
