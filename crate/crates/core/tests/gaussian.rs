//! Closed-form Gaussian energy against Monte Carlo over exact samples.

use flowvmc_core::gaussian::{gaussian_energy_analytic, gaussian_energy_mc, GaussianState};
use flowvmc_core::hamiltonian::{random_hamiltonian, QuarticHamiltonian};
use flowvmc_core::{Matrix, RngStream};

fn random_state(d: usize, rng: &mut RngStream) -> GaussianState {
    let n = d + d * (d + 1) / 2;
    let p: Vec<f64> = (0..n).map(|_| 0.4 * rng.normal()).collect();
    GaussianState::from_params(d, &p).unwrap()
}

#[test]
fn analytic_matches_monte_carlo() {
    let mut rng = RngStream::new(2024);
    for case in 0..12 {
        let d = [1, 2, 5][case % 3];
        let alpha = rng.uniform();
        let h = random_hamiltonian(d, &mut rng).with_alpha(alpha).unwrap();
        let s = random_state(d, &mut rng);
        let exact = gaussian_energy_analytic(&s, &h).unwrap();
        let mc = gaussian_energy_mc(&s, &h, 200_000, &mut rng).unwrap();
        assert!((exact - mc.mean).abs() < 4.0 * mc.stderr, "case {case}: {exact} vs {mc:?}");
    }
}

#[test]
fn quadratic_moments_without_quartic() {
    let mut rng = RngStream::new(11);
    let hxx = Matrix::from_rows(&[&[1.5, 0.3], &[0.3, 0.8]]);
    let h = QuarticHamiltonian::new(hxx.clone(), Matrix::zeros(2, 2), 1.0).unwrap();
    let s = random_state(2, &mut rng);
    let a = s.precision();
    let c = flowvmc_core::numerics::spd_inverse(&a).unwrap();
    let expected = 0.25 * a.trace() + 0.25 * hxx.hadamard(&c).sum() + 0.5 * hxx.quad_form(s.mu());
    let exact = gaussian_energy_analytic(&s, &h).unwrap();
    assert!((exact - expected).abs() < 1e-13);
    let mc = gaussian_energy_mc(&s, &h, 200_000, &mut rng).unwrap();
    assert!((exact - mc.mean).abs() < 4.0 * mc.stderr);
}

#[test]
fn stderr_shrinks_with_count() {
    let h = QuarticHamiltonian::oscillator(1);
    let s = GaussianState::new(vec![0.3], Matrix::from_diag(&[1.2])).unwrap();
    let small = gaussian_energy_mc(&s, &h, 10_000, &mut RngStream::new(1)).unwrap();
    let large = gaussian_energy_mc(&s, &h, 1_000_000, &mut RngStream::new(2)).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio - 10.0).abs() < 1.0, "{ratio}");
}
