//! Invariants over random inputs.

use flowvmc_core::autodiff::DifferentiableProgram;
use flowvmc_core::flow::{FlowArchitecture, FlowModel, SymmetrizedDensity};
use flowvmc_core::gaussian::{gaussian_energy_analytic, GaussianState};
use flowvmc_core::geometry::{fisher_from_scores, fisher_rao_distance_1d, fubini_study_distance_1d};
use flowvmc_core::hamiltonian::random_hamiltonian;
use flowvmc_core::numerics::{cholesky, linspace};
use flowvmc_core::optimize::{cosine_lr, Adam};
use flowvmc_core::tdvp::{family_energy, vn_rhs};
use flowvmc_core::RngStream;
use proptest::prelude::*;

fn normal_density(grid: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let c = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter().map(|x| c * (-0.5 * ((x - mean) / sd).powi(2)).exp()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric_and_nonnegative(
        m1 in -2.0..2.0f64, s1 in 0.3..2.0f64, m2 in -2.0..2.0f64, s2 in 0.3..2.0f64,
    ) {
        let grid = linspace(-15.0, 15.0, 2001);
        let h = grid[1] - grid[0];
        let p = normal_density(&grid, m1, s1);
        let q = normal_density(&grid, m2, s2);
        let d_pq = fisher_rao_distance_1d(&p, &q, h);
        let d_qp = fisher_rao_distance_1d(&q, &p, h);
        prop_assert!(d_pq >= 0.0);
        prop_assert!((d_pq - d_qp).abs() < 1e-12);
        prop_assert!(fisher_rao_distance_1d(&p, &p, h) < 1e-6);
        let psi: Vec<f64> = p.iter().map(|v| v.sqrt()).collect();
        let phi: Vec<f64> = q.iter().map(|v| v.sqrt()).collect();
        let f = fubini_study_distance_1d(&psi, &phi, h);
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&f));
        prop_assert!((f - fubini_study_distance_1d(&phi, &psi, h)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_energy_is_even_in_the_mean(seed in 0u64..1000, d in 1usize..5) {
        let mut rng = RngStream::new(seed);
        let h = random_hamiltonian(d, &mut rng);
        let n = d + d * (d + 1) / 2;
        let p: Vec<f64> = (0..n).map(|_| 0.5 * rng.normal()).collect();
        let s = GaussianState::from_params(d, &p).unwrap();
        let flipped = GaussianState::new(s.mu().iter().map(|v| -v).collect(), s.factor().clone()).unwrap();
        let a = gaussian_energy_analytic(&s, &h).unwrap();
        let b = gaussian_energy_analytic(&flipped, &h).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn adam_ignores_zero_directions(params in prop::collection::vec(-5.0..5.0f64, 1..20), steps in 1usize..10) {
        let mut p = params.clone();
        let mut adam = Adam::with_defaults(p.len());
        let zero = vec![0.0; p.len()];
        for _ in 0..steps {
            adam.update(&mut p, &zero, 0.1);
        }
        prop_assert_eq!(p, params);
    }

    #[test]
    fn fisher_is_positive_semidefinite(seed in 0u64..1000, rows in 2usize..40, cols in 1usize..8) {
        let scores = RngStream::new(seed).normal_matrix(rows, cols);
        let info = fisher_from_scores(&scores);
        prop_assert!(info.matrix.is_symmetric(1e-12));
        prop_assert!(info.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn family_energy_respects_ground_state(log_a in -3.0..3.0f64, b in -3.0..3.0f64) {
        prop_assert!(family_energy(log_a, b) >= 0.5 - 1e-15);
    }

    #[test]
    fn vn_flow_is_tangent_to_energy_levels(log_a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let e = 1e-6;
        let de_dl = (family_energy(log_a + e, b) - family_energy(log_a - e, b)) / (2.0 * e);
        let de_db = (family_energy(log_a, b + e) - family_energy(log_a, b - e)) / (2.0 * e);
        let [v0, v1] = vn_rhs([log_a, b]);
        let scale = (de_dl.abs() + de_db.abs()) * (v0.abs() + v1.abs()) + 1.0;
        prop_assert!((de_dl * v0 + de_db * v1).abs() < 1e-6 * scale);
    }

    #[test]
    fn flow_round_trip(seed in 0u64..500, d in 1usize..6, layers in 1usize..4) {
        let mut rng = RngStream::new(seed);
        let arch = FlowArchitecture::new(d).with_layers(layers).with_hidden(6, 1);
        let mut m = FlowModel::new(arch, &mut rng).unwrap();
        m.perturb(&mut rng, 0.3);
        let z = rng.normal_matrix(8, d);
        let (x, ld_f) = m.forward_batch(&z).unwrap();
        let (back, ld_i) = m.inverse_batch(&x).unwrap();
        prop_assert!(back.sub(&z).max_abs() < 1e-9);
        for (a, b) in ld_f.iter().zip(&ld_i) {
            prop_assert!((a + b).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetrized_density_is_even(seed in 0u64..500, d in 1usize..5) {
        let mut rng = RngStream::new(seed);
        let mut m = FlowModel::new(FlowArchitecture::new(d).with_hidden(6, 1), &mut rng).unwrap();
        m.perturb(&mut rng, 0.4);
        let sym = SymmetrizedDensity::new(m);
        let x = rng.normal_matrix(6, d).scale(2.0);
        prop_assert_eq!(sym.log_prob_batch(&x).unwrap(), sym.log_prob_batch(&x.scale(-1.0)).unwrap());
        prop_assert_eq!(sym.num_params(), sym.flow().num_params());
    }

    #[test]
    fn cholesky_reconstructs(seed in 0u64..1000, n in 1usize..8) {
        let b = RngStream::new(seed).normal_matrix(n, n);
        let a = b.t_matmul(&b).add_diag(0.5);
        let l = cholesky(&a).unwrap();
        prop_assert!(l.matmul_t(&l).sub(&a).max_abs() < 1e-10 * a.max_abs());
    }

    #[test]
    fn cosine_schedule_is_bounded_and_decreasing(total in 1usize..500, lr0 in 1e-4..1.0f64) {
        let mut prev = f64::INFINITY;
        for t in 0..total {
            let lr = cosine_lr(t, total, lr0);
            prop_assert!(lr >= 0.0 && lr <= lr0);
            prop_assert!(lr <= prev);
            prev = lr;
        }
    }
}

