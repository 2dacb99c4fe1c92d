//! Fisher-matrix invariances and the distance oracle on flow families.

use flowvmc_core::autodiff::{param_scores, DifferentiableProgram};
use flowvmc_core::flow::{FlowArchitecture, FlowModel};
use flowvmc_core::geometry::{fisher_from_scores, fisher_rao_distance_1d, PushforwardProgram};
use flowvmc_core::numerics::linspace;
use flowvmc_core::{Matrix, RngStream};

fn perturbed(d: usize, seed: u64, scale: f64) -> FlowModel {
    let arch = FlowArchitecture::new(d).with_layers(2).with_hidden(8, 2);
    let mut rng = RngStream::new(seed);
    let mut m = FlowModel::new(arch, &mut rng).unwrap();
    m.perturb(&mut rng, scale);
    m
}

#[test]
fn fisher_invariant_under_fixed_diffeomorphism() {
    let family = perturbed(2, 1, 0.2);
    let map = perturbed(2, 2, 0.3);
    let z = family.sample(20_000, &mut RngStream::new(3)).unwrap().points;
    let pushed = PushforwardProgram::new(family.clone(), map).unwrap();
    let x = pushed.push(&z).unwrap();
    let base = fisher_from_scores(&param_scores(&family, &z).unwrap());
    let moved = fisher_from_scores(&param_scores(&pushed, &x).unwrap());
    let n = family.num_params();
    for j in 0..n {
        for k in 0..n {
            let dev = (base.matrix[(j, k)] - moved.matrix[(j, k)]).abs();
            assert!(dev <= 3.0 * base.stderr[(j, k)] + 1e-9, "({j},{k}) {dev}");
        }
    }
    assert!(moved.min_eigenvalue() > -1e-8);
}

#[test]
fn fisher_matches_distance_oracle() {
    let model = perturbed(1, 4, 0.3);
    let batch = model.sample(100_000, &mut RngStream::new(5)).unwrap();
    let info = fisher_from_scores(&param_scores(&model, &batch.points).unwrap());
    let grid = linspace(-15.0, 15.0, 4096);
    let h = grid[1] - grid[0];
    let density = |m: &FlowModel| -> Vec<f64> {
        let lp = m.log_prob_batch(&Matrix::column(&grid)).unwrap();
        lp.into_iter().map(f64::exp).collect()
    };
    let p = density(&model);
    let eps = 1e-2;
    for k in 0..model.num_params() {
        let mut theta = model.params().to_vec();
        theta[k] += eps;
        let mut moved = model.clone();
        moved.set_params(&theta).unwrap();
        let d = fisher_rao_distance_1d(&p, &density(&moved), h);
        let predicted = 0.25 * info.matrix[(k, k)] * eps * eps;
        assert!((d * d / predicted - 1.0).abs() < 0.05, "param {k}: {} vs {predicted}", d * d);
    }
}
