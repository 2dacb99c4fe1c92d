//! Parameter and input gradients of flow log-densities against central
//! finite differences, over the architecture matrix.

use flowvmc_core::autodiff::{evaluate, input_gradients, param_scores, DifferentiableProgram};
use flowvmc_core::flow::{FlowArchitecture, FlowDensity, FlowModel, SymmetrizedDensity};
use flowvmc_core::{Matrix, RngStream};

const POINTS: usize = 100;

fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

fn agree(exact: f64, fd: f64) -> bool {
    (exact - fd).abs() <= 1e-4 * exact.abs().max(fd.abs()) + 1e-7
}

fn random_model(d: usize, layers: usize, seed: u64) -> FlowModel {
    let arch = FlowArchitecture::new(d).with_layers(layers).with_hidden(8, 2);
    let mut rng = RngStream::new(seed);
    let mut m = FlowModel::new(arch, &mut rng).unwrap();
    m.perturb(&mut rng, 0.2);
    m
}

fn check_param_gradients<P: FlowDensity + Clone>(density: &P, xs: &Matrix) {
    let scores = param_scores(density, xs).unwrap();
    let theta = density.params().to_vec();
    for k in 0..theta.len() {
        let h = fd_step(theta[k]);
        let mut plus = density.clone();
        let mut tp = theta.clone();
        tp[k] += h;
        plus.set_params(&tp).unwrap();
        let mut minus = density.clone();
        tp[k] = theta[k] - h;
        minus.set_params(&tp).unwrap();
        let fp = evaluate(&plus, xs).unwrap();
        let fm = evaluate(&minus, xs).unwrap();
        for i in 0..xs.rows() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            let exact = scores[(i, k)];
            assert!(agree(exact, fd), "param {k}, point {i}: {exact} vs {fd}");
        }
    }
}

fn check_input_gradients<P: DifferentiableProgram>(density: &P, xs: &Matrix) {
    let grads = input_gradients(density, xs).unwrap();
    for j in 0..xs.cols() {
        let mut plus = xs.clone();
        let mut minus = xs.clone();
        let mut steps = Vec::with_capacity(xs.rows());
        for i in 0..xs.rows() {
            let h = fd_step(xs[(i, j)]);
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            steps.push(h);
        }
        let fp = evaluate(density, &plus).unwrap();
        let fm = evaluate(density, &minus).unwrap();
        for i in 0..xs.rows() {
            let fd = (fp[i] - fm[i]) / (2.0 * steps[i]);
            assert!(agree(grads[(i, j)], fd), "coord {j}, point {i}: {} vs {fd}", grads[(i, j)]);
        }
    }
}

#[test]
fn flow_gradients_match_finite_differences() {
    let mut seed = 100;
    for d in [1, 2, 5, 10] {
        for layers in [2, 4, 8] {
            seed += 1;
            let model = random_model(d, layers, seed);
            let xs = RngStream::new(seed + 1000).normal_matrix(POINTS, d);
            check_param_gradients(&model, &xs);
            check_input_gradients(&model, &xs);
            if d == 1 {
                // one affine layer regardless of depth
                break;
            }
        }
    }
}

#[test]
fn symmetrized_gradients_match_finite_differences() {
    for (d, layers) in [(1, 2), (2, 4), (5, 2)] {
        let sym = SymmetrizedDensity::new(random_model(d, layers, 7 + d as u64));
        let xs = RngStream::new(70 + d as u64).normal_matrix(POINTS, d);
        check_param_gradients(&sym, &xs);
        check_input_gradients(&sym, &xs);
    }
}

#[test]
fn identity_flow_has_base_input_gradient() {
    let m = FlowModel::new(FlowArchitecture::new(3).with_hidden(8, 2), &mut RngStream::new(1)).unwrap();
    let xs = RngStream::new(2).normal_matrix(10, 3);
    let g = input_gradients(&m, &xs).unwrap();
    assert!(g.add(&xs).max_abs() < 1e-14);
}

#[test]
fn score_has_zero_mean_under_exact_samples() {
    let model = random_model(2, 2, 33);
    let batch = model.sample(100_000, &mut RngStream::new(34)).unwrap();
    let n = model.params().len();
    let (mut sum, mut sum_sq) = (vec![0.0; n], vec![0.0; n]);
    for chunk in 0..10 {
        let idx: Vec<usize> = (chunk * 10_000..(chunk + 1) * 10_000).collect();
        let scores = param_scores(&model, &batch.points.select_rows(&idx)).unwrap();
        for i in 0..scores.rows() {
            for (k, &v) in scores.row(i).iter().enumerate() {
                sum[k] += v;
                sum_sq[k] += v * v;
            }
        }
    }
    let count = batch.len() as f64;
    for k in 0..n {
        let mean = sum[k] / count;
        let se = ((sum_sq[k] / count - mean * mean) / count).sqrt();
        assert!(mean.abs() < 4.0 * se + 1e-12, "param {k}: mean {mean}, stderr {se}");
    }
}
