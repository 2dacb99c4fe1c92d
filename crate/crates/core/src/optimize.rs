//! Training loop: pathwise gradients of the adjoint loss, a damped
//! natural-gradient solve, Adam with cosine decay, adiabatic scheduling
//! of the quadratic coupling, and a flow-distance penalty.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::autodiff::{bind_params, param_scores, Graph};
use crate::error::{Error, Result};
use crate::estimators::{adjoint_loss, EnergyEstimate};
use crate::flow::FlowDensity;
use crate::hamiltonian::QuarticHamiltonian;
use crate::numerics::{dot, norm, solve_damped, Matrix, RngStream};
use num_traits::Float;

/// `lr0·½(1 + cos(πt/T))`.
pub fn cosine_lr(t: usize, total: usize, lr0: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let frac = (t.min(total)) as f64 / total as f64;
    lr0 * 0.5 * (1.0 + (PI * frac).cos())
}

/// `(e^{−kt} − e^{−k})/(1 − e^{−k})`, falling from 1 at `t = 0` to 0 at
/// `t = 1`.
pub fn adiabatic_alpha(t_frac: f64, k: f64) -> f64 {
    assert!(k > 0.0, "adiabatic rate must be positive");
    let t = t_frac.clamp(0.0, 1.0);
    let tail = (-k).exp();
    (((-k * t).exp() - tail) / (1.0 - tail)).clamp(0.0, 1.0)
}

/// `weight · mean ‖x − z‖²` over paired rows.
pub fn flow_distance_penalty(z: &Matrix, x: &Matrix, weight: f64) -> f64 {
    assert_eq!(z.shape(), x.shape(), "paired batches differ in shape");
    if weight == 0.0 || z.rows() == 0 {
        return 0.0;
    }
    let total: f64 = x.sub(z).as_slice().iter().map(|v| v * v).sum();
    weight * total / z.rows() as f64
}

/// Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn with_defaults(n: usize) -> Self {
        Self::new(n, 0.9, 0.999, 1e-8)
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// Bias-corrected update of `params` along `direction`.
    pub fn update(&mut self, params: &mut [f64], direction: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(direction.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = direction[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Solves `(I + γ𝟙) d = grad` with `I` the centered covariance of the
/// rows of `scores`.
///
/// Small parameter counts form `I` explicitly; larger ones run conjugate
/// gradients on `v ↦ Sᵀ(Sv)/N + γv`, which needs `γ > 0`.
pub fn natural_step(scores: &Matrix, grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let (n_samples, n) = scores.shape();
    if grad.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grad.len(),
        });
    }
    let centered = center_rows(scores);
    if n <= DENSE_LIMIT || gamma == 0.0 {
        let fisher = centered.t_matmul(&centered).scale(1.0 / n_samples.max(1) as f64);
        return solve_damped(&fisher, grad, gamma);
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(alloc::format!("damping must be >= 0, got {gamma}")));
    }
    Ok(conjugate_gradient(&centered, grad, gamma))
}

const DENSE_LIMIT: usize = 256;
const CG_TOL: f64 = 1e-6;
const CG_MAX_ITERS: usize = 20;

fn center_rows(s: &Matrix) -> Matrix {
    let (r, c) = s.shape();
    let mut mean = vec![0.0; c];
    for i in 0..r {
        for (m, v) in mean.iter_mut().zip(s.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r.max(1) as f64);
    let mut out = s.clone();
    for i in 0..r {
        for (o, m) in out.row_mut(i).iter_mut().zip(&mean) {
            *o -= m;
        }
    }
    out
}

fn conjugate_gradient(s: &Matrix, b: &[f64], gamma: f64) -> Vec<f64> {
    let (rows, n) = s.shape();
    let mut sv = vec![0.0; rows];
    let mut apply = |v: &[f64], out: &mut [f64]| {
        for (i, o) in sv.iter_mut().enumerate() {
            *o = dot(s.row(i), v);
        }
        for (o, vi) in out.iter_mut().zip(v) {
            *o = gamma * vi;
        }
        let w = 1.0 / rows as f64;
        for (i, &c) in sv.iter().enumerate() {
            let c = c * w;
            for (o, sij) in out.iter_mut().zip(s.row(i)) {
                *o += c * sij;
            }
        }
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = CG_TOL * CG_TOL * rr;
    for _ in 0..CG_MAX_ITERS {
        if rr <= target || rr == 0.0 {
            break;
        }
        apply(&p, &mut ap);
        let step = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

/// One pathwise evaluation of the adjoint loss.
#[derive(Clone, Debug, PartialEq)]
pub struct PathwiseGradient {
    /// Adjoint loss plus penalty.
    pub loss: f64,
    /// Gradient of `loss` with respect to the flat parameters.
    pub grad: Vec<f64>,
    /// Per-sample adjoint estimator values.
    pub local: Vec<f64>,
    /// Sampled points `x = ±f(z)`.
    pub points: Matrix,
    /// Penalty term alone.
    pub penalty: f64,
}

/// Reparameterized gradient of `mean(|∇ log ρ(x)|²/16 + V(x)/2) +
/// w·mean‖f(z) − z‖²` at `x = sᵢ f(zᵢ)`.
pub fn pathwise_gradient<D: FlowDensity + ?Sized>(
    density: &D,
    h: &QuarticHamiltonian,
    z: &Matrix,
    signs: Option<&[f64]>,
    penalty_weight: f64,
) -> Result<PathwiseGradient> {
    let (n, d) = z.shape();
    if d != density.dim() || d != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            got: d,
        });
    }
    let mut g = Graph::new();
    let theta = bind_params(&mut g, density);
    let zv = g.data(z.clone());
    let (fz, _) = density.flow().forward_graph(&mut g, zv, &theta);
    let x = match signs {
        Some(s) => {
            assert_eq!(s.len(), n, "one sign per sample");
            let mut m = Matrix::zeros(n, d);
            for (i, &si) in s.iter().enumerate() {
                m.row_mut(i).iter_mut().for_each(|v| *v = si);
            }
            let sm = g.constant(m);
            g.mul(fz, sm)
        }
        None => fz,
    };
    let lp = density.build(&mut g, x, &theta);
    let gx = g.grad(lp, &[x])[0];
    let sq = g.square(gx);
    let g2 = g.sum_cols(sq);
    let kinetic = g.scale(g2, 1.0 / 16.0);
    let v = h.potential_graph(&mut g, x);
    let half_v = g.scale(v, 0.5);
    let local = g.add(kinetic, half_v);
    let mut loss = g.mean_all(local);
    let mut penalty = 0.0;
    if penalty_weight != 0.0 {
        let diff = g.sub(fz, zv);
        let sq = g.square(diff);
        let per = g.sum_cols(sq);
        let mean = g.mean_all(per);
        penalty = penalty_weight * g.scalar(mean);
        let weighted = g.scale(mean, penalty_weight);
        loss = g.add(loss, weighted);
    }
    let loss_value = g.scalar(loss);
    let local_values = g.value(local).as_slice().to_vec();
    if !loss_value.is_finite() {
        return Err(Error::NonFinite("adjoint loss"));
    }
    let grad: Vec<f64> = g
        .gradients(loss, &theta)
        .into_iter()
        .flat_map(Matrix::into_vec)
        .collect();
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok(PathwiseGradient {
        loss: loss_value,
        grad,
        local: local_values,
        points: g.value(x).clone(),
        penalty,
    })
}

/// Training settings.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub lr: f64,
    /// Damping `γ` of the natural-gradient solve.
    pub damping: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub use_adam: bool,
    pub use_natural_gradient: bool,
    /// Draw a separate batch for the Fisher matrix.
    pub independent_fisher_batch: bool,
    /// Rows used for the Fisher matrix; 0 uses the whole batch.
    pub fisher_samples: usize,
    /// Rate `k` of the adiabatic schedule; 0 disables it.
    pub adiabatic_k: f64,
    /// Use `1 − α(t)` instead of `α(t)`.
    pub reverse_adiabatic: bool,
    /// Initial flow-distance weight, annealed linearly to 0.
    pub penalty_weight: f64,
    /// Samples for the final energy estimate.
    pub final_samples: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            iterations: 2000,
            lr: 0.01,
            damping: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            use_adam: true,
            use_natural_gradient: true,
            independent_fisher_batch: false,
            fisher_samples: 0,
            adiabatic_k: 0.0,
            reverse_adiabatic: false,
            penalty_weight: 0.0,
            final_samples: 16_384,
            clip_norm: 100.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.final_samples == 0 {
            return bad("final sample count must be positive");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("learning rate must be a nonnegative number");
        }
        if !(self.damping >= 0.0) || (self.use_natural_gradient && self.damping == 0.0) {
            return bad("damping must be positive when the natural gradient is on");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("Adam rates must satisfy 0 <= beta < 1 and eps > 0");
        }
        if !(self.adiabatic_k >= 0.0) {
            return bad("adiabatic rate must be nonnegative");
        }
        if !(self.penalty_weight >= 0.0) {
            return bad("penalty weight must be nonnegative");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }

    /// Coupling `α` at iteration `t`.
    pub fn alpha_at(&self, t: usize) -> f64 {
        if self.adiabatic_k == 0.0 {
            return 1.0;
        }
        let frac = t as f64 / self.iterations.max(1) as f64;
        let a = adiabatic_alpha(frac, self.adiabatic_k);
        if self.reverse_adiabatic {
            1.0 - a
        } else {
            a
        }
    }

    pub fn penalty_at(&self, t: usize) -> f64 {
        self.penalty_weight * (1.0 - t as f64 / self.iterations.max(1) as f64).max(0.0)
    }
}

/// One iteration of the run history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub energy: f64,
    pub stderr: f64,
    pub alpha: f64,
    pub lr: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunHistory {
    pub rows: Vec<HistoryRow>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome<D> {
    pub model: D,
    pub history: RunHistory,
    /// Energy of the target Hamiltonian from fresh samples.
    pub final_energy: EnergyEstimate,
}

/// A [`train`] run that stopped early; carries the history so far.
#[derive(Clone, Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub history: RunHistory,
}

const DIVERGE_PATIENCE: usize = 50;

/// [`train_with_clock`] with a clock that always reads 0.
pub fn train<D: FlowDensity + Clone>(
    density: D,
    h: &QuarticHamiltonian,
    cfg: &OptimizerConfig,
) -> core::result::Result<TrainOutcome<D>, TrainFailure> {
    train_with_clock(density, h, cfg, &mut || 0.0)
}

/// Runs `cfg.iterations` optimizer steps on `density` for `h`.
///
/// Each step samples `x = ±f(z)`, differentiates the adjoint loss (plus
/// the annealed flow-distance penalty) through the samples, optionally
/// preconditions with the damped Fisher matrix, clips the direction to
/// `cfg.clip_norm`, and applies Adam or a plain step at the cosine
/// learning rate. `clock` supplies the seconds column.
pub fn train_with_clock<D: FlowDensity + Clone>(
    mut density: D,
    h: &QuarticHamiltonian,
    cfg: &OptimizerConfig,
    clock: &mut dyn FnMut() -> f64,
) -> core::result::Result<TrainOutcome<D>, TrainFailure> {
    let mut history = RunHistory::default();
    let fail = |error: Error, history: RunHistory| TrainFailure { error, history };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, history));
    }
    if density.dim() != h.dim() {
        let e = Error::DimensionMismatch {
            expected: h.dim(),
            got: density.dim(),
        };
        return Err(fail(e, history));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut params = density.params().to_vec();
    let mut adam = Adam::new(params.len(), cfg.beta1, cfg.beta2, cfg.eps);
    let d = h.dim();
    let mut e0: Option<f64> = None;
    let mut high_streak = 0;
    for t in 0..cfg.iterations {
        let alpha = cfg.alpha_at(t);
        let ham = h.with_alpha(alpha).map_err(|e| fail(e, history.clone()))?;
        let z = rng.normal_matrix(cfg.batch_size, d);
        let signs: Option<Vec<f64>> = density
            .is_symmetrized()
            .then(|| (0..cfg.batch_size).map(|_| rng.sign()).collect());
        let step = pathwise_gradient(&density, &ham, &z, signs.as_deref(), cfg.penalty_at(t));
        let step = match step {
            Ok(s) => s,
            Err(Error::NonFinite(_)) => return Err(fail(Error::Diverged { iteration: t }, history)),
            Err(e) => return Err(fail(e, history)),
        };
        let est = EnergyEstimate::from_values(&step.local).scaled(2.0);
        let mut direction = step.grad;
        if cfg.use_natural_gradient {
            let rows = match cfg.fisher_samples {
                0 => cfg.batch_size,
                k => k.min(cfg.batch_size),
            };
            let fisher_points = if cfg.independent_fisher_batch {
                match density.sample(rows, &mut rng) {
                    Ok(b) => b.points,
                    Err(_) => return Err(fail(Error::Diverged { iteration: t }, history)),
                }
            } else if rows < cfg.batch_size {
                step.points.select_rows(&(0..rows).collect::<Vec<_>>())
            } else {
                step.points
            };
            let scores = param_scores(&density, &fisher_points).map_err(|e| fail(e, history.clone()))?;
            direction = natural_step(&scores, &direction, cfg.damping).map_err(|e| fail(e, history.clone()))?;
        }
        let grad_norm = norm(&direction);
        if grad_norm > cfg.clip_norm {
            let c = cfg.clip_norm / grad_norm;
            direction.iter_mut().for_each(|v| *v *= c);
        }
        let lr = cosine_lr(t, cfg.iterations, cfg.lr);
        if cfg.use_adam {
            adam.update(&mut params, &direction, lr);
        } else {
            for (p, g) in params.iter_mut().zip(&direction) {
                *p -= lr * g;
            }
        }
        history.rows.push(HistoryRow {
            iter: t,
            energy: est.mean,
            stderr: est.stderr,
            alpha,
            lr,
            grad_norm,
            seconds: clock(),
        });
        if !est.mean.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(fail(Error::Diverged { iteration: t }, history));
        }
        let base = *e0.get_or_insert(est.mean);
        if est.mean - base > 10.0 * base.abs().max(1.0) {
            high_streak += 1;
            if high_streak >= DIVERGE_PATIENCE {
                return Err(fail(Error::Diverged { iteration: t }, history));
            }
        } else {
            high_streak = 0;
        }
        density.set_params(&params).map_err(|e| fail(e, history.clone()))?;
    }
    let final_energy = evaluate_energy(&density, h, cfg.final_samples, &mut rng)
        .map_err(|e| fail(e, history.clone()))?;
    Ok(TrainOutcome {
        model: density,
        history,
        final_energy,
    })
}

/// `⟨H⟩` from the adjoint estimator over `count` fresh samples.
pub fn evaluate_energy<D: FlowDensity + ?Sized>(
    density: &D,
    h: &QuarticHamiltonian,
    count: usize,
    rng: &mut RngStream,
) -> Result<EnergyEstimate> {
    let mut batch = density.sample(count, rng)?;
    batch.fill_input_grad(density)?;
    Ok(adjoint_loss(&batch, h)?.scaled(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::DifferentiableProgram;
    use crate::flow::{FlowArchitecture, FlowModel};

    #[test]
    fn cosine_schedule() {
        assert_eq!(cosine_lr(0, 100, 0.01), 0.01);
        assert!(cosine_lr(100, 100, 0.01).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 0.01) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn adiabatic_schedule() {
        assert_eq!(adiabatic_alpha(0.0, 1.0), 1.0);
        assert_eq!(adiabatic_alpha(1.0, 1.0), 0.0);
        let e = core::f64::consts::E;
        let expected = ((-0.5f64).exp() - 1.0 / e) / (1.0 - 1.0 / e);
        assert!((adiabatic_alpha(0.5, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.3775).abs() < 1e-4);
    }

    #[test]
    fn penalty_cases() {
        let z = Matrix::from_rows(&[&[0.1, 0.2], &[-0.3, 0.4]]);
        assert_eq!(flow_distance_penalty(&z, &z, 1.0), 0.0);
        let shifted = z.add(&Matrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0]]));
        assert!((flow_distance_penalty(&z, &shifted, 0.5) - 0.5 * 5.0).abs() < 1e-14);
        assert_eq!(flow_distance_penalty(&z, &shifted, 0.0), 0.0);
    }

    #[test]
    fn adam_first_step_is_sign() {
        let mut adam = Adam::with_defaults(3);
        let mut p = vec![0.0; 3];
        adam.update(&mut p, &[2.0, -0.5, 1e-3], 0.1);
        for (v, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - 0.1 * s).abs() < 1e-5);
        }
    }

    #[test]
    fn adam_zero_and_constant_directions() {
        let mut adam = Adam::with_defaults(1);
        let mut p = [1.5];
        for _ in 0..100 {
            adam.update(&mut p, &[0.0], 0.1);
        }
        assert_eq!(p, [1.5]);
        let mut adam = Adam::with_defaults(1);
        let mut p = [0.0];
        let mut last = 0.0;
        for _ in 0..5000 {
            last = p[0];
            adam.update(&mut p, &[3.0], 0.01);
        }
        assert!(((last - p[0]) - 0.01).abs() < 1e-6);
    }

    #[test]
    fn natural_step_trivial_cases() {
        let g = [1.0, -2.0];
        // identity covariance from ±e_k rows
        let s = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]]);
        let d = natural_step(&s, &g, 0.0).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] + 2.0).abs() < 1e-12);
        let zero = Matrix::zeros(4, 2);
        let d = natural_step(&zero, &g, 0.1).unwrap();
        assert!((d[0] - 10.0).abs() < 1e-12 && (d[1] + 20.0).abs() < 1e-12);
        assert!(matches!(natural_step(&zero, &g, 0.0), Err(Error::Singular)));
    }

    #[test]
    fn conjugate_gradient_matches_dense() {
        let mut rng = RngStream::new(3);
        let s = rng.normal_matrix(40, 300);
        let g: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        let cg = natural_step(&s, &g, 0.1).unwrap();
        let c = center_rows(&s);
        let fisher = c.t_matmul(&c).scale(1.0 / 40.0);
        let dense = solve_damped(&fisher, &g, 0.1).unwrap();
        let err: f64 = cg.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-6 * scale, "{err} vs {scale}");
    }

    #[test]
    fn pathwise_matches_finite_differences() {
        // common random numbers make the sampled loss a smooth function of θ
        let arch = FlowArchitecture::new(2).with_layers(2).with_hidden(6, 1);
        let mut rng = RngStream::new(4);
        let mut m = FlowModel::new(arch, &mut rng).unwrap();
        m.perturb(&mut rng, 0.2);
        let h = crate::hamiltonian::random_hamiltonian(2, &mut rng);
        let z = rng.normal_matrix(64, 2);
        let out = pathwise_gradient(&m, &h, &z, None, 0.3).unwrap();
        let theta = m.params().to_vec();
        for k in (0..theta.len()).step_by(3) {
            let step = 1e-5;
            let mut tp = theta.clone();
            tp[k] += step;
            let mut plus = m.clone();
            plus.set_params(&tp).unwrap();
            tp[k] = theta[k] - step;
            let mut minus = m.clone();
            minus.set_params(&tp).unwrap();
            let lp = pathwise_gradient(&plus, &h, &z, None, 0.3).unwrap().loss;
            let lm = pathwise_gradient(&minus, &h, &z, None, 0.3).unwrap().loss;
            let fd = (lp - lm) / (2.0 * step);
            assert!((fd - out.grad[k]).abs() < 1e-5 * (1.0 + fd.abs()), "param {k}: {} vs {fd}", out.grad[k]);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let arch = FlowArchitecture::new(1);
        let m = FlowModel::new(arch, &mut RngStream::new(1)).unwrap();
        let h = QuarticHamiltonian::oscillator(1);
        let cfg = OptimizerConfig {
            lr: 0.0,
            iterations: 20,
            batch_size: 64,
            final_samples: 64,
            ..Default::default()
        };
        let out = train(m.clone(), &h, &cfg).unwrap();
        assert_eq!(out.model.params(), m.params());
        assert_eq!(out.history.len(), 20);
    }

    #[test]
    fn oscillator_training_descends() {
        let arch = FlowArchitecture::new(1);
        let mut rng = RngStream::new(2);
        let mut m = FlowModel::new(arch, &mut rng).unwrap();
        m.set_params(&[0.7, 0.8]).unwrap();
        let h = QuarticHamiltonian::oscillator(1);
        let cfg = OptimizerConfig {
            iterations: 300,
            batch_size: 256,
            lr: 0.05,
            seed: 3,
            ..Default::default()
        };
        let out = train(m, &h, &cfg).unwrap();
        assert!(out.final_energy.mean < 0.51, "{:?}", out.final_energy);
        let e = out.history.energies();
        assert!(e[e.len() - 1] < e[0]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let m = FlowModel::new(FlowArchitecture::new(1), &mut RngStream::new(1)).unwrap();
        let h = QuarticHamiltonian::oscillator(1);
        let cfg = OptimizerConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(train(m, &h, &cfg), Err(TrainFailure { error: Error::InvalidConfig(_), .. })));
    }
}
