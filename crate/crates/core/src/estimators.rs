//! Energy estimators for real positive trial states `ψ = √ρ`.
//!
//! The adjoint estimator needs only `∇_x log ρ`:
//!
//! ```text
//! L̂_adj(x) = |∇ log ρ(x)|² / 16 + V(x) / 2,    E[L̂_adj] = ½⟨ψ|Hψ⟩,
//! ```
//!
//! while the canonical local energy
//! `l(x) = −½(Δ log ψ + |∇ log ψ|²) + V(x)` has mean `⟨H⟩` and vanishing
//! variance on eigenstates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::autodiff::{
    input_gradients, param_scores, value_and_input_gradients, DifferentiableProgram, Graph, Var,
};
use crate::error::{Error, Result};
use crate::flow::{FlowModel, SymmetrizedDensity};
use crate::hamiltonian::QuarticHamiltonian;
use crate::numerics::{mean_stderr, Matrix, RngStream};
use num_traits::Float;

/// Points drawn from a Born density together with per-sample quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// One point per row.
    pub points: Matrix,
    /// `log ρ(x)` per point.
    pub log_density: Vec<f64>,
    /// `∇_x log ρ(x)`, one row per point.
    pub input_grad: Option<Matrix>,
    /// `∇_θ log ρ(x)`, one row per point.
    pub score: Option<Matrix>,
    /// Local energy per point.
    pub local_energy: Option<Vec<f64>>,
}

impl SampleBatch {
    pub fn new(points: Matrix, log_density: Vec<f64>) -> Self {
        assert_eq!(points.rows(), log_density.len(), "batch length mismatch");
        Self {
            points,
            log_density,
            input_grad: None,
            score: None,
            local_energy: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Fills `input_grad` from the program's log-density.
    pub fn fill_input_grad<P: DifferentiableProgram + ?Sized>(&mut self, prog: &P) -> Result<()> {
        self.input_grad = Some(input_gradients(prog, &self.points)?);
        Ok(())
    }

    /// Fills `score` from the program's log-density.
    pub fn fill_scores<P: DifferentiableProgram + ?Sized>(&mut self, prog: &P) -> Result<()> {
        self.score = Some(param_scores(prog, &self.points)?);
        Ok(())
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl EnergyEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self {
            mean,
            stderr,
            count: values.len(),
        }
    }

    /// Same estimate with mean and stderr multiplied by `c`.
    pub fn scaled(self, c: f64) -> Self {
        Self {
            mean: c * self.mean,
            stderr: c.abs() * self.stderr,
            count: self.count,
        }
    }
}

/// Per-sample adjoint estimator values `|∇ log ρ|²/16 + V/2`.
pub fn adjoint_local(batch: &SampleBatch, h: &QuarticHamiltonian) -> Result<Vec<f64>> {
    let grad = batch.input_grad.as_ref().ok_or(Error::MissingField("input gradients"))?;
    check_dim(batch, h)?;
    Ok((0..batch.len())
        .map(|i| {
            let g2: f64 = grad.row(i).iter().map(|v| v * v).sum();
            g2 / 16.0 + 0.5 * h.potential(batch.points.row(i))
        })
        .collect())
}

/// Estimate of `𝓛 = ½⟨ψ|Hψ⟩`; twice its mean estimates the energy.
pub fn adjoint_loss(batch: &SampleBatch, h: &QuarticHamiltonian) -> Result<EnergyEstimate> {
    Ok(EnergyEstimate::from_values(&adjoint_local(batch, h)?))
}

fn check_dim(batch: &SampleBatch, h: &QuarticHamiltonian) -> Result<()> {
    if batch.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: batch.dim(),
        });
    }
    Ok(())
}

/// A real positive wavefunction given through `log ψ`.
pub trait WaveFunction {
    fn dim(&self) -> usize;

    /// `log ψ` for every row of `xs`.
    fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>>;

    /// `∇ log ψ` (one row per point) and `Δ log ψ` for every row of `xs`.
    ///
    /// The default uses central differences of `log ψ` with step
    /// `1e-4·(1 + |x_j|)` for both.
    fn grad_and_laplacian(&self, xs: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        let (n, d) = xs.shape();
        let (stencil, steps) = stencil(xs);
        let f = self.log_psi_batch(&stencil)?;
        let mut grad = Matrix::zeros(n, d);
        let mut lap = vec![0.0; n];
        for i in 0..n {
            let f0 = f[i];
            for j in 0..d {
                let h = steps[i * d + j];
                let fp = f[n + 2 * (i * d + j)];
                let fm = f[n + 2 * (i * d + j) + 1];
                grad[(i, j)] = (fp - fm) / (2.0 * h);
                lap[i] += (fp - 2.0 * f0 + fm) / (h * h);
            }
        }
        Ok((grad, lap))
    }
}

/// Rows `x_i` followed by `x_i ± h_ij e_j` pairs, and the steps `h_ij`.
fn stencil(xs: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, d) = xs.shape();
    let mut out = Matrix::zeros(n * (1 + 2 * d), d);
    let mut steps = Vec::with_capacity(n * d);
    for i in 0..n {
        out.row_mut(i).copy_from_slice(xs.row(i));
    }
    for i in 0..n {
        for j in 0..d {
            let h = 1e-4 * (1.0 + xs[(i, j)].abs());
            steps.push(h);
            let r = n + 2 * (i * d + j);
            out.row_mut(r).copy_from_slice(xs.row(i));
            out[(r, j)] += h;
            out.row_mut(r + 1).copy_from_slice(xs.row(i));
            out[(r + 1, j)] -= h;
        }
    }
    (out, steps)
}

/// Exact gradient from the tape and a finite-difference Laplacian.
fn program_grad_and_laplacian<P: DifferentiableProgram>(
    prog: &P,
    xs: &Matrix,
) -> Result<(Matrix, Vec<f64>)> {
    let (n, d) = xs.shape();
    let (stencil, steps) = stencil(xs);
    let (lp, g) = value_and_input_gradients(prog, &stencil)?;
    let mut grad = Matrix::zeros(n, d);
    let mut lap = vec![0.0; n];
    for i in 0..n {
        for j in 0..d {
            grad[(i, j)] = 0.5 * g[(i, j)];
            let h = steps[i * d + j];
            let r = n + 2 * (i * d + j);
            lap[i] += 0.5 * (lp[r] - 2.0 * lp[i] + lp[r + 1]) / (h * h);
        }
    }
    Ok((grad, lap))
}

impl WaveFunction for FlowModel {
    fn dim(&self) -> usize {
        DifferentiableProgram::dim(self)
    }

    fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.log_prob_batch(xs)?.into_iter().map(|v| 0.5 * v).collect())
    }

    fn grad_and_laplacian(&self, xs: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        program_grad_and_laplacian(self, xs)
    }
}

impl WaveFunction for SymmetrizedDensity {
    fn dim(&self) -> usize {
        DifferentiableProgram::dim(self)
    }

    fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.log_prob_batch(xs)?.into_iter().map(|v| 0.5 * v).collect())
    }

    fn grad_and_laplacian(&self, xs: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        program_grad_and_laplacian(self, xs)
    }
}

/// Canonical local energies `−½(Δ log ψ + |∇ log ψ|²) + V` for every row.
pub fn canonical_local_energies<W: WaveFunction + ?Sized>(
    psi: &W,
    h: &QuarticHamiltonian,
    xs: &Matrix,
) -> Result<Vec<f64>> {
    if xs.cols() != h.dim() || psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: xs.cols(),
        });
    }
    let (grad, lap) = psi.grad_and_laplacian(xs)?;
    let out: Vec<f64> = (0..xs.rows())
        .map(|i| {
            let g2: f64 = grad.row(i).iter().map(|v| v * v).sum();
            -0.5 * (lap[i] + g2) + h.potential(xs.row(i))
        })
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("local energy"));
    }
    Ok(out)
}

pub fn canonical_local_energy<W: WaveFunction + ?Sized>(
    psi: &W,
    h: &QuarticHamiltonian,
    x: &[f64],
) -> Result<f64> {
    Ok(canonical_local_energies(psi, h, &Matrix::row_vector(x))?[0])
}

/// Mean local energy, an estimate of `⟨H⟩`.
pub fn energy_from_local(batch: &SampleBatch) -> Result<EnergyEstimate> {
    let l = batch.local_energy.as_ref().ok_or(Error::MissingField("local energies"))?;
    Ok(EnergyEstimate::from_values(l))
}

/// Per-sample REINFORCE terms `(l − b)·½∇_θ log ρ`, one row per sample.
pub fn reinforce_samples(batch: &SampleBatch, baseline: f64) -> Result<Matrix> {
    let l = batch.local_energy.as_ref().ok_or(Error::MissingField("local energies"))?;
    let score = batch.score.as_ref().ok_or(Error::MissingField("parameter scores"))?;
    let mut out = score.scale(0.5);
    for (i, &li) in l.iter().enumerate() {
        let w = li - baseline;
        out.row_mut(i).iter_mut().for_each(|v| *v *= w);
    }
    Ok(out)
}

/// Log-derivative estimate of `∇_θ 𝓛` with a scalar baseline.
pub fn reinforce_gradient(batch: &SampleBatch, baseline: f64) -> Result<Vec<f64>> {
    let terms = reinforce_samples(batch, baseline)?;
    Ok(column_means(&terms))
}

/// Stochastic-reconfiguration baseline `mean(l)`.
pub fn optimal_baseline(batch: &SampleBatch) -> Result<f64> {
    Ok(energy_from_local(batch)?.mean)
}

/// Total variance (trace of the covariance) of the REINFORCE terms.
pub fn reinforce_total_variance(batch: &SampleBatch, baseline: f64) -> Result<f64> {
    let terms = reinforce_samples(batch, baseline)?;
    let n = terms.rows();
    if n < 2 {
        return Ok(0.0);
    }
    let means = column_means(&terms);
    let mut total = 0.0;
    for i in 0..n {
        for (v, m) in terms.row(i).iter().zip(&means) {
            total += (v - m) * (v - m);
        }
    }
    Ok(total / (n - 1) as f64)
}

pub(crate) fn column_means(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    let n = m.rows().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// The 1-D Gaussian family `ψ_a(x) = (a/π)^{1/4} exp(−a x²/2)`
/// parametrized by `log a`; its Born density is `N(0, 1/(2a))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFamily1D {
    log_a: [f64; 1],
}

impl GaussianFamily1D {
    pub fn new(a: f64) -> Self {
        assert!(a > 0.0, "width parameter must be positive");
        Self { log_a: [a.ln()] }
    }

    pub fn a(&self) -> f64 {
        self.log_a[0].exp()
    }

    /// Exact samples with analytic input gradients and scores.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> SampleBatch {
        let a = self.a();
        let sd = (0.5 / a).sqrt();
        let xs: Vec<f64> = (0..count).map(|_| sd * rng.normal()).collect();
        let log_density = xs
            .iter()
            .map(|x| 0.5 * (a / PI).ln() - a * x * x)
            .collect();
        let mut batch = SampleBatch::new(Matrix::column(&xs), log_density);
        batch.input_grad = Some(Matrix::column(&xs.iter().map(|x| -2.0 * a * x).collect::<Vec<_>>()));
        batch.score = Some(Matrix::column(&xs.iter().map(|x| 0.5 - a * x * x).collect::<Vec<_>>()));
        batch
    }

    /// Exact `⟨H⟩` for the oscillator, `(1 + a²)/(4a)`.
    pub fn oscillator_energy(&self) -> f64 {
        let a = self.a();
        (1.0 + a * a) / (4.0 * a)
    }
}

impl DifferentiableProgram for GaussianFamily1D {
    fn dim(&self) -> usize {
        1
    }

    fn params(&self) -> &[f64] {
        &self.log_a
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        vec![(1, 1)]
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        // ½ log a − ½ log π − e^{log a} x²
        let a = g.exp(theta[0]);
        let x2 = g.square(x);
        let neg_a = g.neg(a);
        let quad = g.mul_row(x2, neg_a);
        let half_log_a = g.scale(theta[0], 0.5);
        let shifted = g.add_row(quad, half_log_a);
        g.add_scalar(shifted, -0.5 * PI.ln())
    }
}

impl WaveFunction for GaussianFamily1D {
    fn dim(&self) -> usize {
        1
    }

    fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        let a = self.a();
        Ok(xs
            .as_slice()
            .iter()
            .map(|x| 0.25 * (a / PI).ln() - 0.5 * a * x * x)
            .collect())
    }

    fn grad_and_laplacian(&self, xs: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        let a = self.a();
        Ok((xs.scale(-a), vec![-a; xs.rows()]))
    }
}

/// One row of the estimator-variance study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceRow {
    pub a: f64,
    pub var_canonical: f64,
    pub var_adjoint: f64,
    pub stderr_canonical: f64,
    pub stderr_adjoint: f64,
}

/// Sample variance and its standard error `√((m₄ − s⁴)/n)`.
pub fn variance_with_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let (mean, _) = mean_stderr(values);
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let c = (v - mean) * (v - mean);
        m2 += c;
        m4 += c * c;
    }
    let var = m2 / (n - 1.0);
    let m4 = m4 / n;
    let se = ((m4 - var * var).max(0.0) / n).sqrt();
    (var, se)
}

/// Variances of the canonical (`½ l`) and adjoint loss estimators for the
/// oscillator over the family [`GaussianFamily1D`], one row per `a`.
pub fn estimator_variance_sweep(
    a_grid: &[f64],
    samples: usize,
    rng: &mut RngStream,
) -> Result<Vec<VarianceRow>> {
    let h = QuarticHamiltonian::oscillator(1);
    a_grid
        .iter()
        .map(|&a| {
            if !(a > 0.0) {
                return Err(Error::Domain(alloc::format!("a must be positive, got {a}")));
            }
            let fam = GaussianFamily1D::new(a);
            let batch = fam.sample(samples, rng);
            let can: Vec<f64> = canonical_local_energies(&fam, &h, &batch.points)?
                .into_iter()
                .map(|l| 0.5 * l)
                .collect();
            let adj = adjoint_local(&batch, &h)?;
            let (var_canonical, stderr_canonical) = variance_with_stderr(&can);
            let (var_adjoint, stderr_adjoint) = variance_with_stderr(&adj);
            Ok(VarianceRow {
                a,
                var_canonical,
                var_adjoint,
                stderr_canonical,
                stderr_adjoint,
            })
        })
        .collect()
}

/// Closed-form variances `((1−a²)², (1+a²)²) / (32a²)`.
pub fn variance_closed_form(a: f64) -> (f64, f64) {
    let d = 32.0 * a * a;
    ((1.0 - a * a).powi(2) / d, (1.0 + a * a).powi(2) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::param_gradient;
    use crate::numerics::gauss_hermite_expectation;

    struct Flat;

    impl WaveFunction for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
            Ok(vec![-1.0; xs.rows()])
        }
    }

    #[test]
    fn adjoint_on_ground_state() {
        let h = QuarticHamiltonian::oscillator(1);
        let batch = GaussianFamily1D::new(1.0).sample(100_000, &mut RngStream::new(1));
        let vals = adjoint_local(&batch, &h).unwrap();
        for (v, x) in vals.iter().zip(batch.points.as_slice()) {
            assert!((v - 0.5 * x * x).abs() < 1e-14);
        }
        let est = adjoint_loss(&batch, &h).unwrap();
        assert!((est.mean - 0.25).abs() < 4.0 * est.stderr);
        let (var, se) = variance_with_stderr(&vals);
        assert!((var - 0.125).abs() < 4.0 * se);
    }

    #[test]
    fn adjoint_zero_case_and_missing_gradients() {
        let h = QuarticHamiltonian::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), 1.0).unwrap();
        let mut batch = SampleBatch::new(Matrix::filled(3, 2, 0.7), vec![0.0; 3]);
        assert!(matches!(adjoint_loss(&batch, &h), Err(Error::MissingField(_))));
        batch.input_grad = Some(Matrix::zeros(3, 2));
        assert_eq!(adjoint_loss(&batch, &h).unwrap().mean, 0.0);
    }

    #[test]
    fn canonical_zero_variance_on_ground_state() {
        let h = QuarticHamiltonian::oscillator(1);
        let fam = GaussianFamily1D::new(1.0);
        let xs = RngStream::new(2).normal_matrix(1000, 1).scale(3.0);
        for l in canonical_local_energies(&fam, &h, &xs).unwrap() {
            assert!((l - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn canonical_family_closed_form_and_finite_differences() {
        let h = QuarticHamiltonian::oscillator(1);
        let a: f64 = 2.0;
        let fam = GaussianFamily1D::new(a);
        let xs = Matrix::column(&[-1.3, 0.0, 0.4, 2.2]);
        let analytic = canonical_local_energies(&fam, &h, &xs).unwrap();
        // the default finite-difference path through log ψ only
        struct ByValue(GaussianFamily1D);
        impl WaveFunction for ByValue {
            fn dim(&self) -> usize {
                1
            }
            fn log_psi_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
                self.0.log_psi_batch(xs)
            }
        }
        let fd = canonical_local_energies(&ByValue(fam), &h, &xs).unwrap();
        for (i, x) in xs.as_slice().iter().enumerate() {
            let want = 0.5 * (a + (1.0 - a * a) * x * x);
            assert!((analytic[i] - want).abs() < 1e-13);
            assert!((fd[i] - want).abs() < 1e-6, "{} vs {want}", fd[i]);
        }
    }

    #[test]
    fn canonical_of_flat_state_without_potential() {
        let h = QuarticHamiltonian::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), 1.0).unwrap();
        let l = canonical_local_energy(&Flat, &h, &[0.3, -0.2]).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn energy_from_local_cases() {
        let mut batch = SampleBatch::new(Matrix::zeros(4, 1), vec![0.0; 4]);
        assert!(matches!(energy_from_local(&batch), Err(Error::MissingField(_))));
        batch.local_energy = Some(vec![1.5; 4]);
        let e = energy_from_local(&batch).unwrap();
        assert_eq!((e.mean, e.stderr, e.count), (1.5, 0.0, 4));
        assert_eq!(optimal_baseline(&batch).unwrap(), 1.5);
    }

    #[test]
    fn family_energy_matches_oracle() {
        let h = QuarticHamiltonian::oscillator(1);
        for a in [1.0, 2.0] {
            let fam = GaussianFamily1D::new(a);
            let mut batch = fam.sample(100_000, &mut RngStream::new(3));
            batch.local_energy = Some(canonical_local_energies(&fam, &h, &batch.points).unwrap());
            let e = energy_from_local(&batch).unwrap();
            let exact = fam.oscillator_energy();
            let quad = gauss_hermite_expectation(
                |x| 0.5 * (a + (1.0 - a * a) * x * x),
                0.0,
                0.5 / a,
                16,
            );
            assert!((quad - exact).abs() < 1e-14);
            if a == 1.0 {
                assert!((e.mean - 0.5).abs() < 1e-14 && e.stderr < 1e-14);
            } else {
                assert!((e.mean - 0.625).abs() < 4.0 * e.stderr);
            }
        }
    }

    #[test]
    fn family_program_matches_analytic_score() {
        let fam = GaussianFamily1D::new(1.7);
        let g = param_gradient(&fam, &[0.6]).unwrap();
        assert!((g[0] - (0.5 - 1.7 * 0.36)).abs() < 1e-14);
    }

    #[test]
    fn reinforce_cases() {
        let h = QuarticHamiltonian::oscillator(1);
        for a in [0.5, 1.0, 2.0] {
            let fam = GaussianFamily1D::new(a);
            let mut batch = fam.sample(100_000, &mut RngStream::new(4));
            batch.local_energy = Some(canonical_local_energies(&fam, &h, &batch.points).unwrap());
            let b = optimal_baseline(&batch).unwrap();
            let terms_b = reinforce_samples(&batch, b).unwrap().col_vec(0);
            let terms_0 = reinforce_samples(&batch, 0.0).unwrap().col_vec(0);
            let (m_b, se_b) = mean_stderr(&terms_b);
            let (m_0, se_0) = mean_stderr(&terms_0);
            assert!((m_b - m_0).abs() < 4.0 * (se_b * se_b + se_0 * se_0).sqrt());
            // ∂/∂log a of (1+a²)/(8a)
            let exact = (a * a - 1.0) / (8.0 * a);
            assert!((m_b - exact).abs() < 4.0 * se_b + 1e-15, "a={a}: {m_b} vs {exact}");
            let v_b = reinforce_total_variance(&batch, b).unwrap();
            let v_0 = reinforce_total_variance(&batch, 0.0).unwrap();
            // exact values: V(E l) = 0.4922 at both widths; V(0) = 0.7754 at a = ½, 0.3066 at a = 2
            if a == 0.5 {
                assert!(v_b <= v_0);
            } else if a == 2.0 {
                assert!(v_b > v_0);
            }
        }
        // constant local energy: zero up to the score identity
        let fam = GaussianFamily1D::new(1.3);
        let mut batch = fam.sample(100_000, &mut RngStream::new(5));
        batch.local_energy = Some(vec![2.0; batch.len()]);
        let (m, se) = mean_stderr(&reinforce_samples(&batch, 0.0).unwrap().col_vec(0));
        assert!(m.abs() < 4.0 * se);
    }

    #[test]
    fn variance_sweep_matches_closed_forms() {
        let rows = estimator_variance_sweep(&[0.5, 1.0, 2.0], 100_000, &mut RngStream::new(6)).unwrap();
        for r in rows {
            let (vc, va) = variance_closed_form(r.a);
            if r.a == 1.0 {
                assert!(r.var_canonical < 1e-20);
            } else {
                assert!((r.var_canonical - vc).abs() < 3.0 * r.stderr_canonical);
            }
            assert!((r.var_adjoint - va).abs() < 3.0 * r.stderr_adjoint);
        }
        assert_eq!(variance_closed_form(2.0), (9.0 / 128.0, 25.0 / 128.0));
        assert_eq!(variance_closed_form(1.0).1, 0.125);
    }

    #[test]
    fn flow_local_energy_agrees_with_family() {
        // a 1-D flow with log-scale s is the family with a = e^{−2s}/... σ² = 1/(2a)
        let h = QuarticHamiltonian::oscillator(1);
        let mut flow = FlowModel::new(crate::flow::FlowArchitecture::new(1), &mut RngStream::new(0)).unwrap();
        let a: f64 = 2.0;
        let s = (0.5 / a).sqrt().ln();
        flow.set_params(&[s, 0.0]).unwrap();
        let fam = GaussianFamily1D::new(a);
        let xs = Matrix::column(&[-1.0, 0.2, 0.9]);
        let lf = canonical_local_energies(&flow, &h, &xs).unwrap();
        let lg = canonical_local_energies(&fam, &h, &xs).unwrap();
        for (u, v) in lf.iter().zip(&lg) {
            assert!((u - v).abs() < 1e-6);
        }
    }
}
