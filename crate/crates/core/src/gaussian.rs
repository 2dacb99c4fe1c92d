//! Real Gaussian trial states `ψ(x) ∝ exp(−½(x−μ)ᵀA(x−μ))` with
//! `A = LLᵀ`, their closed-form energy, and the baseline optimizer.
//!
//! With `C = A⁻¹`, `h = α h_xx` and `v = diag(C) + 2μ⊙μ`:
//!
//! ```text
//! ⟨H⟩ = ¼ tr A + ¼ Σ h⊙C + ½ μᵀhμ
//!     + (1/32) vᵀuv + (1/16) Σ u⊙C⊙C + ¼ μᵀ(u⊙C)μ
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{EnergyEstimate, SampleBatch};
use crate::hamiltonian::QuarticHamiltonian;
use crate::numerics::{norm, solve_upper_t, spd_inverse, Matrix, RngStream};
use num_traits::Float;

/// Mean and Cholesky factor of the precision-like matrix `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mu: Vec<f64>,
    l: Matrix,
}

impl GaussianState {
    /// `L` must be lower-triangular with a positive diagonal.
    pub fn new(mu: Vec<f64>, l: Matrix) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if l.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: l.rows(),
            });
        }
        for i in 0..d {
            if !(l[(i, i)] > 0.0) {
                return Err(Error::NotSpd {
                    pivot: i,
                    value: l[(i, i)],
                });
            }
            for j in i + 1..d {
                if l[(i, j)] != 0.0 {
                    return Err(Error::Domain("factor must be lower-triangular".into()));
                }
            }
        }
        if !l.is_finite() || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian state"));
        }
        Ok(Self { mu, l })
    }

    /// `μ = 0`, `A = I`: the oscillator ground state.
    pub fn standard(d: usize) -> Self {
        Self {
            mu: vec![0.0; d],
            l: Matrix::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn precision(&self) -> Matrix {
        self.l.matmul_t(&self.l)
    }

    /// Number of free parameters, `d + d(d+1)/2`.
    pub fn num_params(&self) -> usize {
        let d = self.dim();
        d + d * (d + 1) / 2
    }

    /// `μ` followed by the rows of `L`'s lower triangle, with the diagonal
    /// stored as its logarithm.
    pub fn to_params(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.mu.clone();
        for i in 0..d {
            for j in 0..i {
                out.push(self.l[(i, j)]);
            }
            out.push(self.l[(i, i)].ln());
        }
        out
    }

    pub fn from_params(d: usize, p: &[f64]) -> Result<Self> {
        if p.len() != d + d * (d + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: d + d * (d + 1) / 2,
                got: p.len(),
            });
        }
        let mut l = Matrix::zeros(d, d);
        let mut k = d;
        for i in 0..d {
            for j in 0..i {
                l[(i, j)] = p[k];
                k += 1;
            }
            l[(i, i)] = p[k].exp();
            k += 1;
        }
        Self::new(p[..d].to_vec(), l)
    }

    /// Exact samples from `|ψ|² = N(μ, A⁻¹/2)` with analytic input gradients.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> SampleBatch {
        let d = self.dim();
        let a = self.precision();
        let mut points = Matrix::zeros(count, d);
        let mut grad = Matrix::zeros(count, d);
        let mut log_density = Vec::with_capacity(count);
        let log_det_a: f64 = 2.0 * self.l.diag().iter().map(|v| v.ln()).sum::<f64>();
        let norm_const = 0.5 * log_det_a - 0.5 * d as f64 * core::f64::consts::PI.ln();
        let mut z = vec![0.0; d];
        for i in 0..count {
            rng.fill_normal(&mut z);
            let y = solve_upper_t(&self.l, &z);
            let row = points.row_mut(i);
            for ((r, yv), m) in row.iter_mut().zip(&y).zip(&self.mu) {
                *r = m + yv * core::f64::consts::FRAC_1_SQRT_2;
            }
            let centered: Vec<f64> = points.row(i).iter().zip(&self.mu).map(|(x, m)| x - m).collect();
            let ac = a.matvec(&centered);
            for (g, v) in grad.row_mut(i).iter_mut().zip(&ac) {
                *g = -2.0 * v;
            }
            let q: f64 = centered.iter().zip(&ac).map(|(c, v)| c * v).sum();
            log_density.push(norm_const - q);
        }
        let mut batch = SampleBatch::new(points, log_density);
        batch.input_grad = Some(grad);
        batch
    }
}

fn check_dims(s: &GaussianState, h: &QuarticHamiltonian) -> Result<()> {
    if s.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: s.dim(),
        });
    }
    Ok(())
}

struct Terms {
    c: Matrix,
    h: Matrix,
    v: Vec<f64>,
    uv: Vec<f64>,
    uc: Matrix,
}

fn terms(s: &GaussianState, ham: &QuarticHamiltonian) -> Result<Terms> {
    check_dims(s, ham)?;
    let c = spd_inverse(&s.precision())?;
    let h = ham.h_xx().scale(ham.alpha());
    let v: Vec<f64> = c.diag().iter().zip(&s.mu).map(|(cii, m)| cii + 2.0 * m * m).collect();
    let uv = ham.u().matvec(&v);
    let uc = ham.u().hadamard(&c);
    Ok(Terms { c, h, v, uv, uc })
}

/// Closed-form `⟨ψ|H|ψ⟩`.
pub fn gaussian_energy_analytic(s: &GaussianState, h: &QuarticHamiltonian) -> Result<f64> {
    let t = terms(s, h)?;
    let mu = &s.mu;
    let vuv: f64 = t.v.iter().zip(&t.uv).map(|(a, b)| a * b).sum();
    let ucc = t.uc.hadamard(&t.c).sum();
    let e = 0.25 * s.precision().trace()
        + 0.25 * t.h.hadamard(&t.c).sum()
        + 0.5 * t.h.quad_form(mu)
        + vuv / 32.0
        + ucc / 16.0
        + 0.25 * t.uc.quad_form(mu);
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite("gaussian energy"))
    }
}

/// Energy and its gradient in the [`GaussianState::to_params`] coordinates.
pub fn gaussian_energy_and_gradient(
    s: &GaussianState,
    ham: &QuarticHamiltonian,
) -> Result<(f64, Vec<f64>)> {
    let e = gaussian_energy_analytic(s, ham)?;
    let t = terms(s, ham)?;
    let d = s.dim();
    let mu = &s.mu;
    let h_mu = t.h.matvec(mu);
    let uc_mu = t.uc.matvec(mu);
    let mut out = Vec::with_capacity(s.num_params());
    for i in 0..d {
        out.push(h_mu[i] + 0.5 * uc_mu[i] + 0.25 * mu[i] * t.uv[i]);
    }
    // ∂E/∂C, then ∂E/∂A = ¼I − C G C and ∂E/∂L = 2 (∂E/∂A) L
    let mut g_c = t.h.scale(0.25).add(&t.uc.scale(0.125));
    for i in 0..d {
        g_c[(i, i)] += t.uv[i] / 16.0;
        for j in 0..d {
            g_c[(i, j)] += 0.25 * ham.u()[(i, j)] * mu[i] * mu[j];
        }
    }
    let g_a = t.c.matmul(&g_c).matmul(&t.c).scale(-1.0).add_diag(0.25);
    let g_l = g_a.matmul(&s.l).scale(2.0);
    for i in 0..d {
        for j in 0..i {
            out.push(g_l[(i, j)]);
        }
        out.push(g_l[(i, i)] * s.l[(i, i)]);
    }
    Ok((e, out))
}

/// Monte Carlo energy from the adjoint estimator over exact samples.
pub fn gaussian_energy_mc(
    s: &GaussianState,
    h: &QuarticHamiltonian,
    count: usize,
    rng: &mut RngStream,
) -> Result<EnergyEstimate> {
    check_dims(s, h)?;
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let batch = s.sample(count, rng);
    Ok(crate::estimators::adjoint_loss(&batch, h)?.scaled(2.0))
}

/// Settings for [`optimize_gaussian`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 20_000,
            grad_tol: 1e-9,
            seed: 0,
        }
    }
}

/// Best state over all restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianResult {
    pub state: GaussianState,
    pub energy: f64,
    /// Final energy of each restart, in order.
    pub restart_energies: Vec<f64>,
}

fn descend(start: GaussianState, h: &QuarticHamiltonian, cfg: &GaussianConfig) -> Result<(GaussianState, f64)> {
    let d = start.dim();
    let mut p = start.to_params();
    let (mut e, mut g) = gaussian_energy_and_gradient(&start, h)?;
    let mut step = 0.1;
    for _ in 0..cfg.max_iters {
        let gn = norm(&g);
        if gn < cfg.grad_tol {
            break;
        }
        // Armijo backtracking; infeasible or non-finite trials shrink the step
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            if let Ok(s) = GaussianState::from_params(d, &trial) {
                if let Ok((et, gt)) = gaussian_energy_and_gradient(&s, h) {
                    if et <= e - 1e-4 * step * gn * gn {
                        accepted = Some((trial, et, gt));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((trial, et, gt)) = accepted else { break };
        let converged = (e - et).abs() <= 1e-15 * e.abs().max(1.0);
        p = trial;
        e = et;
        g = gt;
        step *= 2.0;
        if converged {
            break;
        }
        if e < -1e12 {
            return Err(Error::Diverged { iteration: 0 });
        }
    }
    Ok((GaussianState::from_params(d, &p)?, e))
}

/// Gradient descent on `(μ, L)` from `cfg.restarts` starting points; the
/// first starts at the standard state and the rest are random.
pub fn optimize_gaussian(h: &QuarticHamiltonian, cfg: &GaussianConfig) -> Result<GaussianResult> {
    let d = h.dim();
    if cfg.restarts == 0 {
        return Err(Error::InvalidConfig("at least one restart is needed".into()));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut best: Option<(GaussianState, f64)> = None;
    let mut restart_energies = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let start = if r == 0 {
            GaussianState::standard(d)
        } else {
            let n = d + d * (d + 1) / 2;
            let p: Vec<f64> = (0..n).map(|_| 0.5 * rng.normal()).collect();
            GaussianState::from_params(d, &p)?
        };
        let (state, e) = descend(start, h, cfg)?;
        restart_energies.push(e);
        if best.as_ref().is_none_or(|(_, be)| e < *be) {
            best = Some((state, e));
        }
    }
    let (state, energy) = best.expect("at least one restart");
    Ok(GaussianResult {
        state,
        energy,
        restart_energies,
    })
}
