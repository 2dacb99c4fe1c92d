//! Fisher information, the real quantum metric `g = I/4`, and
//! quadrature distances between 1-D densities and wavefunctions.

use alloc::vec::Vec;

use crate::autodiff::{param_scores, DifferentiableProgram, Graph, Var};
use crate::error::{Error, Result};
use crate::estimators::SampleBatch;
use crate::flow::FlowModel;
use crate::numerics::{symmetric_eigen, trapezoid, Matrix};
use num_traits::Float;

/// Estimated information matrix with a per-entry standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoMatrix {
    pub matrix: Matrix,
    pub stderr: Matrix,
    pub count: usize,
}

impl InfoMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Same estimate with entries and errors multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: self.matrix.scale(c),
            stderr: self.stderr.scale(c.abs()),
            count: self.count,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = symmetric_eigen(&self.matrix);
        vals.first().copied().unwrap_or(0.0)
    }
}

/// Centered empirical covariance of the rows of `scores`.
pub fn fisher_from_scores(scores: &Matrix) -> InfoMatrix {
    let (n, p) = scores.shape();
    let count = n.max(1) as f64;
    let mut mean = alloc::vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(scores.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut sum = Matrix::zeros(p, p);
    let mut sum_sq = Matrix::zeros(p, p);
    let mut c = alloc::vec![0.0; p];
    for i in 0..n {
        for ((ck, v), m) in c.iter_mut().zip(scores.row(i)).zip(&mean) {
            *ck = v - m;
        }
        for j in 0..p {
            for k in j..p {
                let y = c[j] * c[k];
                sum[(j, k)] += y;
                sum_sq[(j, k)] += y * y;
            }
        }
    }
    let mut matrix = Matrix::zeros(p, p);
    let mut stderr = Matrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let m = sum[(j, k)] / count;
            let var = (sum_sq[(j, k)] / count - m * m).max(0.0);
            let se = (var / count).sqrt();
            matrix[(j, k)] = m;
            matrix[(k, j)] = m;
            stderr[(j, k)] = se;
            stderr[(k, j)] = se;
        }
    }
    InfoMatrix {
        matrix,
        stderr,
        count: n,
    }
}

/// Fisher information `Cov[∇_θ log ρ]` from a batch with scores.
pub fn fisher_matrix(batch: &SampleBatch) -> Result<InfoMatrix> {
    let scores = batch.score.as_ref().ok_or(Error::MissingField("scores"))?;
    Ok(fisher_from_scores(scores))
}

/// Real part of the quantum geometric tensor of `ψ = √ρ`, equal to `I/4`.
pub fn quantum_metric_real(batch: &SampleBatch) -> Result<InfoMatrix> {
    fisher_matrix(batch).map(|i| i.scaled(0.25))
}

fn clipped_arccos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// `arccos ∫ √(p q)` for densities sampled on a uniform grid of spacing
/// `h`, each renormalized to unit mass on the grid.
pub fn fisher_rao_distance_1d(p: &[f64], q: &[f64], h: f64) -> f64 {
    assert_eq!(p.len(), q.len(), "grids differ");
    let p: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let q: Vec<f64> = q.iter().map(|v| v.max(0.0)).collect();
    let bc: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).collect();
    let mass = (trapezoid(&p, h) * trapezoid(&q, h)).sqrt();
    clipped_arccos(trapezoid(&bc, h) / mass)
}

/// `arccos |∫ ψ φ|` for real wavefunctions sampled on a uniform grid,
/// each renormalized on the grid.
pub fn fubini_study_distance_1d(psi: &[f64], phi: &[f64], h: f64) -> f64 {
    assert_eq!(psi.len(), phi.len(), "grids differ");
    let inner = |a: &[f64], b: &[f64]| {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        trapezoid(&prod, h)
    };
    let norm = (inner(psi, psi) * inner(phi, phi)).sqrt();
    clipped_arccos(inner(psi, phi).abs() / norm)
}

/// The family `η ↦ ρ_{θ₀ + Jη}` around `η = 0`, with `J` of shape
/// `n × k` for `n` inner parameters.
#[derive(Clone, Debug)]
pub struct ReparamProgram<P> {
    inner: P,
    jac: Matrix,
    base: Vec<f64>,
    eta: Vec<f64>,
}

impl<P: DifferentiableProgram> ReparamProgram<P> {
    pub fn new(inner: P, jac: Matrix) -> Result<Self> {
        let n = inner.num_params();
        if jac.rows() != n || jac.cols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: jac.rows(),
            });
        }
        let base = inner.params().to_vec();
        Ok(Self {
            inner,
            base,
            eta: alloc::vec![0.0; jac.cols()],
            jac,
        })
    }

    pub fn jacobian(&self) -> &Matrix {
        &self.jac
    }
}

impl<P: DifferentiableProgram> DifferentiableProgram for ReparamProgram<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn params(&self) -> &[f64] {
        &self.eta
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        alloc::vec![(1, self.eta.len())]
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        let jt = g.constant(self.jac.transpose());
        let base = g.constant(Matrix::row_vector(&self.base));
        let moved = g.matmul(theta[0], jt);
        let flat = g.add(moved, base);
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (r, c) in self.inner.param_shapes() {
            let idx: Vec<usize> = (offset..offset + r * c).collect();
            let row = g.select_cols(flat, &idx);
            blocks.push(if r == 1 { row } else { g.reshape(row, r, c) });
            offset += r * c;
        }
        self.inner.build(g, x, &blocks)
    }
}

/// Outcome of [`reparam_covariance_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReparamReport {
    /// Information matrix of the reparametrized family.
    pub reparam: InfoMatrix,
    /// `Jᵀ I J` from the original family on the same samples.
    pub transported: Matrix,
    /// Largest entrywise deviation relative to the largest transported entry.
    pub max_rel_deviation: f64,
}

/// Compares the Fisher matrix of `η ↦ ρ_{θ₀+Jη}` with `Jᵀ I(θ₀) J` on a
/// common set of samples.
pub fn reparam_covariance_check<P: DifferentiableProgram + Clone>(
    family: &P,
    jac: &Matrix,
    samples: &Matrix,
) -> Result<ReparamReport> {
    let wrapped = ReparamProgram::new(family.clone(), jac.clone())?;
    let reparam = fisher_from_scores(&param_scores(&wrapped, samples)?);
    let base = fisher_from_scores(&param_scores(family, samples)?);
    let transported = jac.t_matmul(&base.matrix).matmul(jac);
    let scale = transported.max_abs().max(f64::MIN_POSITIVE);
    let max_rel_deviation = reparam.matrix.sub(&transported).max_abs() / scale;
    Ok(ReparamReport {
        reparam,
        transported,
        max_rel_deviation,
    })
}

/// The pushforward of a family through a fixed flow `T`:
/// `log ρ̃(x) = log ρ_θ(T⁻¹x) + log|det ∂T⁻¹/∂x|`.
#[derive(Clone, Debug)]
pub struct PushforwardProgram<P> {
    inner: P,
    map: FlowModel,
}

impl<P: DifferentiableProgram> PushforwardProgram<P> {
    pub fn new(inner: P, map: FlowModel) -> Result<Self> {
        if map.dim() != inner.dim() {
            return Err(Error::DimensionMismatch {
                expected: inner.dim(),
                got: map.dim(),
            });
        }
        Ok(Self { inner, map })
    }

    pub fn map(&self) -> &FlowModel {
        &self.map
    }

    /// `T(z)` for every row.
    pub fn push(&self, z: &Matrix) -> Result<Matrix> {
        self.map.forward_batch(z).map(|(x, _)| x)
    }
}

impl<P: DifferentiableProgram> DifferentiableProgram for PushforwardProgram<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn params(&self) -> &[f64] {
        self.inner.params()
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.inner.param_shapes()
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        let mut fixed = Vec::new();
        let mut offset = 0;
        let flat = self.map.params();
        for (r, c) in self.map.param_shapes() {
            let block = flat[offset..offset + r * c].to_vec();
            fixed.push(g.constant(Matrix::from_vec(r, c, block)));
            offset += r * c;
        }
        let (z, logdet) = self.map.inverse_graph(g, x, &fixed);
        let inner = self.inner.build(g, z, theta);
        g.add(inner, logdet)
    }
}
