//! Normalizing flows over a standard-normal base and the real positive
//! wavefunctions `ψ = √p` they induce.
//!
//! A [`FlowModel`] maps base points `z` to `x = f(z)`. For `d = 1` it is a
//! single learnable elementwise affine map. For `d ≥ 2` it is a stack of
//! affine coupling layers with alternating even/odd masks, optionally
//! followed by an elementwise affine layer. Each coupling layer runs one
//! tanh MLP on the conditioning coordinates and splits its output into a
//! log-scale `s = amp ⊙ tanh(·)` and a shift `t`. The last MLP layer is
//! zero-initialized, so a fresh model is the identity map.
//!
//! [`SymmetrizedDensity`] is the Z2 mixture `½(p(x) + p(−x))`.

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::autodiff::{bind_params, DifferentiableProgram, Graph, Var};
use crate::error::{Error, Result};
use crate::estimators::SampleBatch;
use crate::numerics::{Matrix, RngStream};
use num_traits::Float;

const LN_2: f64 = core::f64::consts::LN_2;

/// Shape of a flow; everything needed to rebuild it from a flat
/// parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowArchitecture {
    pub dim: usize,
    /// Number of coupling layers (unused for `dim = 1`).
    pub layers: usize,
    pub hidden_width: usize,
    /// Number of hidden layers in each coupling MLP.
    pub hidden_depth: usize,
    /// Append an elementwise affine layer after the couplings.
    pub output_affine: bool,
}

impl FlowArchitecture {
    /// Defaults: 4 coupling layers, MLPs of 2 × 64 tanh units, output affine.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            layers: 4,
            hidden_width: 64,
            hidden_depth: 2,
            output_affine: true,
        }
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn with_hidden(mut self, width: usize, depth: usize) -> Self {
        self.hidden_width = width;
        self.hidden_depth = depth;
        self
    }

    pub fn with_output_affine(mut self, on: bool) -> Self {
        self.output_affine = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("flow dimension must be positive".into()));
        }
        if self.dim >= 2 && (self.layers == 0 || self.hidden_width == 0 || self.hidden_depth == 0)
        {
            return Err(Error::InvalidConfig(
                "coupling flows need at least one layer and a non-empty hidden network".into(),
            ));
        }
        Ok(())
    }

    fn build_layers(&self) -> Vec<Layer> {
        if self.dim == 1 {
            return vec![Layer::Affine];
        }
        let even: Rc<[usize]> = (0..self.dim).filter(|i| i % 2 == 0).collect();
        let odd: Rc<[usize]> = (0..self.dim).filter(|i| i % 2 == 1).collect();
        let mut out: Vec<Layer> = (0..self.layers)
            .map(|k| {
                let (cond, trans) = if k % 2 == 0 {
                    (even.clone(), odd.clone())
                } else {
                    (odd.clone(), even.clone())
                };
                Layer::Coupling { cond, trans }
            })
            .collect();
        if self.output_affine {
            out.push(Layer::Affine);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    Affine,
    Coupling {
        cond: Rc<[usize]>,
        trans: Rc<[usize]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    Weight,
    Bias,
    OutWeight,
    OutBias,
    Amplitude,
    LogScale,
    Shift,
}

impl Layer {
    fn blocks(&self, arch: &FlowArchitecture) -> Vec<((usize, usize), Block)> {
        match self {
            Layer::Affine => vec![((1, arch.dim), Block::LogScale), ((1, arch.dim), Block::Shift)],
            Layer::Coupling { cond, trans } => {
                let w = arch.hidden_width;
                let mut out = Vec::with_capacity(2 * arch.hidden_depth + 3);
                let mut fan_in = cond.len();
                for _ in 0..arch.hidden_depth {
                    out.push(((fan_in, w), Block::Weight));
                    out.push(((1, w), Block::Bias));
                    fan_in = w;
                }
                out.push(((w, 2 * trans.len()), Block::OutWeight));
                out.push(((1, 2 * trans.len()), Block::OutBias));
                out.push(((1, trans.len()), Block::Amplitude));
                out
            }
        }
    }
}

/// Normalizing flow with exact density and sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel {
    arch: FlowArchitecture,
    layers: Vec<Layer>,
    shapes: Vec<(usize, usize)>,
    /// Parameter-block range of each layer.
    spans: Vec<Range<usize>>,
    params: Vec<f64>,
}

impl FlowModel {
    /// Identity-initialized model; hidden weights are drawn from
    /// `N(0, 1/fan_in)`.
    pub fn new(arch: FlowArchitecture, rng: &mut RngStream) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut offset = 0;
        let kinds: Vec<Block> = model
            .layers
            .iter()
            .flat_map(|l| l.blocks(&model.arch).into_iter().map(|(_, k)| k))
            .collect();
        for (&(r, c), kind) in model.shapes.iter().zip(kinds) {
            let block = &mut model.params[offset..offset + r * c];
            match kind {
                Block::Weight => {
                    let sd = 1.0 / (r as f64).sqrt();
                    for v in block.iter_mut() {
                        *v = sd * rng.normal();
                    }
                }
                Block::Amplitude => block.iter_mut().for_each(|v| *v = 1.0),
                _ => {}
            }
            offset += r * c;
        }
        Ok(model)
    }

    fn zeros(arch: FlowArchitecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch.build_layers();
        let mut shapes = Vec::new();
        let mut spans = Vec::new();
        for l in &layers {
            let start = shapes.len();
            shapes.extend(l.blocks(&arch).into_iter().map(|(s, _)| s));
            spans.push(start..shapes.len());
        }
        let n = shapes.iter().map(|(r, c)| r * c).sum();
        Ok(Self {
            arch,
            layers,
            shapes,
            spans,
            params: vec![0.0; n],
        })
    }

    /// Rebuilds a model from its architecture and flat parameters.
    pub fn from_params(arch: FlowArchitecture, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        model.set_params(&params)?;
        Ok(model)
    }

    pub fn architecture(&self) -> &FlowArchitecture {
        &self.arch
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow parameters"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Adds `N(0, scale²)` noise to every parameter.
    pub fn perturb(&mut self, rng: &mut RngStream, scale: f64) {
        for p in &mut self.params {
            *p += scale * rng.normal();
        }
    }

    /// Sets the output shift so that the flow pushes the base mean to `shift`.
    ///
    /// Only meaningful on a model whose other layers are the identity.
    pub fn set_output_shift(&mut self, shift: &[f64]) -> Result<()> {
        let Some(last) = self.layers.len().checked_sub(1) else {
            return Err(Error::Unsupported("empty flow"));
        };
        if self.layers[last] != Layer::Affine {
            return Err(Error::Unsupported("flow has no output affine layer"));
        }
        if shift.len() != self.arch.dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.dim,
                got: shift.len(),
            });
        }
        let block = self.spans[last].start + 1;
        let offset: usize = self.shapes[..block].iter().map(|(r, c)| r * c).sum();
        self.params[offset..offset + shift.len()].copy_from_slice(shift);
        Ok(())
    }

    /// Forward map as graph nodes: returns `(x, log|det ∂x/∂z|)`, the
    /// latter as an `N×1` column.
    pub fn forward_graph(&self, g: &mut Graph, z: Var, theta: &[Var]) -> (Var, Var) {
        let mut x = z;
        let mut logdet: Option<Var> = None;
        for (layer, span) in self.layers.iter().zip(&self.spans) {
            let p = &theta[span.clone()];
            let (next, ld) = self.layer_graph(g, layer, x, p, false);
            x = next;
            logdet = Some(accumulate(g, logdet, ld, x));
        }
        (x, logdet.expect("flow has at least one layer"))
    }

    /// Inverse map as graph nodes: returns `(z, log|det ∂z/∂x|)`.
    pub fn inverse_graph(&self, g: &mut Graph, x: Var, theta: &[Var]) -> (Var, Var) {
        let mut z = x;
        let mut logdet: Option<Var> = None;
        for (layer, span) in self.layers.iter().zip(&self.spans).rev() {
            let p = &theta[span.clone()];
            let (next, ld) = self.layer_graph(g, layer, z, p, true);
            z = next;
            logdet = Some(accumulate(g, logdet, ld, z));
        }
        (z, logdet.expect("flow has at least one layer"))
    }

    /// `log p(x)` for every row of `x` as an `N×1` node.
    pub fn log_prob_graph(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        let (z, logdet) = self.inverse_graph(g, x, theta);
        let base = base_log_prob_graph(g, z);
        g.add(base, logdet)
    }

    /// Symmetrized `log ½(p(x) + p(−x))` for every row of `x`.
    pub fn symmetrized_log_prob_graph(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        let n = g.shape(x).0;
        let neg = g.neg(x);
        let both = g.concat_rows(x, neg);
        let lp = self.log_prob_graph(g, both, theta);
        let top = g.slice_rows(lp, 0, n);
        let bottom = g.slice_rows(lp, n, n);
        let mix = g.log_add_exp(top, bottom);
        g.add_scalar(mix, -LN_2)
    }

    /// Log-scale contribution (as a value to be summed per row) and output.
    fn layer_graph(
        &self,
        g: &mut Graph,
        layer: &Layer,
        input: Var,
        p: &[Var],
        inverse: bool,
    ) -> (Var, LogDet) {
        match layer {
            Layer::Affine => {
                let (s, t) = (p[0], p[1]);
                let total = g.sum_cols(s);
                if inverse {
                    let neg_t = g.neg(t);
                    let centered = g.add_row(input, neg_t);
                    let neg_s = g.neg(s);
                    let inv_scale = g.exp(neg_s);
                    let out = g.mul_row(centered, inv_scale);
                    let neg_total = g.neg(total);
                    (out, LogDet::Shared(neg_total))
                } else {
                    let scale = g.exp(s);
                    let scaled = g.mul_row(input, scale);
                    (g.add_row(scaled, t), LogDet::Shared(total))
                }
            }
            Layer::Coupling { cond, trans } => {
                let d = self.arch.dim;
                let depth = self.arch.hidden_depth;
                let xa = g.select_cols(input, cond);
                let xb = g.select_cols(input, trans);
                let mut h = xa;
                for k in 0..depth {
                    let lin = g.matmul(h, p[2 * k]);
                    let biased = g.add_row(lin, p[2 * k + 1]);
                    h = g.tanh(biased);
                }
                let raw = g.matmul(h, p[2 * depth]);
                let raw = g.add_row(raw, p[2 * depth + 1]);
                let m = trans.len();
                let s_idx: Vec<usize> = (0..m).collect();
                let t_idx: Vec<usize> = (m..2 * m).collect();
                let s_raw = g.select_cols(raw, &s_idx);
                let t = g.select_cols(raw, &t_idx);
                let bounded = g.tanh(s_raw);
                let s = g.mul_row(bounded, p[2 * depth + 2]);
                let ld = g.sum_cols(s);
                let yb = if inverse {
                    let shifted = g.sub(xb, t);
                    let neg_s = g.neg(s);
                    let inv_scale = g.exp(neg_s);
                    g.mul(shifted, inv_scale)
                } else {
                    let scale = g.exp(s);
                    let scaled = g.mul(xb, scale);
                    g.add(scaled, t)
                };
                let pa = g.scatter_cols(xa, cond, d);
                let pb = g.scatter_cols(yb, trans, d);
                let out = g.add(pa, pb);
                let ld = if inverse { g.neg(ld) } else { ld };
                (out, LogDet::PerRow(ld))
            }
        }
    }

    fn run(&self, input: &Matrix, inverse: bool) -> Result<(Matrix, Vec<f64>)> {
        self.check_points(input)?;
        let mut g = Graph::new();
        let theta = bind_params(&mut g, self);
        let x = g.data(input.clone());
        let (out, ld) = if inverse {
            self.inverse_graph(&mut g, x, &theta)
        } else {
            self.forward_graph(&mut g, x, &theta)
        };
        let out = g.value(out).clone();
        let ld = g.value(ld).as_slice().to_vec();
        if !out.is_finite() || ld.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(if inverse { "flow inverse" } else { "flow forward" }));
        }
        Ok((out, ld))
    }

    fn check_points(&self, xs: &Matrix) -> Result<()> {
        if xs.cols() != self.arch.dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.dim,
                got: xs.cols(),
            });
        }
        if !xs.is_finite() {
            return Err(Error::NonFinite("flow input"));
        }
        Ok(())
    }

    /// `x = f(z)` and `log|det ∂x/∂z|` for every row of `z`.
    pub fn forward_batch(&self, z: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        self.run(z, false)
    }

    /// `z = f⁻¹(x)` and `log|det ∂z/∂x|` for every row of `x`.
    pub fn inverse_batch(&self, x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        self.run(x, true)
    }

    pub fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (x, ld) = self.forward_batch(&Matrix::row_vector(z))?;
        Ok((x.into_vec(), ld[0]))
    }

    pub fn inverse(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (z, ld) = self.inverse_batch(&Matrix::row_vector(x))?;
        Ok((z.into_vec(), ld[0]))
    }

    pub fn log_prob_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        self.check_points(xs)?;
        crate::autodiff::evaluate(self, xs)
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_prob_batch(&Matrix::row_vector(x))?[0])
    }

    /// `log ψ = ½ log p`.
    pub fn log_psi(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.log_prob(x)?)
    }

    /// `count` exact samples with their log-densities.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleBatch> {
        assert!(count >= 1, "need at least one sample");
        let z = rng.normal_matrix(count, self.arch.dim);
        let (x, _) = self.forward_batch(&z)?;
        let lp = self.log_prob_batch(&x)?;
        Ok(SampleBatch::new(x, lp))
    }
}

/// Log-determinant contribution of one layer.
enum LogDet {
    /// `N×1` column.
    PerRow(Var),
    /// `1×1` value shared by every row.
    Shared(Var),
}

fn accumulate(g: &mut Graph, acc: Option<Var>, ld: LogDet, rows_of: Var) -> Var {
    match (acc, ld) {
        (Some(a), LogDet::PerRow(c)) => g.add(a, c),
        (Some(a), LogDet::Shared(s)) => g.add_row(a, s),
        (None, LogDet::PerRow(c)) => c,
        (None, LogDet::Shared(s)) => {
            // keep the column row-indexed so per-sample gradients see it
            let sum = g.sum_cols(rows_of);
            let zero = g.scale(sum, 0.0);
            g.add_row(zero, s)
        }
    }
}

/// Standard-normal log-density of every row of `z` as an `N×1` node.
pub fn base_log_prob_graph(g: &mut Graph, z: Var) -> Var {
    let d = g.shape(z).1 as f64;
    let sq = g.square(z);
    let s = g.sum_cols(sq);
    let half = g.scale(s, -0.5);
    g.add_scalar(half, -0.5 * d * (2.0 * PI).ln())
}

impl DifferentiableProgram for FlowModel {
    fn dim(&self) -> usize {
        self.arch.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.shapes.clone()
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        self.log_prob_graph(g, x, theta)
    }
}

/// Z2-symmetrized flow density `½(p(x) + p(−x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedDensity {
    flow: FlowModel,
}

impl SymmetrizedDensity {
    pub fn new(flow: FlowModel) -> Self {
        Self { flow }
    }

    pub fn flow(&self) -> &FlowModel {
        &self.flow
    }

    pub fn into_flow(self) -> FlowModel {
        self.flow
    }

    pub fn log_prob_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        self.flow.check_points(xs)?;
        crate::autodiff::evaluate(self, xs)
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_prob_batch(&Matrix::row_vector(x))?[0])
    }

    pub fn log_psi(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.log_prob(x)?)
    }

    /// Samples the flow and negates each point with probability ½.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleBatch> {
        assert!(count >= 1, "need at least one sample");
        let z = rng.normal_matrix(count, self.flow.arch.dim);
        let (mut x, _) = self.flow.forward_batch(&z)?;
        for i in 0..count {
            let s = rng.sign();
            x.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let lp = self.log_prob_batch(&x)?;
        Ok(SampleBatch::new(x, lp))
    }
}

impl DifferentiableProgram for SymmetrizedDensity {
    fn dim(&self) -> usize {
        self.flow.arch.dim
    }

    fn params(&self) -> &[f64] {
        &self.flow.params
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.flow.shapes.clone()
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        self.flow.symmetrized_log_prob_graph(g, x, theta)
    }
}

/// A trainable flow density: either a plain flow or its Z2 mixture.
pub trait FlowDensity: DifferentiableProgram {
    fn flow(&self) -> &FlowModel;

    fn set_params(&mut self, params: &[f64]) -> Result<()>;

    /// Whether samples are reflected with random signs.
    fn is_symmetrized(&self) -> bool;

    fn sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleBatch>;

    fn log_prob_batch(&self, xs: &Matrix) -> Result<Vec<f64>>;
}

impl FlowDensity for FlowModel {
    fn flow(&self) -> &FlowModel {
        self
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        FlowModel::set_params(self, params)
    }

    fn is_symmetrized(&self) -> bool {
        false
    }

    fn sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleBatch> {
        FlowModel::sample(self, count, rng)
    }

    fn log_prob_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        FlowModel::log_prob_batch(self, xs)
    }
}

impl FlowDensity for SymmetrizedDensity {
    fn flow(&self) -> &FlowModel {
        &self.flow
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.flow.set_params(params)
    }

    fn is_symmetrized(&self) -> bool {
        true
    }

    fn sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleBatch> {
        SymmetrizedDensity::sample(self, count, rng)
    }

    fn log_prob_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        SymmetrizedDensity::log_prob_batch(self, xs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{linspace, mean_stderr, trapezoid};

    fn random_flow(arch: FlowArchitecture, seed: u64, scale: f64) -> FlowModel {
        let mut rng = RngStream::new(seed);
        let mut m = FlowModel::new(arch, &mut rng).unwrap();
        m.perturb(&mut rng, scale);
        m
    }

    #[test]
    fn fresh_model_is_identity() {
        for d in [1, 2, 5] {
            let m = FlowModel::new(FlowArchitecture::new(d).with_hidden(8, 2), &mut RngStream::new(1))
                .unwrap();
            let z = RngStream::new(2).normal_matrix(7, d);
            let (x, ld) = m.forward_batch(&z).unwrap();
            assert_eq!(x, z);
            assert!(ld.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn identity_log_prob_at_origin() {
        let m = FlowModel::new(FlowArchitecture::new(1), &mut RngStream::new(1)).unwrap();
        let want = -0.5 * (2.0 * PI).ln();
        assert!((m.log_prob(&[0.0]).unwrap() - want).abs() < 1e-15);
        assert!((m.log_psi(&[0.0]).unwrap() - 0.5 * want).abs() < 1e-15);
    }

    #[test]
    fn affine_logdet_is_log_scale() {
        let arch = FlowArchitecture::new(2).with_layers(1).with_hidden(4, 1);
        let mut m = FlowModel::new(arch, &mut RngStream::new(0)).unwrap();
        let n = m.params.len();
        // output affine: [s0, s1, t0, t1] are the last four parameters
        m.params[n - 3] = 0.7;
        let (x, ld) = m.forward(&[0.4, -1.0]).unwrap();
        assert!((ld - 0.7).abs() < 1e-15);
        assert!((x[1] + 0.7f64.exp()).abs() < 1e-15);
        assert_eq!(x[0], 0.4);
    }

    #[test]
    fn round_trip() {
        let mut rng = RngStream::new(3);
        for d in [1, 2, 5] {
            let m = random_flow(FlowArchitecture::new(d).with_hidden(8, 2), 10 + d as u64, 0.3);
            let x = rng.normal_matrix(200, d);
            let (z, ld_inv) = m.inverse_batch(&x).unwrap();
            let (back, ld_fwd) = m.forward_batch(&z).unwrap();
            assert!(back.sub(&x).max_abs() < 1e-10);
            for (a, b) in ld_inv.iter().zip(&ld_fwd) {
                assert!((a + b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalized_in_one_dimension() {
        let m = random_flow(FlowArchitecture::new(1), 4, 0.5);
        let xs = linspace(-15.0, 15.0, 6001);
        let lp = m.log_prob_batch(&Matrix::column(&xs)).unwrap();
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        assert!((trapezoid(&p, xs[1] - xs[0]) - 1.0).abs() < 1e-6);
        let sym = SymmetrizedDensity::new(m);
        let lp = sym.log_prob_batch(&Matrix::column(&xs)).unwrap();
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        assert!((trapezoid(&p, xs[1] - xs[0]) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetrized_is_even() {
        let m = random_flow(FlowArchitecture::new(3).with_hidden(8, 2), 5, 0.4);
        let sym = SymmetrizedDensity::new(m);
        let x = RngStream::new(6).normal_matrix(50, 3);
        let a = sym.log_prob_batch(&x).unwrap();
        let b = sym.log_prob_batch(&x.scale(-1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetrizing_an_even_density_changes_nothing() {
        // an identity flow with zero shift and any scale is even
        let mut m = FlowModel::new(FlowArchitecture::new(1), &mut RngStream::new(0)).unwrap();
        m.params[0] = 0.3;
        let sym = SymmetrizedDensity::new(m.clone());
        for x in [-2.0, 0.1, 1.7] {
            assert!((sym.log_prob(&[x]).unwrap() - m.log_prob(&[x]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_bookkeeping_and_shift() {
        let mut m = FlowModel::new(FlowArchitecture::new(2).with_hidden(4, 1), &mut RngStream::new(0))
            .unwrap();
        m.set_output_shift(&[1.5, -0.5]).unwrap();
        let batch = m.sample(20_000, &mut RngStream::new(8)).unwrap();
        assert_eq!(batch.log_density, m.log_prob_batch(&batch.points).unwrap());
        for (j, mu) in [1.5, -0.5].iter().enumerate() {
            let (mean, se) = mean_stderr(&batch.points.col_vec(j));
            assert!((mean - mu).abs() < 4.0 * se);
        }
    }

    #[test]
    fn composition_matches_manual_chaining() {
        let arch = FlowArchitecture::new(2).with_layers(2).with_hidden(6, 1).with_output_affine(false);
        let m = random_flow(arch.clone(), 21, 0.5);
        let x = RngStream::new(22).normal_matrix(30, 2);
        // peel layers off one at a time with single-layer models
        let per_layer = m.params.len() / 2;
        let mut second = FlowModel::from_params(arch.clone().with_layers(1), m.params[per_layer..].to_vec())
            .unwrap();
        // the second layer of the stack uses the odd mask
        second.layers = vec![m.layers[1].clone()];
        let first = FlowModel::from_params(arch.with_layers(1), m.params[..per_layer].to_vec()).unwrap();
        let (y, ld2) = second.inverse_batch(&x).unwrap();
        let (z, ld1) = first.inverse_batch(&y).unwrap();
        let full = m.log_prob_batch(&x).unwrap();
        for i in 0..x.rows() {
            let base: f64 = -0.5 * z.row(i).iter().map(|v| v * v).sum::<f64>() - (2.0 * PI).ln();
            let manual = base + ld1[i] + ld2[i];
            assert!((manual - full[i]).abs() < 1e-12, "{manual} vs {}", full[i]);
        }
    }
}
