//! Gradient engine: a batched reverse-mode tape plus the
//! [`DifferentiableProgram`] abstraction used for scores and input
//! gradients of log-densities.

mod graph;

use alloc::vec::Vec;

pub use graph::{Graph, Var};


use crate::error::{Error, Result};
use crate::numerics::Matrix;
use num_traits::Float;

/// A parametrized map from points in `R^d` to a scalar, expressed on a
/// [`Graph`] so that it can be differentiated in both its inputs and its
/// parameters.
pub trait DifferentiableProgram {
    /// Input dimension.
    fn dim(&self) -> usize;

    /// Flat parameter vector.
    fn params(&self) -> &[f64];

    /// Shapes of the parameter blocks; sizes sum to `params().len()`.
    fn param_shapes(&self) -> Vec<(usize, usize)>;

    /// Builds one scalar output per row of `x` (an `N×1` node).
    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var;

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

/// Registers the program's parameters as leaves of `g`.
pub fn bind_params<P: DifferentiableProgram + ?Sized>(g: &mut Graph, prog: &P) -> Vec<Var> {
    bind_flat_params(g, prog.params(), &prog.param_shapes())
}

/// Splits `flat` into parameter leaves of the given shapes.
pub fn bind_flat_params(g: &mut Graph, flat: &[f64], shapes: &[(usize, usize)]) -> Vec<Var> {
    let mut out = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for &(r, c) in shapes {
        let block = flat[offset..offset + r * c].to_vec();
        out.push(g.param(Matrix::from_vec(r, c, block)));
        offset += r * c;
    }
    assert_eq!(offset, flat.len(), "parameter shapes do not cover the flat vector");
    out
}

fn check_input<P: DifferentiableProgram + ?Sized>(prog: &P, xs: &Matrix) -> Result<()> {
    if xs.cols() != prog.dim() {
        return Err(Error::DimensionMismatch {
            expected: prog.dim(),
            got: xs.cols(),
        });
    }
    if !xs.is_finite() {
        return Err(Error::NonFinite("program input"));
    }
    Ok(())
}

fn finite(m: Matrix, what: &'static str) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Program output for every row of `xs`.
pub fn evaluate<P: DifferentiableProgram + ?Sized>(prog: &P, xs: &Matrix) -> Result<Vec<f64>> {
    check_input(prog, xs)?;
    let mut g = Graph::new();
    let theta = bind_params(&mut g, prog);
    let x = g.data(xs.clone());
    let out = prog.build(&mut g, x, &theta);
    Ok(finite(g.value(out).clone(), "program output")?.into_vec())
}

/// Values and input gradients (`N×d`) for every row of `xs`.
pub fn value_and_input_gradients<P: DifferentiableProgram + ?Sized>(
    prog: &P,
    xs: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    check_input(prog, xs)?;
    let mut g = Graph::new();
    let theta = bind_params(&mut g, prog);
    let x = g.data(xs.clone());
    let out = prog.build(&mut g, x, &theta);
    let values = finite(g.value(out).clone(), "program output")?.into_vec();
    let grads = g.gradients(out, &[x]).pop().expect("one gradient");
    Ok((values, finite(grads, "input gradient")?))
}

/// Input gradients (`N×d`), one row per point.
pub fn input_gradients<P: DifferentiableProgram + ?Sized>(prog: &P, xs: &Matrix) -> Result<Matrix> {
    value_and_input_gradients(prog, xs).map(|(_, g)| g)
}

/// Per-sample parameter gradients (`N×n`), one row per point.
pub fn param_scores<P: DifferentiableProgram + ?Sized>(prog: &P, xs: &Matrix) -> Result<Matrix> {
    check_input(prog, xs)?;
    let mut g = Graph::new();
    let theta = bind_params(&mut g, prog);
    let x = g.data(xs.clone());
    let out = prog.build(&mut g, x, &theta);
    if !g.value(out).is_finite() {
        return Err(Error::NonFinite("program output"));
    }
    finite(g.per_sample_gradients(out, &theta, xs.rows())?, "parameter gradient")
}

/// Gradient of the program output at a single point with respect to the
/// parameters.
pub fn param_gradient<P: DifferentiableProgram + ?Sized>(prog: &P, x: &[f64]) -> Result<Vec<f64>> {
    param_scores(prog, &Matrix::row_vector(x)).map(Matrix::into_vec)
}

/// Gradient of the program output at a single point with respect to `x`.
pub fn input_gradient<P: DifferentiableProgram + ?Sized>(prog: &P, x: &[f64]) -> Result<Vec<f64>> {
    input_gradients(prog, &Matrix::row_vector(x)).map(Matrix::into_vec)
}

/// Log-density of the 1-D normal family with parameters `(μ, log σ)`.
///
/// Serves as the reference program in tests and in the Fisher-geometry
/// checks, where its information matrix is known in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalLogDensity {
    params: [f64; 2],
}

impl NormalLogDensity {
    pub fn new(mean: f64, log_sigma: f64) -> Self {
        Self {
            params: [mean, log_sigma],
        }
    }

    pub fn mean(&self) -> f64 {
        self.params[0]
    }

    pub fn log_sigma(&self) -> f64 {
        self.params[1]
    }
}

impl DifferentiableProgram for NormalLogDensity {
    fn dim(&self) -> usize {
        1
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        alloc::vec![(1, 1), (1, 1)]
    }

    fn build(&self, g: &mut Graph, x: Var, theta: &[Var]) -> Var {
        // -(x-μ)²/(2σ²) - log σ - ½ log 2π
        let (mu, log_sigma) = (theta[0], theta[1]);
        let neg_mu = g.neg(mu);
        let centered = g.add_row(x, neg_mu);
        let neg_ls = g.neg(log_sigma);
        let inv_sigma = g.exp(neg_ls);
        let z = g.mul_row(centered, inv_sigma);
        let z2 = g.square(z);
        let quad = g.scale(z2, -0.5);
        let shifted = g.add_row(quad, neg_ls);
        g.add_scalar(shifted, -0.5 * (2.0 * core::f64::consts::PI).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;

    impl DifferentiableProgram for Constant {
        fn dim(&self) -> usize {
            2
        }
        fn params(&self) -> &[f64] {
            &[1.5, -2.0]
        }
        fn param_shapes(&self) -> Vec<(usize, usize)> {
            alloc::vec![(1, 2)]
        }
        fn build(&self, g: &mut Graph, x: Var, _theta: &[Var]) -> Var {
            let z = g.scale(x, 0.0);
            let s = g.sum_cols(z);
            g.add_scalar(s, 3.0)
        }
    }

    #[test]
    fn normal_gradients_at_reference_point() {
        let p = NormalLogDensity::new(0.0, 0.0);
        let g = param_gradient(&p, &[1.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn standard_normal_input_gradient() {
        let p = NormalLogDensity::new(0.0, 0.0);
        let g = input_gradient(&p, &[2.0]).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_program_has_zero_parameter_gradient() {
        let g = param_gradient(&Constant, &[0.3, 0.4]).unwrap();
        assert_eq!(g, alloc::vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = NormalLogDensity::new(0.0, 0.0);
        assert!(matches!(
            param_gradient(&p, &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn overflowing_program_reports_non_finite() {
        let p = NormalLogDensity::new(0.0, -400.0);
        assert!(matches!(evaluate(&p, &Matrix::row_vector(&[1.0])), Err(Error::NonFinite(_))));
    }
}
