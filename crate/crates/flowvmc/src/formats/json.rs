//! JSON documents: Hamiltonians, flow checkpoints, Gaussian results.

use std::fs;
use std::path::Path;

use flowvmc_core::flow::{FlowArchitecture, FlowModel};
use flowvmc_core::gaussian::GaussianState;
use flowvmc_core::hamiltonian::QuarticHamiltonian;
use flowvmc_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(CliError::json(path))
}

/// Pretty-printed with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> CliResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Usage(format!("{what}: rows have different lengths")));
    }
    let data = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_vec(rows.len(), cols, data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianFile {
    pub dim: usize,
    pub alpha: f64,
    pub h_xx: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl HamiltonianFile {
    pub fn new(h: &QuarticHamiltonian, seed: Option<u64>) -> Self {
        Self {
            dim: h.dim(),
            alpha: h.alpha(),
            h_xx: matrix_rows(h.h_xx()),
            u: matrix_rows(h.u()),
            seed,
        }
    }

    pub fn to_hamiltonian(&self) -> CliResult<QuarticHamiltonian> {
        let h_xx = matrix_from_rows(&self.h_xx, "h_xx")?;
        let u = matrix_from_rows(&self.u, "u")?;
        if h_xx.shape() != (self.dim, self.dim) || u.shape() != (self.dim, self.dim) {
            return Err(CliError::Usage(format!("hamiltonian matrices must be {0}x{0}", self.dim)));
        }
        Ok(QuarticHamiltonian::new(h_xx, u, self.alpha)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureFile {
    pub dim: usize,
    pub layers: usize,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub output_affine: bool,
}

impl From<&FlowArchitecture> for ArchitectureFile {
    fn from(a: &FlowArchitecture) -> Self {
        Self {
            dim: a.dim,
            layers: a.layers,
            hidden_width: a.hidden_width,
            hidden_depth: a.hidden_depth,
            output_affine: a.output_affine,
        }
    }
}

impl ArchitectureFile {
    pub fn to_architecture(&self) -> FlowArchitecture {
        FlowArchitecture::new(self.dim)
            .with_layers(self.layers)
            .with_hidden(self.hidden_width, self.hidden_depth)
            .with_output_affine(self.output_affine)
    }
}

/// Trained flow parameters with everything needed to rebuild the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub architecture: ArchitectureFile,
    pub symmetrized: bool,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model: &FlowModel, symmetrized: bool) -> Self {
        use flowvmc_core::autodiff::DifferentiableProgram;
        Self {
            version: crate::VERSION.to_string(),
            architecture: model.architecture().into(),
            symmetrized,
            params: model.params().to_vec(),
        }
    }

    pub fn to_model(&self) -> CliResult<FlowModel> {
        Ok(FlowModel::from_params(self.architecture.to_architecture(), self.params.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianFile {
    pub version: String,
    pub seed: u64,
    pub dim: usize,
    pub mu: Vec<f64>,
    /// Lower-triangular factor of `A`, one row per entry.
    pub l: Vec<Vec<f64>>,
    pub energy: f64,
    pub restarts: usize,
    pub restart_energies: Vec<f64>,
}

impl GaussianFile {
    pub fn to_state(&self) -> CliResult<GaussianState> {
        Ok(GaussianState::new(self.mu.clone(), matrix_from_rows(&self.l, "l")?)?)
    }
}
