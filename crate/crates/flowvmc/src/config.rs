//! Subcommand arguments, config-file merging and validation.
//!
//! Every argument struct doubles as the schema of its `--config` JSON
//! file; a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::json::read_json;

/// Merges `file` into `self` wherever a flag was not given.
pub trait Merge: Sized {
    fn merge(self, file: Self) -> Self;
}

macro_rules! merge_fields {
    ($ty:ty { $($f:ident),* $(,)? }) => {
        impl Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self {
                    config: self.config,
                    $($f: self.$f.or(file.$f),)*
                }
            }
        }
    };
}

/// Loads `--config` (if any) and merges it under the flags.
pub fn with_config<T>(args: T, config: Option<&Path>) -> CliResult<T>
where
    T: Merge + for<'de> Deserialize<'de>,
{
    match config {
        Some(p) => {
            let file: T = read_json(p).map_err(|e| match e {
                CliError::Json { path, source } => CliError::Usage(format!("{}: {source}", path.display())),
                other => other,
            })?;
            Ok(args.merge(file))
        }
        None => Ok(args),
    }
}

/// `FLOWVMC_SEED`, if set and valid.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("FLOWVMC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("FLOWVMC_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn require<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing config key `{key}`")))
}

fn positive(v: usize, key: &str) -> CliResult<usize> {
    if v == 0 {
        Err(CliError::Usage(format!("`{key}` must be positive")))
    } else {
        Ok(v)
    }
}

fn seeds(seed: Option<u64>, list: Option<Vec<u64>>) -> CliResult<Vec<u64>> {
    match (list, seed) {
        (Some(l), _) if !l.is_empty() => Ok(l),
        (_, Some(s)) => Ok(vec![s]),
        _ => Ok(vec![env_seed()?.unwrap_or(0)]),
    }
}

/// Hamiltonian source: `random`, `oscillator`, or a JSON file path.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Random,
    Oscillator,
    File(PathBuf),
}

impl HamiltonianSpec {
    pub fn parse(s: Option<&str>) -> Self {
        match s {
            None | Some("random") => HamiltonianSpec::Random,
            Some("oscillator") => HamiltonianSpec::Oscillator,
            Some(path) => HamiltonianSpec::File(PathBuf::from(path)),
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeArgs {
    /// JSON file with any of these options (flags win).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Configuration-space dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// `random`, `oscillator`, or a Hamiltonian JSON file.
    #[arg(long)]
    pub hamiltonian: Option<String>,
    /// Seed (falls back to FLOWVMC_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated seed list; overrides --seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// Precondition with the damped Fisher matrix.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub natural: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub adam: Option<bool>,
    /// Rows of each batch used for the Fisher matrix (0 = all).
    #[arg(long)]
    pub fisher_samples: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub independent_fisher_batch: Option<bool>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Train the Z2-symmetrized mixture.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub symmetrize: Option<bool>,
    /// Adiabatic rate k (0 disables).
    #[arg(long)]
    pub adiabatic_k: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reverse_adiabatic: Option<bool>,
    /// Initial flow-distance penalty weight.
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub final_samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Zero the wall-clock column so reruns are byte-identical.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
    /// Worker threads for seed sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
}

merge_fields!(OptimizeArgs {
    dim, hamiltonian, seed, seeds, iters, batch, lr, damping, natural, adam, fisher_samples,
    independent_fisher_batch, layers, width, depth, symmetrize, adiabatic_k, reverse_adiabatic,
    penalty, final_samples, out, deterministic, jobs,
});

/// Fully resolved `optimize` settings, echoed into every run directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeConfig {
    pub dim: usize,
    pub hamiltonian: HamiltonianSpec,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub damping: f64,
    pub natural_gradient: bool,
    pub adam: bool,
    pub fisher_samples: usize,
    pub independent_fisher_batch: bool,
    pub layers: usize,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub symmetrize: bool,
    pub adiabatic_k: f64,
    pub reverse_adiabatic: bool,
    pub penalty_weight: f64,
    pub final_samples: usize,
    pub out: PathBuf,
    pub deterministic: bool,
    pub jobs: usize,
}

impl OptimizeArgs {
    pub fn resolve(self) -> CliResult<OptimizeConfig> {
        let args = with_config(self.clone(), self.config.as_deref())?;
        let hamiltonian = HamiltonianSpec::parse(args.hamiltonian.as_deref());
        let dim = match (&hamiltonian, args.dim) {
            (HamiltonianSpec::File(p), d) => {
                let file: crate::formats::json::HamiltonianFile = read_json(p)?;
                if d.is_some_and(|d| d != file.dim) {
                    return Err(CliError::Usage(format!("--dim disagrees with {}", p.display())));
                }
                file.dim
            }
            (_, d) => require(d, "dim")?,
        };
        let defaults = flowvmc_core::optimize::OptimizerConfig::default();
        let arch = flowvmc_core::flow::FlowArchitecture::new(dim.max(1));
        let cfg = OptimizeConfig {
            dim: positive(dim, "dim")?,
            hamiltonian,
            seeds: seeds(args.seed, args.seeds)?,
            iterations: args.iters.unwrap_or(defaults.iterations),
            batch_size: positive(args.batch.unwrap_or(defaults.batch_size), "batch")?,
            lr: args.lr.unwrap_or(defaults.lr),
            damping: args.damping.unwrap_or(defaults.damping),
            natural_gradient: args.natural.unwrap_or(true),
            adam: args.adam.unwrap_or(true),
            fisher_samples: args.fisher_samples.unwrap_or(defaults.fisher_samples),
            independent_fisher_batch: args.independent_fisher_batch.unwrap_or(false),
            layers: args.layers.unwrap_or(arch.layers),
            hidden_width: args.width.unwrap_or(arch.hidden_width),
            hidden_depth: args.depth.unwrap_or(arch.hidden_depth),
            symmetrize: args.symmetrize.unwrap_or(false),
            adiabatic_k: args.adiabatic_k.unwrap_or(0.0),
            reverse_adiabatic: args.reverse_adiabatic.unwrap_or(false),
            penalty_weight: args.penalty.unwrap_or(0.0),
            final_samples: positive(args.final_samples.unwrap_or(defaults.final_samples), "final_samples")?,
            out: args.out.unwrap_or_else(|| PathBuf::from("flowvmc-out")),
            deterministic: args.deterministic.unwrap_or(false),
            jobs: positive(args.jobs.unwrap_or(1), "jobs")?,
        };
        cfg.optimizer(0).validate()?;
        cfg.architecture().validate()?;
        Ok(cfg)
    }
}

impl OptimizeConfig {
    pub fn optimizer(&self, seed: u64) -> flowvmc_core::optimize::OptimizerConfig {
        flowvmc_core::optimize::OptimizerConfig {
            batch_size: self.batch_size,
            iterations: self.iterations,
            lr: self.lr,
            damping: self.damping,
            use_adam: self.adam,
            use_natural_gradient: self.natural_gradient,
            independent_fisher_batch: self.independent_fisher_batch,
            fisher_samples: self.fisher_samples,
            adiabatic_k: self.adiabatic_k,
            reverse_adiabatic: self.reverse_adiabatic,
            penalty_weight: self.penalty_weight,
            final_samples: self.final_samples,
            seed,
            ..Default::default()
        }
    }

    pub fn architecture(&self) -> flowvmc_core::flow::FlowArchitecture {
        flowvmc_core::flow::FlowArchitecture::new(self.dim)
            .with_layers(self.layers)
            .with_hidden(self.hidden_width, self.hidden_depth)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub hamiltonian: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(GaussianArgs { dim, hamiltonian, seed, seeds, restarts, out });

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianRunConfig {
    pub dim: usize,
    pub hamiltonian: HamiltonianSpec,
    pub seeds: Vec<u64>,
    pub restarts: usize,
    pub out: PathBuf,
}

impl GaussianArgs {
    pub fn resolve(self) -> CliResult<GaussianRunConfig> {
        let args = with_config(self.clone(), self.config.as_deref())?;
        let hamiltonian = HamiltonianSpec::parse(args.hamiltonian.as_deref());
        let dim = match (&hamiltonian, args.dim) {
            (HamiltonianSpec::File(p), _) => read_json::<crate::formats::json::HamiltonianFile>(p)?.dim,
            (_, d) => require(d, "dim")?,
        };
        Ok(GaussianRunConfig {
            dim: positive(dim, "dim")?,
            hamiltonian,
            seeds: seeds(args.seed, args.seeds)?,
            restarts: positive(args.restarts.unwrap_or(5), "restarts")?,
            out: args.out.unwrap_or_else(|| PathBuf::from("flowvmc-out")),
        })
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdvpArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Initial log a.
    #[arg(long, allow_hyphen_values = true)]
    pub log_a0: Option<f64>,
    /// Initial b.
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(TdvpArgs { log_a0, b0, t_end, dt, out });

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TdvpConfig {
    pub log_a0: f64,
    pub b0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub out: PathBuf,
}

impl TdvpArgs {
    pub fn resolve(self) -> CliResult<TdvpConfig> {
        let args = with_config(self.clone(), self.config.as_deref())?;
        let cfg = TdvpConfig {
            log_a0: args.log_a0.unwrap_or(0.0),
            b0: args.b0.unwrap_or(0.0),
            t_end: args.t_end.unwrap_or(5.0),
            dt: args.dt.unwrap_or(1e-3),
            out: args.out.unwrap_or_else(|| PathBuf::from("flowvmc-out")),
        };
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(CliError::Usage(format!("`dt` must be positive, got {}", cfg.dt)));
        }
        if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
            return Err(CliError::Usage(format!("`t_end` must be positive, got {}", cfg.t_end)));
        }
        if !(cfg.log_a0.is_finite() && cfg.b0.is_finite()) {
            return Err(CliError::Usage("initial state must be finite".into()));
        }
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Samples per grid point.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of log-spaced values of a.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub a_min: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(VarianceArgs { samples, points, a_min, a_max, seed, out });

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceConfig {
    pub samples: usize,
    pub points: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl VarianceArgs {
    pub fn resolve(self) -> CliResult<VarianceConfig> {
        let args = with_config(self.clone(), self.config.as_deref())?;
        let seed = match args.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        let cfg = VarianceConfig {
            samples: args.samples.unwrap_or(100_000),
            points: args.points.unwrap_or(25),
            a_min: args.a_min.unwrap_or(0.25),
            a_max: args.a_max.unwrap_or(4.0),
            seed,
            out: args.out.unwrap_or_else(|| PathBuf::from("flowvmc-out")),
        };
        if cfg.samples < 2 || cfg.points < 2 {
            return Err(CliError::Usage("`samples` and `points` must be at least 2".into()));
        }
        if !(cfg.a_min > 0.0 && cfg.a_max > cfg.a_min && cfg.a_max.is_finite()) {
            return Err(CliError::Usage("need 0 < a_min < a_max".into()));
        }
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandhamArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

merge_fields!(RandhamArgs { dim, seed, out });

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandhamConfig {
    pub dim: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl RandhamArgs {
    pub fn resolve(self) -> CliResult<RandhamConfig> {
        let args = with_config(self.clone(), self.config.as_deref())?;
        let dim = positive(require(args.dim, "dim")?, "dim")?;
        let seed = match args.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        Ok(RandhamConfig {
            dim,
            seed,
            out: args
                .out
                .unwrap_or_else(|| PathBuf::from(format!("hamiltonian-d{dim}-s{seed}.json"))),
        })
    }
}
