//! Subcommand drivers. Each writes its declared files under `out` and
//! returns a summary value that is also written as `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use flowvmc_core::estimators::{estimator_variance_sweep, variance_closed_form};
use flowvmc_core::flow::{FlowDensity, FlowModel, SymmetrizedDensity};
use flowvmc_core::gaussian::{optimize_gaussian, GaussianConfig};
use flowvmc_core::hamiltonian::{random_hamiltonian, QuarticHamiltonian};
use flowvmc_core::numerics::symmetric_eigen;
use flowvmc_core::optimize::{train_with_clock, RunHistory};
use flowvmc_core::tdvp::{imaginary_time_flow, integrate, tdse_rhs, vn_rhs, Trajectory};
use flowvmc_core::{Matrix, RngStream};
use serde::{Deserialize, Serialize};

use crate::config::{
    GaussianRunConfig, HamiltonianSpec, OptimizeConfig, RandhamConfig, TdvpConfig, VarianceConfig,
};
use crate::error::{CliError, CliResult};
use crate::formats::csv::{self as tables, num, COMPARISON_COLUMNS};
use crate::formats::json::{matrix_rows, read_json, write_json, Checkpoint, GaussianFile, HamiltonianFile};
use crate::formats::svg::{box_plot, histogram2d, line_plot, Series};
use crate::VERSION;

const DENSITY_SAMPLES: usize = 20_000;
const DENSITY_BINS: usize = 48;

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// The Hamiltonian a run with `seed` uses.
pub fn load_hamiltonian(spec: &HamiltonianSpec, dim: usize, seed: u64) -> CliResult<QuarticHamiltonian> {
    match spec {
        HamiltonianSpec::Random => Ok(random_hamiltonian(dim, &mut RngStream::new(seed))),
        HamiltonianSpec::Oscillator => Ok(QuarticHamiltonian::oscillator(dim)),
        HamiltonianSpec::File(p) => read_json::<HamiltonianFile>(p)?.to_hamiltonian(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct RunEcho<'a> {
    version: &'static str,
    seed: u64,
    config: &'a OptimizeConfig,
}

/// Contents of `seed-<s>/summary.json` after `optimize`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub seed: u64,
    pub dim: usize,
    pub symmetrized: bool,
    pub iterations: usize,
    pub energy: f64,
    pub stderr: f64,
    pub final_samples: usize,
    /// Lighter over heavier half-space mass along the principal axis (d = 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_mass_ratio: Option<f64>,
}

/// Runs every seed, `cfg.jobs` at a time; results keep seed order.
pub fn optimize(cfg: &OptimizeConfig) -> CliResult<Vec<RunSummary>> {
    create_dir(&cfg.out)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<RunSummary>>>> =
        Mutex::new((0..cfg.seeds.len()).map(|_| None).collect());
    let workers = cfg.jobs.min(cfg.seeds.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cfg.seeds.len() {
                    break;
                }
                let r = optimize_seed(cfg, cfg.seeds[i]);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    let summaries = results
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every seed runs"))
        .collect::<CliResult<Vec<_>>>()?;
    if summaries.len() > 1 {
        let rows: Vec<Vec<String>> = summaries
            .iter()
            .map(|s| vec![s.seed.to_string(), num(s.energy), num(s.stderr)])
            .collect();
        tables::write_table(&cfg.out.join("summary.csv"), &["seed", "energy", "stderr"], &rows)?;
        let energies = summaries.iter().map(|s| s.energy).collect();
        let svg = box_plot("Final energy over seeds", "energy", &[("flow".to_string(), energies)]);
        write_text(&cfg.out.join("energies.svg"), &svg)?;
    }
    Ok(summaries)
}

fn optimize_seed(cfg: &OptimizeConfig, seed: u64) -> CliResult<RunSummary> {
    let dir = seed_dir(&cfg.out, seed);
    create_dir(&dir)?;
    write_json(&dir.join("config.json"), &RunEcho { version: VERSION, seed, config: cfg })?;
    let h = load_hamiltonian(&cfg.hamiltonian, cfg.dim, seed)?;
    if h.dim() != cfg.dim {
        return Err(CliError::Usage(format!("hamiltonian has dimension {}, expected {}", h.dim(), cfg.dim)));
    }
    write_json(&dir.join("hamiltonian.json"), &HamiltonianFile::new(&h, Some(seed)))?;
    let flow = FlowModel::new(cfg.architecture(), &mut RngStream::new(seed).substream(1))?;
    if cfg.symmetrize {
        run_training(cfg, seed, &dir, &h, SymmetrizedDensity::new(flow))
    } else {
        run_training(cfg, seed, &dir, &h, flow)
    }
}

fn run_training<D: FlowDensity + Clone>(
    cfg: &OptimizeConfig,
    seed: u64,
    dir: &Path,
    h: &QuarticHamiltonian,
    density: D,
) -> CliResult<RunSummary> {
    let start = Instant::now();
    let mut clock = || if cfg.deterministic { 0.0 } else { start.elapsed().as_secs_f64() };
    let outcome = train_with_clock(density, h, &cfg.optimizer(seed), &mut clock);
    let (model, history, energy) = match outcome {
        Ok(o) => (o.model, o.history, o.final_energy),
        Err(f) => {
            write_history(dir, &f.history)?;
            return Err(f.error.into());
        }
    };
    write_history(dir, &history)?;
    write_json(&dir.join("checkpoint.json"), &Checkpoint::new(model.flow(), cfg.symmetrize))?;
    let mode_mass_ratio = if cfg.dim == 2 {
        let batch = model.sample(DENSITY_SAMPLES, &mut RngStream::new(seed).substream(2))?;
        write_text(&dir.join("density.svg"), &density_plot(&batch.points))?;
        Some(mode_mass_ratio(&batch.points))
    } else {
        None
    };
    let summary = RunSummary {
        version: VERSION.to_string(),
        seed,
        dim: cfg.dim,
        symmetrized: cfg.symmetrize,
        iterations: history.len(),
        energy: energy.mean,
        stderr: energy.stderr,
        final_samples: energy.count,
        mode_mass_ratio,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_history(dir: &Path, history: &RunHistory) -> CliResult<()> {
    tables::write_history(&dir.join("history.csv"), history)?;
    let pts = history.rows.iter().map(|r| (r.iter as f64, r.energy)).collect();
    let svg = line_plot("Training energy", "iteration", "energy", &[Series::new("energy", pts)], false);
    write_text(&dir.join("energy.svg"), &svg)
}

/// Mass of the lighter half-space over the heavier one, split through the
/// origin perpendicular to the top eigenvector of `E[x xᵀ]`.
pub fn mode_mass_ratio(points: &Matrix) -> f64 {
    let second = points.t_matmul(points).scale(1.0 / points.rows() as f64);
    let (vals, vecs) = symmetric_eigen(&second);
    let top = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let axis = vecs.col_vec(top);
    let pos = (0..points.rows())
        .filter(|&i| points.row(i).iter().zip(&axis).map(|(a, b)| a * b).sum::<f64>() > 0.0)
        .count();
    let neg = points.rows() - pos;
    pos.min(neg) as f64 / pos.max(neg).max(1) as f64
}

fn density_plot(points: &Matrix) -> String {
    let mut radii: Vec<f64> = (0..points.rows())
        .map(|i| points.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    radii.sort_by(f64::total_cmp);
    let r = 1.1 * radii[(radii.len() * 199) / 200].max(1e-6);
    let mut counts = vec![vec![0u64; DENSITY_BINS]; DENSITY_BINS];
    let bin = |v: f64| ((v + r) / (2.0 * r) * DENSITY_BINS as f64).floor();
    for i in 0..points.rows() {
        let (bx, by) = (bin(points[(i, 0)]), bin(points[(i, 1)]));
        if (0.0..DENSITY_BINS as f64).contains(&bx) && (0.0..DENSITY_BINS as f64).contains(&by) {
            counts[by as usize][bx as usize] += 1;
        }
    }
    histogram2d("Sample density", &counts, -r, r)
}

/// One row of `gaussian` output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianSummary {
    pub seed: u64,
    pub energy: f64,
    pub flow_energy: Option<f64>,
}

pub fn gaussian(cfg: &GaussianRunConfig) -> CliResult<Vec<GaussianSummary>> {
    create_dir(&cfg.out)?;
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let dir = seed_dir(&cfg.out, seed);
        create_dir(&dir)?;
        let h = load_hamiltonian(&cfg.hamiltonian, cfg.dim, seed)?;
        let opt = GaussianConfig {
            restarts: cfg.restarts,
            seed,
            ..Default::default()
        };
        let res = optimize_gaussian(&h, &opt)?;
        let file = GaussianFile {
            version: VERSION.to_string(),
            seed,
            dim: h.dim(),
            mu: res.state.mu().to_vec(),
            l: matrix_rows(res.state.factor()),
            energy: res.energy,
            restarts: cfg.restarts,
            restart_energies: res.restart_energies.clone(),
        };
        write_json(&dir.join("gaussian.json"), &file)?;
        let flow_summary = dir.join("summary.json");
        let flow_energy = if flow_summary.exists() {
            let flow: RunSummary = read_json(&flow_summary)?;
            let row = [seed.to_string(), num(flow.energy), num(flow.stderr), num(res.energy)];
            tables::append_row(&cfg.out.join("comparison.csv"), &COMPARISON_COLUMNS, &row)?;
            Some(flow.energy)
        } else {
            None
        };
        out.push(GaussianSummary {
            seed,
            energy: res.energy,
            flow_energy,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdvpSummary {
    pub version: String,
    pub log_a0: f64,
    pub b0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub vn_max_departure: f64,
    pub tdse_max_departure: f64,
    pub vn_energy_drift: f64,
    pub imaginary_final_energy: f64,
}

pub fn tdvp_demo(cfg: &TdvpConfig) -> CliResult<TdvpSummary> {
    create_dir(&cfg.out)?;
    let theta0 = [cfg.log_a0, cfg.b0];
    let vn = integrate(vn_rhs, theta0, cfg.t_end, cfg.dt)?.into_result()?;
    let tdse = integrate(tdse_rhs, theta0, cfg.t_end, cfg.dt)?.into_result()?;
    let imag = imaginary_time_flow(theta0, cfg.t_end, cfg.dt)?.into_result()?;
    tables::write_trajectory(&cfg.out.join("vn.csv"), &vn)?;
    tables::write_trajectory(&cfg.out.join("tdse.csv"), &tdse)?;
    tables::write_trajectory(&cfg.out.join("imaginary.csv"), &imag)?;
    let curve = |tr: &Trajectory, f: fn(&flowvmc_core::tdvp::TdvpState) -> f64| {
        tr.states.iter().map(|s| (s.t, f(s))).collect::<Vec<_>>()
    };
    let series = [
        Series::new("vN log a", curve(&vn, |s| s.log_a)),
        Series::new("vN b", curve(&vn, |s| s.b)),
        Series::new("TDSE log a", curve(&tdse, |s| s.log_a)),
        Series::new("TDSE b", curve(&tdse, |s| s.b)),
    ];
    write_text(
        &cfg.out.join("tdvp.svg"),
        &line_plot("Variational trajectories", "t", "parameter", &series, false),
    )?;
    let e0 = vn.states[0].energy();
    let summary = TdvpSummary {
        version: VERSION.to_string(),
        log_a0: cfg.log_a0,
        b0: cfg.b0,
        t_end: cfg.t_end,
        dt: cfg.dt,
        vn_max_departure: vn.max_departure(),
        tdse_max_departure: tdse.max_departure(),
        vn_energy_drift: vn.energies().iter().map(|e| (e - e0).abs()).fold(0.0, f64::max),
        imaginary_final_energy: imag.last().energy(),
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSummary {
    pub version: String,
    pub seed: u64,
    pub samples: usize,
    /// Largest `|measured − closed form| / stderr` over the grid.
    pub max_z_canonical: f64,
    pub max_z_adjoint: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn variance_study(cfg: &VarianceConfig) -> CliResult<VarianceSummary> {
    create_dir(&cfg.out)?;
    let grid = log_grid(cfg.a_min, cfg.a_max, cfg.points);
    let rows = estimator_variance_sweep(&grid, cfg.samples, &mut RngStream::new(cfg.seed))?;
    tables::write_variance(&cfg.out.join("variance.csv"), &rows)?;
    let z = |measured: f64, exact: f64, se: f64| {
        if se > 0.0 {
            (measured - exact).abs() / se
        } else if measured == exact {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let (mut zc, mut za) = (0.0f64, 0.0f64);
    for r in &rows {
        let (c, a) = variance_closed_form(r.a);
        zc = zc.max(z(r.var_canonical, c, r.stderr_canonical));
        za = za.max(z(r.var_adjoint, a, r.stderr_adjoint));
    }
    let series = [
        Series::new("canonical", rows.iter().map(|r| (r.a, r.var_canonical)).collect()),
        Series::new("adjoint", rows.iter().map(|r| (r.a, r.var_adjoint)).collect()),
    ];
    write_text(
        &cfg.out.join("variance.svg"),
        &line_plot("Loss estimator variance", "a", "variance", &series, true),
    )?;
    let summary = VarianceSummary {
        version: VERSION.to_string(),
        seed: cfg.seed,
        samples: cfg.samples,
        max_z_canonical: zc,
        max_z_adjoint: za,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn randham(cfg: &RandhamConfig) -> CliResult<()> {
    if let Some(parent) = cfg.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let h = random_hamiltonian(cfg.dim, &mut RngStream::new(cfg.seed));
    write_json(&cfg.out, &HamiltonianFile::new(&h, Some(cfg.seed)))
}
