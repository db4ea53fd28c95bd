//! Experiment orchestration: entropy series, rate sweeps and Husimi analysis.
//!
//! Each experiment maps over `(k, initial condition)` pairs on a rayon pool,
//! gathers results in input order, and hands a record to a single writer.
//! Every CSV carries the SHA-256 of the canonical configuration so outputs
//! can be matched to the JSON summary that embeds the configuration itself.

pub mod config;
pub mod io;
mod plots;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ConfigError, ExperimentConfig, InitialCondition, Point, PRESETS};

use crate::error::Error;
use crate::evolution::{
    evolve_series, linear_entropy, reduced_density, BipartiteState, EntropySeries, FloquetSystem, ReducedDensity,
    SystemKind,
};
use crate::husimi::{find_minima, husimi_grid, HusimiGrid, MinimaReport, Scale};
use crate::linalg::CVector;
use crate::perturbation::{
    d_matrix, fit_decay, heisenberg_correlations, rate_result, s_pt_series, slope_over, DMatrix, DecayFit, RateResult,
};
use crate::rotor::torus_coherent;
use crate::top::spin_coherent;

/// Why an experiment could not complete.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit status: 2 for configuration errors, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

/// Exit status for a completed experiment whose fits failed outside a sweep.
pub const EXIT_FIT_FAILURE: i32 = 4;

/// Provenance shared by all experiment records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub warnings: Vec<String>,
}

impl RecordHeader {
    fn new(experiment: &str, cfg: &ExperimentConfig, started: Instant, warnings: Vec<String>) -> Self {
        RecordHeader {
            experiment: experiment.into(),
            config: cfg.clone(),
            config_sha256: cfg.sha256(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            warnings,
        }
    }
}

/// Exact entropy and uncoupled correlations for one `(k, IC)` pair.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub exact: EntropySeries,
    pub d: DMatrix,
    pub eps: f64,
    pub hbar: f64,
}

/// Source of trajectories; replaced by a test double in pipeline tests.
pub trait Dynamics: Sync {
    fn trajectory(&self, k: f64, ic: &InitialCondition) -> crate::Result<Trajectory>;
}

/// The coupled maps described by a configuration.
#[derive(Debug, Clone, Copy)]
pub struct MapDynamics<'a> {
    pub cfg: &'a ExperimentConfig,
}

impl MapDynamics<'_> {
    fn system(&self, k: f64, eps: f64) -> crate::Result<FloquetSystem> {
        match self.cfg.system.kind {
            SystemKind::Top => {
                let p = self.cfg.top_params(k)?;
                FloquetSystem::tops(&p, &p, eps)
            }
            SystemKind::Rotor => {
                let p = self.cfg.rotor_params(k)?;
                FloquetSystem::rotors(&p, &p, eps)
            }
        }
    }

    fn state(&self, point: &Point) -> crate::Result<CVector> {
        match *point {
            Point::Top { theta, phi } => Ok(spin_coherent(&self.cfg.top_params(0.0)?, theta, phi)),
            Point::Rotor { position, momentum, sigma } => {
                torus_coherent(&self.cfg.rotor_params(0.0)?, position, momentum, sigma)
            }
        }
    }
}

impl Dynamics for MapDynamics<'_> {
    fn trajectory(&self, k: f64, ic: &InitialCondition) -> crate::Result<Trajectory> {
        let sys = self.system(k, self.cfg.eps)?;
        let psi1 = self.state(&ic.first)?;
        let psi2 = self.state(&ic.second)?;
        let exact = evolve_series(&sys, &BipartiteState::product(&psi1, &psi2), self.cfg.steps, self.cfg.entropy_stride)?;
        let (q1, q2): (Vec<_>, Vec<_>) = sys.factors.iter().cloned().unzip();
        let c1 = heisenberg_correlations(&sys.u1, &q1, &psi1, self.cfg.steps)?;
        let d = if ic.first == ic.second {
            d_matrix(&c1, &c1)?
        } else {
            let c2 = heisenberg_correlations(&sys.u2, &q2, &psi2, self.cfg.steps)?;
            d_matrix(&c1, &c2)?
        };
        Ok(Trajectory { exact, d, eps: sys.eps, hbar: sys.hbar })
    }
}

fn pool(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<rayon::ThreadPool, RunError> {
    let n = threads.or(cfg.threads).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))
}

fn pairs(cfg: &ExperimentConfig) -> Vec<(usize, f64, usize, InitialCondition)> {
    let ics = cfg.initial_conditions();
    cfg.k
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| ics.iter().enumerate().map(move |(ii, ic)| (ki, k, ii, *ic)))
        .collect()
}

fn write_file(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, written: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    write_file(dir, name, &(text + "\n"), written)
}

/// Outcome of the exponential fit, kept per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Ok(DecayFit),
    Failed { message: String },
}

impl FitOutcome {
    fn from(result: crate::Result<DecayFit>) -> Result<Self, Error> {
        match result {
            Ok(fit) => Ok(FitOutcome::Ok(fit)),
            Err(Error::FitFailure(message)) => Ok(FitOutcome::Failed { message }),
            Err(e) => Err(e),
        }
    }

    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitOutcome::Ok(f) => Some(f),
            FitOutcome::Failed { .. } => None,
        }
    }
}

/// Exact and perturbative entropy for one `(k, IC)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRun {
    pub k_index: usize,
    pub k: f64,
    pub ic_index: usize,
    pub initial: InitialCondition,
    pub exact: EntropySeries,
    pub perturbative: EntropySeries,
    pub decay: FitOutcome,
    /// Largest `|S_exact - S_pt| / S_exact` where `0 < S_exact < deviation_cap`.
    pub max_relative_deviation: Option<f64>,
    /// Largest `|S_exact - S_pt|` over the same times.
    pub max_absolute_deviation: Option<f64>,
    pub deviation_window: Option<(usize, usize)>,
}

impl EntropyRun {
    fn csv_name(&self) -> String {
        format!("entropy_k{}_ic{}.csv", self.k_index, self.ic_index)
    }
}

/// Result of [`run_entropy_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub header: RecordHeader,
    pub runs: Vec<EntropyRun>,
}

impl EntropyRecord {
    pub fn fit_failures(&self) -> usize {
        self.runs.iter().filter(|r| r.decay.fit().is_none()).count()
    }

    /// Writes one `(t, S_exact, S_pt)` CSV per run and `entropy_summary.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for run in &self.runs {
            let rows: Vec<Vec<f64>> = run
                .exact
                .times
                .iter()
                .zip(&run.exact.values)
                .map(|(&t, &s)| vec![t as f64, s, run.perturbative.value_at(t).unwrap_or(f64::NAN)])
                .collect();
            let text = io::write_table(&self.header.config_sha256, &["t", "S_exact", "S_pt"], &rows);
            write_file(dir, &run.csv_name(), &text, &mut written)?;
        }
        write_json(dir, "entropy_summary.json", self, &mut written)?;
        if self.header.config.output.plot_scripts {
            let names: Vec<String> = self.runs.iter().map(EntropyRun::csv_name).collect();
            write_file(dir, "plot_entropy.py", &plots::entropy_script(&names), &mut written)?;
        }
        Ok(written)
    }
}

/// Entropies at or below this level are rounding noise of an unentangled state.
const ENTROPY_ROUNDING_FLOOR: f64 = 1e-12;

fn deviations(exact: &EntropySeries, pt: &EntropySeries, cap: f64) -> (Option<f64>, Option<f64>, Option<(usize, usize)>) {
    let mut rel: Option<f64> = None;
    let mut abs: Option<f64> = None;
    let mut window: Option<(usize, usize)> = None;
    for (&t, &s) in exact.times.iter().zip(&exact.values) {
        if s >= cap {
            break;
        }
        let Some(p) = pt.value_at(t) else { continue };
        // The initial product state has S = 0 up to rounding; relative errors there are meaningless.
        if s <= ENTROPY_ROUNDING_FLOOR {
            continue;
        }
        let diff = (s - p).abs();
        rel = Some(rel.map_or(diff / s, |r| r.max(diff / s)));
        abs = Some(abs.map_or(diff, |a| a.max(diff)));
        window = Some(window.map_or((t, t), |(lo, _)| (lo, t)));
    }
    (rel, abs, window)
}

/// Exact `S_lin(t)` against `S_PT(t)` for every `(k, IC)` pair.
pub fn run_entropy_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<EntropyRecord, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut warnings = Vec::new();
    if cfg.steps == 0 {
        return Err(ConfigError::Invalid(vec!["steps must be at least 1 for an entropy series".into()]).into());
    }
    if cfg.eps == 0.0 {
        warnings.push("eps = 0: the perturbative series vanishes identically and the rate fit is degenerate".into());
    }
    let dynamics = MapDynamics { cfg };
    let runs = pool(cfg, threads)?.install(|| {
        pairs(cfg)
            .into_par_iter()
            .map(|(k_index, k, ic_index, initial)| -> Result<EntropyRun, Error> {
                let traj = dynamics.trajectory(k, &initial)?;
                let perturbative = s_pt_series(&traj.d, traj.eps, traj.hbar)?;
                let decay = FitOutcome::from(fit_decay(&traj.d, &cfg.fit))?;
                let (rel, abs, window) = deviations(&traj.exact, &perturbative, cfg.entropy.deviation_cap);
                Ok(EntropyRun {
                    k_index,
                    k,
                    ic_index,
                    initial,
                    exact: traj.exact,
                    perturbative,
                    decay,
                    max_relative_deviation: rel,
                    max_absolute_deviation: abs,
                    deviation_window: window,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    for run in &runs {
        if let FitOutcome::Failed { message } = &run.decay {
            warnings.push(format!("k = {}, initial condition {}: {message}", run.k, run.ic_index));
        }
    }
    Ok(EntropyRecord { header: RecordHeader::new("entropy", cfg, started, warnings), runs })
}

/// Whether a sweep row produced a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    FitFailure,
    EmptyWindow,
}

impl RowStatus {
    /// Numeric code used in the CSV `status` column.
    pub fn code(self) -> u8 {
        match self {
            RowStatus::Ok => 0,
            RowStatus::FitFailure => 1,
            RowStatus::EmptyWindow => 2,
        }
    }
}

/// One `(k, IC)` row of a rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_index: usize,
    pub k: f64,
    pub ic_index: usize,
    pub initial: InitialCondition,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateResult>,
}

/// Result of [`run_rate_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub header: RecordHeader,
    pub rows: Vec<SweepRow>,
}

/// Columns of `rate_sweep.csv`; `status` holds [`RowStatus::code`].
pub const SWEEP_COLUMNS: [&str; 14] = [
    "k",
    "ic",
    "Gamma",
    "Gamma0",
    "gamma",
    "ratio",
    "ratio_predicted",
    "R2",
    "Gamma_pt",
    "ratio_pt",
    "window_start",
    "window_end",
    "slope_stderr",
    "status",
];

impl SweepRecord {
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        let nan = f64::NAN;
        self.rows
            .iter()
            .map(|row| {
                let gamma = row.decay.as_ref().map_or(nan, |d| d.gamma);
                match &row.rate {
                    Some(r) => vec![
                        row.k,
                        row.ic_index as f64,
                        r.rate.rate,
                        r.rate0,
                        gamma,
                        r.ratio(),
                        r.ratio_predicted(),
                        r.rate.r2,
                        r.rate_perturbative.map_or(nan, |p| p.rate),
                        r.ratio_perturbative().unwrap_or(nan),
                        r.rate.window.0 as f64,
                        r.rate.window.1 as f64,
                        r.rate.slope_stderr,
                        row.status.code() as f64,
                    ],
                    None => {
                        let mut v = vec![nan; SWEEP_COLUMNS.len()];
                        v[0] = row.k;
                        v[1] = row.ic_index as f64;
                        v[4] = gamma;
                        v[13] = row.status.code() as f64;
                        v
                    }
                }
            })
            .collect()
    }

    /// Writes `rate_sweep.csv` and `rate_sweep_summary.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let text = io::write_table(&self.header.config_sha256, &SWEEP_COLUMNS, &self.csv_rows());
        write_file(dir, "rate_sweep.csv", &text, &mut written)?;
        write_json(dir, "rate_sweep_summary.json", self, &mut written)?;
        if self.header.config.output.plot_scripts {
            write_file(dir, "plot_rate_sweep.py", plots::sweep_script(), &mut written)?;
        }
        Ok(written)
    }
}

/// Turns one trajectory into a sweep row; fit problems stay in the row.
pub fn sweep_row(
    traj: &Trajectory,
    cfg: &ExperimentConfig,
    (k_index, k, ic_index, initial): (usize, f64, usize, InitialCondition),
) -> Result<SweepRow, Error> {
    let mut row =
        SweepRow { k_index, k, ic_index, initial, status: RowStatus::Ok, message: None, decay: None, rate: None };
    let decay = match fit_decay(&traj.d, &cfg.fit) {
        Ok(fit) => fit,
        Err(Error::FitFailure(message)) => {
            row.status = RowStatus::FitFailure;
            row.message = Some(message);
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.decay = Some(decay.clone());
    let s_pt = s_pt_series(&traj.d, traj.eps, traj.hbar)?;
    match rate_result(&traj.exact, decay, traj.eps, traj.hbar, &cfg.rate) {
        Ok(mut rate) => {
            rate.rate_perturbative = slope_over(&s_pt, rate.rate.window).ok();
            row.rate = Some(rate);
        }
        Err(e @ Error::EmptyWindow { .. }) => {
            row.status = RowStatus::EmptyWindow;
            row.message = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// `Γ/Γ₀` against `k` using the configured maps.
pub fn run_rate_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepRecord, RunError> {
    run_rate_sweep_with(cfg, &MapDynamics { cfg }, threads)
}

/// `Γ/Γ₀` against `k` with trajectories from `dynamics`.
pub fn run_rate_sweep_with(
    cfg: &ExperimentConfig,
    dynamics: &dyn Dynamics,
    threads: Option<usize>,
) -> Result<SweepRecord, RunError> {
    cfg.validate()?;
    let mut problems = Vec::new();
    if cfg.k.len() < 2 {
        problems.push(format!("a rate sweep needs at least 2 k values (got {})", cfg.k.len()));
    }
    if cfg.steps < 3 {
        problems.push(format!("a rate sweep needs at least 3 steps (got {})", cfg.steps));
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }
    let started = Instant::now();
    let rows = pool(cfg, threads)?.install(|| {
        pairs(cfg)
            .into_par_iter()
            .map(|pair| sweep_row(&dynamics.trajectory(pair.1, &pair.3)?, cfg, pair))
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let warnings = rows
        .iter()
        .filter_map(|r| r.message.as_ref().map(|m| format!("k = {}, initial condition {}: {m}", r.k, r.ic_index)))
        .collect();
    Ok(SweepRecord { header: RecordHeader::new("rate-sweep", cfg, started, warnings), rows })
}

/// Husimi analysis of one reduced density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HusimiPart {
    pub linear_entropy: f64,
    pub grid_max: f64,
    pub grid_min: f64,
    pub normalization: f64,
    pub minima: MinimaReport,
    #[serde(skip)]
    pub density: Option<Array2<f64>>,
    #[serde(skip)]
    pub grid: Option<HusimiGrid>,
}

impl PartialEq for HusimiPart {
    fn eq(&self, other: &Self) -> bool {
        self.linear_entropy == other.linear_entropy
            && self.grid_max == other.grid_max
            && self.grid_min == other.grid_min
            && self.normalization == other.normalization
            && self.minima == other.minima
    }
}

/// Single-top and coupled-top snapshots for one `(k, IC)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiRun {
    pub k_index: usize,
    pub k: f64,
    pub ic_index: usize,
    pub initial: InitialCondition,
    pub t: usize,
    /// The first top evolved alone (`ε = 0`).
    pub single: HusimiPart,
    /// The reduced state of the first top under the coupled map.
    pub coupled: HusimiPart,
}

/// Result of [`run_husimi_analysis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiRecord {
    pub header: RecordHeader,
    pub runs: Vec<HusimiRun>,
}

impl HusimiRecord {
    /// Writes density-magnitude grids, normal and log Husimi grids for both
    /// snapshots, and `husimi_summary.json` with the minima reports.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let hash = &self.header.config_sha256;
        let mut written = Vec::new();
        let mut stems = Vec::new();
        for run in &self.runs {
            for (label, part) in [("single", &run.single), ("coupled", &run.coupled)] {
                let stem = format!("{label}_k{}_ic{}", run.k_index, run.ic_index);
                if let Some(density) = &part.density {
                    write_file(dir, &format!("density_{stem}.csv"), &io::write_grid(hash, density), &mut written)?;
                }
                if let Some(grid) = &part.grid {
                    for scale in [Scale::Normal, Scale::Log] {
                        let name = match scale {
                            Scale::Normal => format!("husimi_normal_{stem}.csv"),
                            Scale::Log => format!("husimi_log_{stem}.csv"),
                        };
                        write_file(dir, &name, &io::write_grid(hash, &grid.rescaled(scale).values), &mut written)?;
                    }
                }
                stems.push(stem);
            }
        }
        write_json(dir, "husimi_summary.json", self, &mut written)?;
        if self.header.config.output.plot_scripts {
            write_file(dir, "plot_husimi.py", &plots::husimi_script(&stems), &mut written)?;
        }
        Ok(written)
    }
}

fn husimi_part(rho: &ReducedDensity, cfg: &ExperimentConfig) -> crate::Result<HusimiPart> {
    let grid = husimi_grid(rho, cfg.husimi.n_theta, cfg.husimi.n_phi, Scale::Log)?;
    let minima = find_minima(&grid, &cfg.husimi.minima_options())?;
    Ok(HusimiPart {
        linear_entropy: linear_entropy(rho)?,
        grid_max: grid.max_value(),
        grid_min: grid.min_value(),
        normalization: grid.normalization(),
        minima,
        density: Some(rho.magnitudes()),
        grid: Some(grid),
    })
}

/// Reduced density matrices and Husimi functions at `t = steps`, for the
/// single top and for the coupled pair.
pub fn run_husimi_analysis(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<HusimiRecord, RunError> {
    cfg.validate()?;
    if cfg.system.kind != SystemKind::Top {
        return Err(ConfigError::Invalid(vec![
            "Husimi analysis is defined on the sphere and needs system.kind = \"top\"; rotors are not supported".into(),
        ])
        .into());
    }
    let started = Instant::now();
    let dynamics = MapDynamics { cfg };
    let runs = pool(cfg, threads)?.install(|| {
        pairs(cfg)
            .into_par_iter()
            .map(|(k_index, k, ic_index, initial)| -> Result<HusimiRun, Error> {
                let psi1 = dynamics.state(&initial.first)?;
                let psi2 = dynamics.state(&initial.second)?;
                let single_sys = dynamics.system(k, 0.0)?;
                let mut single = psi1.clone();
                for _ in 0..cfg.steps {
                    single = single_sys.u1.apply(&single);
                }
                let coupled_sys = dynamics.system(k, cfg.eps)?;
                let mut psi = BipartiteState::product(&psi1, &psi2);
                for _ in 0..cfg.steps {
                    crate::evolution::step_in_place(&coupled_sys, &mut psi)?;
                }
                Ok(HusimiRun {
                    k_index,
                    k,
                    ic_index,
                    initial,
                    t: cfg.steps,
                    single: husimi_part(&ReducedDensity::pure(&single), cfg)?,
                    coupled: husimi_part(&reduced_density(&psi), cfg)?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let mut warnings = Vec::new();
    for run in &runs {
        if run.coupled.grid_min < run.single.grid_min {
            warnings.push(format!(
                "k = {}, initial condition {}: coupled Husimi minimum {:e} is below the single-top minimum {:e}",
                run.k, run.ic_index, run.coupled.grid_min, run.single.grid_min
            ));
        }
    }
    Ok(HusimiRecord { header: RecordHeader::new("husimi", cfg, started, warnings), runs })
}
