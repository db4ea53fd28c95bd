//! Experiment configuration: TOML ingestion, exhaustive validation, presets.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evolution::SystemKind;
use crate::husimi::MinimaOptions;
use crate::perturbation::{DecayFitOptions, RateOptions};
use crate::rotor::{default_sigma, RotorParams};
use crate::top::TopParams;

/// Largest spin accepted by the validator; `2j + 1 = 1001` keeps dense
/// products of two tops within memory.
pub const MAX_J: f64 = 500.0;

/// Shipped configurations, one per experiment.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1a", include_str!("../../presets/fig1a.toml")),
    ("fig1b", include_str!("../../presets/fig1b.toml")),
    ("fig2a", include_str!("../../presets/fig2a.toml")),
    ("fig2b", include_str!("../../presets/fig2b.toml")),
    ("fig345", include_str!("../../presets/fig345.toml")),
];

/// A configuration that could not be used.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("unknown preset {0:?} (available: fig1a, fig1b, fig2a, fig2b, fig345)")]
    UnknownPreset(String),
}

/// Hilbert-space description shared by both subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    /// Spin quantum number (tops only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Effective Planck constant. Tops default to 1; rotors need `2π/ħ` integral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    /// Rotor grid size `N`, an alternative to `hbar = 2π/N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_size: Option<usize>,
}

/// A coherent state of one subsystem.
///
/// Tops use `theta`/`phi`; rotors use `position`/`momentum` and optionally `sigma`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Product initial state; the second factor defaults to a copy of the first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<PointConfig>,
}

impl InitialConfig {
    pub fn first(&self) -> PointConfig {
        PointConfig {
            theta: self.theta,
            phi: self.phi,
            position: self.position,
            momentum: self.momentum,
            sigma: self.sigma,
        }
    }

    pub fn second(&self) -> PointConfig {
        self.second.clone().unwrap_or_else(|| self.first())
    }

    fn from_points(first: PointConfig) -> Self {
        InitialConfig {
            theta: first.theta,
            phi: first.phi,
            position: first.position,
            momentum: first.momentum,
            sigma: first.sigma,
            second: None,
        }
    }
}

/// Random initial conditions appended to the explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
    pub seed: u64,
}

/// Window for comparing exact and perturbative entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    /// Relative deviations are taken where `0 < S_exact < deviation_cap`.
    pub deviation_cap: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig { deviation_cap: 0.1 }
    }
}

/// Husimi sampling and minima detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HusimiConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub zero_threshold: f64,
    pub refine: bool,
    pub levels: usize,
    pub subdivisions: usize,
}

impl Default for HusimiConfig {
    fn default() -> Self {
        let m = MinimaOptions::default();
        HusimiConfig {
            n_theta: 256,
            n_phi: 256,
            zero_threshold: m.zero_threshold,
            refine: m.refine,
            levels: m.levels,
            subdivisions: m.subdivisions,
        }
    }
}

impl HusimiConfig {
    pub fn minima_options(&self) -> MinimaOptions {
        MinimaOptions {
            zero_threshold: self.zero_threshold,
            refine: self.refine,
            levels: self.levels,
            subdivisions: self.subdivisions,
        }
    }
}

/// Where and how results are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub plot_scripts: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), plot_scripts: false }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Kick strengths; both subsystems share `k`.
    pub k: Vec<f64>,
    pub eps: f64,
    /// Number of map iterations `T` (the snapshot time for Husimi analysis).
    pub steps: usize,
    #[serde(default = "one")]
    pub entropy_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub fit: DecayFitOptions,
    #[serde(default)]
    pub rate: RateOptions,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub husimi: HusimiConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}

/// Resolved coherent-state parameters of one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Point {
    Top { theta: f64, phi: f64 },
    Rotor { position: f64, momentum: f64, sigma: f64 },
}

/// Resolved product initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub first: Point,
    pub second: Point,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        Self::from_toml_str(text)
    }

    /// Canonical TOML rendering; parsing it back yields an equal config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// SHA-256 of the canonical rendering, as lowercase hex.
    ///
    /// Output location and thread count do not change results and are left
    /// out, so the same physics hashes the same wherever it is written.
    pub fn sha256(&self) -> String {
        let physics = ExperimentConfig { threads: None, output: OutputConfig::default(), ..self.clone() };
        Sha256::digest(physics.to_toml_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `ħ` for either system kind (validated configs only).
    pub fn hbar(&self) -> f64 {
        match (self.system.kind, self.system.hbar, self.system.torus_size) {
            (SystemKind::Rotor, None, Some(n)) => TAU / n as f64,
            (_, Some(h), _) => h,
            _ => 1.0,
        }
    }

    pub fn top_params(&self, k: f64) -> crate::Result<TopParams> {
        TopParams::new(self.system.j.unwrap_or(0.0), self.hbar(), k)
    }

    pub fn rotor_params(&self, k: f64) -> crate::Result<RotorParams> {
        RotorParams::new(self.hbar(), k)
    }

    /// Explicit initial conditions followed by the sampled ones.
    pub fn initial_conditions(&self) -> Vec<InitialCondition> {
        let mut all: Vec<InitialConfig> = self.initial.clone();
        if let Some(s) = &self.sampling {
            all.extend(self.sample(s));
        }
        all.iter().map(|ic| InitialCondition { first: self.resolve(&ic.first()), second: self.resolve(&ic.second()) }).collect()
    }

    fn resolve(&self, p: &PointConfig) -> Point {
        match self.system.kind {
            SystemKind::Top => Point::Top { theta: p.theta.unwrap_or(0.0), phi: p.phi.unwrap_or(0.0) },
            SystemKind::Rotor => {
                let sigma = p.sigma.unwrap_or_else(|| match self.rotor_params(0.0) {
                    Ok(r) => default_sigma(&r),
                    Err(_) => f64::NAN,
                });
                Point::Rotor { position: p.position.unwrap_or(0.0), momentum: p.momentum.unwrap_or(0.0), sigma }
            }
        }
    }

    fn sample(&self, s: &SamplingConfig) -> Vec<InitialConfig> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
        (0..s.count)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let point = match self.system.kind {
                    SystemKind::Top => PointConfig { theta: Some((1.0 - 2.0 * u).acos()), phi: Some(TAU * v), ..Default::default() },
                    SystemKind::Rotor => {
                        let n = self.system.torus_size.unwrap_or_else(|| (TAU / self.hbar()).round() as usize) as f64;
                        let index = (v * n).floor() - (n / 2.0).floor();
                        PointConfig { position: Some(TAU * u), momentum: Some(index * self.hbar()), ..Default::default() }
                    }
                };
                InitialConfig::from_points(point)
            })
            .collect()
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut bad = |msg: String| errors.push(msg);
        let sys = &self.system;
        match sys.kind {
            SystemKind::Top => {
                match sys.j {
                    None => bad("system.j is required for tops".into()),
                    Some(j) if !(j.is_finite() && (0.5..=MAX_J).contains(&j) && (2.0 * j).fract() == 0.0) => {
                        bad(format!("system.j = {j} must be a half-integer in [0.5, {MAX_J}]"))
                    }
                    _ => {}
                }
                if let Some(h) = sys.hbar {
                    if !(h.is_finite() && h > 0.0) {
                        bad(format!("system.hbar = {h} must be positive"));
                    }
                }
                if sys.torus_size.is_some() {
                    bad("system.torus_size applies to rotors only".into());
                }
            }
            SystemKind::Rotor => {
                if sys.j.is_some() {
                    bad("system.j applies to tops only".into());
                }
                match (sys.hbar, sys.torus_size) {
                    (Some(_), Some(_)) => bad("give either system.hbar or system.torus_size, not both".into()),
                    (None, None) => bad("rotors need system.hbar (with 2π/ħ integral) or system.torus_size".into()),
                    (Some(h), None) => {
                        if let Err(e) = RotorParams::new(h, 0.0) {
                            bad(format!("system.hbar = {h}: {e}"));
                        } else if (TAU / h).round() < 4.0 {
                            bad(format!("system.hbar = {h} gives fewer than 4 grid points"));
                        }
                    }
                    (None, Some(n)) if n < 4 => bad(format!("system.torus_size = {n} must be at least 4")),
                    _ => {}
                }
            }
        }
        if self.k.is_empty() {
            bad("k must list at least one kick strength".into());
        }
        for (i, k) in self.k.iter().enumerate() {
            if !(k.is_finite() && *k >= 0.0) {
                bad(format!("k[{i}] = {k} must be finite and non-negative"));
            }
        }
        if !self.eps.is_finite() {
            bad(format!("eps = {} must be finite", self.eps));
        }
        if self.entropy_stride == 0 {
            bad("entropy_stride must be at least 1".into());
        }
        if self.threads == Some(0) {
            bad("threads must be at least 1".into());
        }
        if self.initial.is_empty() && self.sampling.as_ref().is_none_or(|s| s.count == 0) {
            bad("no initial conditions: add [[initial]] entries or a [sampling] section".into());
        }
        let rotor_n = match sys.kind {
            SystemKind::Rotor => self.rotor_params(0.0).ok().map(|r| r.n()),
            SystemKind::Top => None,
        };
        for (i, ic) in self.initial.iter().enumerate() {
            self.check_point(&format!("initial[{i}]"), &ic.first(), rotor_n, &mut errors);
            if let Some(second) = &ic.second {
                self.check_point(&format!("initial[{i}].second"), second, rotor_n, &mut errors);
            }
        }
        let mut bad = |msg: String| errors.push(msg);
        if !(self.fit.noise_floor > 0.0 && self.fit.noise_floor < 1.0) {
            bad(format!("fit.noise_floor = {} must lie in (0, 1)", self.fit.noise_floor));
        }
        if !(self.rate.start_factor.is_finite() && self.rate.start_factor >= 0.0) {
            bad(format!("rate.start_factor = {} must be non-negative", self.rate.start_factor));
        }
        if !(self.rate.saturation_cap > 0.0 && self.rate.saturation_cap <= 1.0) {
            bad(format!("rate.saturation_cap = {} must lie in (0, 1]", self.rate.saturation_cap));
        }
        if !(self.entropy.deviation_cap > 0.0 && self.entropy.deviation_cap <= 1.0) {
            bad(format!("entropy.deviation_cap = {} must lie in (0, 1]", self.entropy.deviation_cap));
        }
        let h = &self.husimi;
        if h.n_theta < 8 || h.n_phi < 8 {
            bad(format!("husimi grid {}x{} is below the 8x8 minimum", h.n_theta, h.n_phi));
        }
        if h.n_theta > 4096 || h.n_phi > 4096 {
            bad(format!("husimi grid {}x{} exceeds 4096 per axis", h.n_theta, h.n_phi));
        }
        if !(h.zero_threshold > 0.0 && h.zero_threshold < 1.0) {
            bad(format!("husimi.zero_threshold = {} must lie in (0, 1)", h.zero_threshold));
        }
        if h.levels > 8 {
            bad(format!("husimi.levels = {} exceeds 8", h.levels));
        }
        if !(2..=64).contains(&h.subdivisions) {
            bad(format!("husimi.subdivisions = {} must lie in [2, 64]", h.subdivisions));
        }
        if self.output.dir.is_empty() {
            bad("output.dir must not be empty".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    fn check_point(&self, at: &str, p: &PointConfig, rotor_n: Option<usize>, errors: &mut Vec<String>) {
        let mut bad = |msg: String| errors.push(format!("{at}: {msg}"));
        match self.system.kind {
            SystemKind::Top => {
                match p.theta {
                    None => bad("theta is required for tops".into()),
                    Some(t) if !(0.0..=PI).contains(&t) => bad(format!("theta = {t} must lie in [0, π]")),
                    _ => {}
                }
                match p.phi {
                    None => bad("phi is required for tops".into()),
                    Some(f) if !f.is_finite() => bad(format!("phi = {f} must be finite")),
                    _ => {}
                }
                if p.position.is_some() || p.momentum.is_some() || p.sigma.is_some() {
                    bad("position/momentum/sigma apply to rotors only".into());
                }
            }
            SystemKind::Rotor => {
                if p.theta.is_some() || p.phi.is_some() {
                    bad("theta/phi apply to tops only (use position/momentum)".into());
                }
                match p.position {
                    None => bad("position is required for rotors".into()),
                    Some(x) if !x.is_finite() => bad(format!("position = {x} must be finite")),
                    _ => {}
                }
                match p.momentum {
                    None => bad("momentum is required for rotors".into()),
                    Some(m) if !m.is_finite() => bad(format!("momentum = {m} must be finite")),
                    Some(m) => {
                        if rotor_n.is_some() && self.rotor_params(0.0).ok().and_then(|r| r.momentum_index(m)).is_none() {
                            bad(format!("momentum = {m} is not a multiple of hbar = {}", self.hbar()));
                        }
                    }
                }
                if let Some(s) = p.sigma {
                    if !(s.is_finite() && s > 0.0) {
                        bad(format!("sigma = {s} must be positive"));
                    }
                }
            }
        }
    }
}
