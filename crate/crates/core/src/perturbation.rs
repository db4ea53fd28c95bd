//! Second-order perturbative entanglement production.
//!
//! For `|Ψ(t+1)⟩ = U_ε U₁ U₂ |Ψ(t)⟩` with `U_ε = exp(-iεV/ħ)` and
//! `V = Σ_α q_α⁽¹⁾ ⊗ q_α⁽²⁾`, a product initial state has
//!
//! ```text
//! S_lin(t) ≈ S₀ Σ_{l,m=1..t} D(l,m),     S₀ = 2ε²/ħ²
//! D(l,m)   = Σ_{α,β} C⁽¹⁾_{αβ}(l,m) C⁽²⁾_{αβ}(l,m)
//! C_{αβ}(l,m) = ⟨q_α(l) q_β(m)⟩ - ⟨q_α(l)⟩⟨q_β(m)⟩
//! ```
//!
//! where `q(l) = (U^l)† q U^l` is the uncoupled Heisenberg evolution and the
//! expectation is taken in the subsystem's initial state. Assuming
//! `D(l,m) ≈ D₀ e^{-γ|l-m|}`, the long-time production rate becomes
//! `Γ = Γ₀ coth(γ/2)` with `Γ₀ = S₀ D₀`.

use ndarray::{concatenate, s, Array2, Array4, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EntropySeries, Propagator};
use crate::linalg::{CMatrix, CVector, Observable};

/// `C[α, β, l, m]` for `l, m = 1..=T`, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    data: Array4<C64>,
    dim: usize,
}

impl CorrelationTensor {
    pub fn n_ops(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn t_max(&self) -> usize {
        self.data.shape()[2]
    }

    /// Hilbert-space dimension of the subsystem.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C_{αβ}(l, m)`, with one-based times.
    pub fn get(&self, alpha: usize, beta: usize, l: usize, m: usize) -> C64 {
        self.data[[alpha, beta, l - 1, m - 1]]
    }

    /// `max |C_{αβ}(l,m) - conj(C_{βα}(m,l))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let (n, t) = (self.n_ops(), self.t_max());
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for l in 0..t {
                    for m in 0..t {
                        let d = self.data[[a, b, l, m]] - self.data[[b, a, m, l]].conj();
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }

    /// Smallest `Re C_{αα}(l,l)` and largest `|Im C_{αα}(l,l)|` (variances).
    pub fn variance_bounds(&self) -> (f64, f64) {
        let mut min_re = f64::INFINITY;
        let mut max_im = 0.0_f64;
        for a in 0..self.n_ops() {
            for l in 0..self.t_max() {
                let v = self.data[[a, a, l, l]];
                min_re = min_re.min(v.re);
                max_im = max_im.max(v.im.abs());
            }
        }
        (min_re, max_im)
    }
}

/// Connected Heisenberg correlations of the free subsystem dynamics.
///
/// Uses `⟨q_α(l) q_β(m)⟩ = ⟨ψ(l)| q_α U^{l-m} q_β |ψ(m)⟩` for `l ≥ m`, with
/// the auxiliary states `U^{l-m} q_β ψ(m)` propagated forward together as
/// columns of one matrix; the `l < m` half follows from Hermitian symmetry.
pub fn heisenberg_correlations(
    u: &Propagator,
    q_ops: &[Observable],
    psi0: &CVector,
    t_max: usize,
) -> Result<CorrelationTensor> {
    let d = u.dim();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch { context: "heisenberg_correlations", expected: d, found: psi0.len() });
    }
    if let Some(q) = q_ops.iter().find(|q| q.dim() != d) {
        return Err(Error::DimensionMismatch { context: "heisenberg_correlations (observable)", expected: d, found: q.dim() });
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("correlations need at least one step".into()));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let norm = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("initial state has norm² {norm}")));
    }

    let n = q_ops.len();
    let mut data = Array4::<C64>::zeros((n, n, t_max, t_max));
    let mut means = Array2::<C64>::zeros((n, t_max));
    let mut psi = psi0.clone();
    // column (m-1)·n + β holds U^{l-m} q_β ψ(m)
    let mut aux = CMatrix::zeros((d, 0));

    for l in 1..=t_max {
        psi = u.apply(&psi);
        if aux.ncols() > 0 {
            u.apply_columns(&mut aux);
        }
        let q_psi: Vec<CVector> = q_ops.iter().map(|q| q.apply(&psi)).collect();
        let fresh = CMatrix::from_shape_fn((d, n), |(i, b)| q_psi[b][i]);
        aux = concatenate![Axis(1), aux, fresh];

        for (a, qa) in q_psi.iter().enumerate() {
            means[[a, l - 1]] = psi.iter().zip(qa.iter()).map(|(x, y)| x.conj() * y).sum();
        }
        for (a, qa) in q_psi.iter().enumerate() {
            let bra = qa.mapv(|z| z.conj());
            let row = aux.t().dot(&bra);
            for m in 1..=l {
                for b in 0..n {
                    let raw = row[(m - 1) * n + b];
                    let c = raw - means[[a, l - 1]] * means[[b, m - 1]];
                    data[[a, b, l - 1, m - 1]] = c;
                    if m < l {
                        data[[b, a, m - 1, l - 1]] = c.conj();
                    }
                }
            }
        }
    }
    Ok(CorrelationTensor { data, dim: d })
}

/// `D(l, m)` for `l, m = 1..=T`, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DMatrix {
    values: Array2<C64>,
    dim: usize,
}

impl DMatrix {
    /// Wraps explicit values; `dim` is the dimension of subsystem 1.
    pub fn from_values(values: Array2<C64>, dim: usize) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch { context: "DMatrix", expected: values.nrows(), found: values.ncols() });
        }
        Ok(DMatrix { values, dim })
    }

    /// `D(l,m) = f(|l-m|)` for `l, m = 1..=t_max`.
    pub fn stationary<F: Fn(usize) -> f64>(t_max: usize, dim: usize, f: F) -> Self {
        let values = Array2::from_shape_fn((t_max, t_max), |(l, m)| C64::new(f(l.abs_diff(m)), 0.0));
        DMatrix { values, dim }
    }

    pub fn t_max(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One-based `D(l, m)`.
    pub fn get(&self, l: usize, m: usize) -> C64 {
        self.values[[l - 1, m - 1]]
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    /// `max |D(m,l) - conj(D(l,m))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let t = self.t_max();
        let mut worst = 0.0_f64;
        for l in 0..t {
            for m in l..t {
                worst = worst.max((self.values[[m, l]] - self.values[[l, m]].conj()).norm());
            }
        }
        worst
    }
}

/// `D = Σ_{αβ} C⁽¹⁾_{αβ} C⁽²⁾_{αβ}` (plain product, no conjugation).
pub fn d_matrix(c1: &CorrelationTensor, c2: &CorrelationTensor) -> Result<DMatrix> {
    if c1.n_ops() != c2.n_ops() {
        return Err(Error::DimensionMismatch { context: "d_matrix (operator count)", expected: c1.n_ops(), found: c2.n_ops() });
    }
    if c1.t_max() != c2.t_max() {
        return Err(Error::DimensionMismatch { context: "d_matrix (time range)", expected: c1.t_max(), found: c2.t_max() });
    }
    let t = c1.t_max();
    let mut values = Array2::<C64>::zeros((t, t));
    for a in 0..c1.n_ops() {
        for b in 0..c1.n_ops() {
            let x = c1.data.slice(s![a, b, .., ..]);
            let y = c2.data.slice(s![a, b, .., ..]);
            values += &(&x * &y);
        }
    }
    Ok(DMatrix { values, dim: c1.dim })
}

/// `S₀ = 2ε²/ħ²`.
pub fn s0(eps: f64, hbar: f64) -> f64 {
    2.0 * eps * eps / (hbar * hbar)
}

/// `S_PT(t) = S₀ Σ_{l,m ≤ t} Re D(l,m)` for `t = 0..=T`.
///
/// The imaginary part of the double sum cancels by Hermitian symmetry; a
/// residual above `1e-9·|sum|` is reported as an invariant violation.
pub fn s_pt_series(d: &DMatrix, eps: f64, hbar: f64) -> Result<EntropySeries> {
    let t_max = d.t_max();
    let pref = s0(eps, hbar);
    let mut re = 0.0;
    let mut im = 0.0;
    let mut times = Vec::with_capacity(t_max + 1);
    let mut values = Vec::with_capacity(t_max + 1);
    times.push(0);
    values.push(0.0);
    for t in 1..=t_max {
        let i = t - 1;
        for m in 0..i {
            let a = d.values[[i, m]];
            let b = d.values[[m, i]];
            re += a.re + b.re;
            im += a.im + b.im;
        }
        re += d.values[[i, i]].re;
        im += d.values[[i, i]].im;
        let scale = (re * re + im * im).sqrt();
        if im.abs() > 1e-9 * scale {
            return Err(Error::Invariant(format!(
                "perturbative double sum has imaginary part {im:e} at t = {t} (real part {re:e})"
            )));
        }
        times.push(t);
        values.push(pref * re);
    }
    Ok(EntropySeries { times, values, dim: d.dim })
}

/// Options for [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayFitOptions {
    /// First `l` used when averaging along diagonals.
    pub transient: usize,
    /// Separations stop once `Ĉ(s) < noise_floor · Ĉ(0)`.
    pub noise_floor: f64,
}

impl Default for DecayFitOptions {
    fn default() -> Self {
        DecayFitOptions { transient: 5, noise_floor: 1e-3 }
    }
}

/// Result of the exponential fit `D(l,m) ≈ D₀ e^{-γ|l-m|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub d0: f64,
    /// Per-step decay rate γ.
    pub gamma: f64,
    /// Separations `1..=s_max` entered the log-linear fit.
    pub s_max: usize,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub slope_stderr: f64,
    /// `Ĉ(s)` for every available separation.
    pub profile: Vec<f64>,
}

/// Mean of `Re D(l, l+s)` over `l ≥ transient`.
pub fn diagonal_profile(d: &DMatrix, transient: usize) -> Vec<f64> {
    let t = d.t_max();
    let first = transient.max(1);
    if first > t {
        return Vec::new();
    }
    (0..=(t - first))
        .map(|s| {
            let ls = first..=(t - s);
            let n = ls.clone().count() as f64;
            ls.map(|l| d.get(l, l + s).re).sum::<f64>() / n
        })
        .collect()
}

/// Ordinary least squares `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub rms_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LineFit { intercept, slope, slope_stderr, r2, rms_residual: (sse / nf).sqrt() })
}

/// Fits `Ĉ(s) ≈ D₀ e^{-γ s}` to the diagonal averages of `D`.
///
/// `D₀ = Ĉ(0)`; `γ` is minus the slope of `ln Ĉ(s)` over `s = 1..=s_max`,
/// where `s_max` is the last separation before `Ĉ` drops below the noise
/// floor. When only `s = 1` clears the floor the fit is anchored at `s = 0`.
pub fn fit_decay(d: &DMatrix, opts: &DecayFitOptions) -> Result<DecayFit> {
    let profile = diagonal_profile(d, opts.transient);
    if profile.len() < 5 {
        return Err(Error::FitFailure(format!(
            "only {} separations available after the transient (need at least 5)",
            profile.len()
        )));
    }
    let d0 = profile[0];
    if !(d0 > 0.0) {
        return Err(Error::FitFailure(format!("equal-time correlation D0 = {d0:e} is not positive")));
    }
    let floor = opts.noise_floor * d0;
    let s_max = profile.iter().skip(1).take_while(|&&c| c >= floor && c > 0.0).count();
    let (xs, ys): (Vec<f64>, Vec<f64>) = match s_max {
        0 => {
            return Err(Error::FitFailure(format!(
                "D(l,l+1) already below the noise floor ({:e} < {floor:e})",
                profile[1]
            )))
        }
        1 => vec![(0.0, d0.ln()), (1.0, profile[1].ln())].into_iter().unzip(),
        _ => (1..=s_max).map(|s| (s as f64, profile[s].ln())).unzip(),
    };
    let line = fit_line(&xs, &ys).expect("at least two distinct separations");
    if !(line.slope < 0.0) {
        return Err(Error::FitFailure(format!(
            "correlations do not decay (log slope {:.4} over s = 1..{s_max})",
            line.slope
        )));
    }
    Ok(DecayFit {
        d0,
        gamma: -line.slope,
        s_max,
        residual: line.rms_residual,
        slope_stderr: line.slope_stderr,
        profile,
    })
}

/// Slope of the t-linear production region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    /// Inclusive window of times used.
    pub window: (usize, usize),
    pub r2: f64,
    pub slope_stderr: f64,
}

/// Options for [`production_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateOptions {
    /// Window starts at `ceil(start_factor / γ)`.
    pub start_factor: f64,
    /// Window ends before `S` exceeds `saturation_cap · (1 - 1/d)`.
    pub saturation_cap: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions { start_factor: 5.0, saturation_cap: 0.2 }
    }
}

/// Least-squares slope of `S(t)` over `t ∈ [⌈5/γ⌉, t_sat)`.
pub fn production_rate(series: &EntropySeries, gamma: f64, opts: &RateOptions) -> Result<RateFit> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("decay rate gamma = {gamma} must be positive")));
    }
    let lower = (opts.start_factor / gamma).ceil().max(0.0) as usize;
    let cap = opts.saturation_cap * series.max_possible();
    let saturated = series.times.iter().zip(&series.values).find(|(_, &s)| s > cap).map(|(&t, _)| t);
    let last = series.times.last().copied().unwrap_or(0);
    let upper = match saturated {
        Some(t) => t.saturating_sub(1),
        None => last,
    };
    slope_over(series, (lower, upper))
}

/// Least-squares slope of `series` over the inclusive time window `(lower, upper)`.
pub fn slope_over(series: &EntropySeries, (lower, upper): (usize, usize)) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(&t, _)| t >= lower && t <= upper)
        .map(|(&t, &s)| (t as f64, s))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::EmptyWindow { lower, upper });
    }
    let line = fit_line(&xs, &ys).ok_or(Error::EmptyWindow { lower, upper })?;
    Ok(RateFit { rate: line.slope, window: (lower, upper), r2: line.r2, slope_stderr: line.slope_stderr })
}

/// `Γ₀ coth(γ/2)`.
pub fn coth_prediction(gamma0: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("decay rate gamma = {gamma} must be positive")));
    }
    Ok(gamma0 / (0.5 * gamma).tanh())
}

/// Measured and predicted production rates for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub s0: f64,
    pub rate: RateFit,
    /// `Γ₀ = S₀ D₀`.
    pub rate0: f64,
    /// `Γ₀ coth(γ/2)`.
    pub rate_predicted: f64,
    pub decay: DecayFit,
    /// Slope of the perturbative series over the same window, when available.
    #[serde(default)]
    pub rate_perturbative: Option<RateFit>,
}

impl RateResult {
    pub fn ratio(&self) -> f64 {
        self.rate.rate / self.rate0
    }

    pub fn ratio_predicted(&self) -> f64 {
        self.rate_predicted / self.rate0
    }

    /// `Γ_PT / Γ₀`, the perturbative slope without the exponential model.
    pub fn ratio_perturbative(&self) -> Option<f64> {
        self.rate_perturbative.map(|r| r.rate / self.rate0)
    }
}

/// Combines a decay fit with the slope measured on `series`.
pub fn rate_result(series: &EntropySeries, decay: DecayFit, eps: f64, hbar: f64, opts: &RateOptions) -> Result<RateResult> {
    let s0 = s0(eps, hbar);
    let rate0 = s0 * decay.d0;
    let rate_predicted = coth_prediction(rate0, decay.gamma)?;
    let rate = production_rate(series, decay.gamma, opts)?;
    Ok(RateResult { s0, rate, rate0, rate_predicted, decay, rate_perturbative: None })
}
