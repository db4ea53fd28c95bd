//! Husimi functions of spin density operators on the sphere, and their minima.
//!
//! `H(θ, φ) = <θ, φ| ρ |θ, φ>` is sampled on a grid offset by half a step from
//! both poles. Minima are located on the log-scaled grid, optionally polished
//! by resampling shrinking patches in a tangent-plane chart, and classified as
//! zeros or positive minima against a threshold relative to the grid maximum.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ReducedDensity;
use crate::linalg::{cis, hermitian_eig};
use crate::top::CoherentBasis;

/// Values stored in a log-scale grid are `log10(max(H, LOG_FLOOR))`.
pub const LOG_FLOOR: f64 = 1e-300;

/// Default zero threshold, relative to the grid maximum.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-10;

/// Storage scale of a [`HusimiGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Normal,
    Log,
}

impl Scale {
    fn encode(self, h: f64) -> f64 {
        match self {
            Scale::Normal => h,
            Scale::Log => h.max(LOG_FLOOR).log10(),
        }
    }

    fn decode(self, v: f64) -> f64 {
        match self {
            Scale::Normal => v,
            Scale::Log => 10f64.powf(v),
        }
    }
}

/// Eigen-components of `ρ` below this fraction of the largest are dropped;
/// they sit at the rounding level of the density matrix itself.
const RANK_TOL: f64 = 1e-14;

/// Evaluates `H` for one density operator.
///
/// With `ρ = Σ_k p_k |v_k><v_k|`, `H = Σ_k p_k |<θ, φ|v_k>|²` is a sum of
/// non-negative terms, so values near zeros keep their relative accuracy
/// instead of drowning in the cancellation of the full quadratic form.
#[derive(Debug, Clone)]
pub struct Husimi {
    basis: CoherentBasis,
    weights: Vec<f64>,
    /// Retained eigenvectors as columns.
    vectors: Array2<C64>,
}

impl Husimi {
    pub fn new(rho: &ReducedDensity) -> Result<Self> {
        let d = rho.dim();
        if d < 2 {
            return Err(Error::DimensionMismatch { context: "husimi (need 2j+1 >= 2)", expected: 2, found: d });
        }
        let (values, vectors) = hermitian_eig(rho.matrix())?;
        let top = values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..d).filter(|&i| values[i] > RANK_TOL * top).collect();
        let weights = keep.iter().map(|&i| values[i]).collect();
        let vectors = vectors.select(Axis(1), &keep);
        Ok(Husimi { basis: CoherentBasis::new((d - 1) as u32), weights, vectors })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Spin quantum number `j = (d - 1) / 2`.
    pub fn j(&self) -> f64 {
        0.5 * (self.dim() - 1) as f64
    }

    fn weigh(&self, overlaps: ArrayView1<C64>) -> f64 {
        overlaps.iter().zip(&self.weights).map(|(z, p)| p * z.norm_sqr()).sum()
    }

    pub fn eval(&self, theta: f64, phi: f64) -> Result<f64> {
        Ok(self.row(theta, &[phi])?[0])
    }

    /// `H` along a row of constant `θ`.
    pub fn row(&self, theta: f64, phis: &[f64]) -> Result<Vec<f64>> {
        let a = self.basis.magnitudes(theta);
        let bras = Array2::from_shape_fn((phis.len(), a.len()), |(k, i)| a[i] * cis(-(i as f64) * phis[k]));
        let overlaps = bras.dot(&self.vectors);
        overlaps
            .rows()
            .into_iter()
            .map(|o| {
                let h = self.weigh(o);
                if h.is_finite() {
                    Ok(h)
                } else {
                    Err(Error::Invariant(format!("Husimi value {h} at theta = {theta}")))
                }
            })
            .collect()
    }

    /// `H` at a unit vector.
    pub fn eval_vec(&self, p: [f64; 3]) -> Result<f64> {
        let (theta, phi) = to_angles(p);
        self.eval(theta, phi)
    }
}

/// `<θ, φ| ρ |θ, φ>`; the spin `j` is read off the dimension of `ρ`.
pub fn husimi_eval(rho: &ReducedDensity, theta: f64, phi: f64) -> Result<f64> {
    Husimi::new(rho)?.eval(theta, phi)
}

fn to_angles(p: [f64; 3]) -> (f64, f64) {
    let theta = p[2].clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    (theta, phi)
}

fn to_vec(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}

/// Orthonormal tangent basis at `n`.
fn tangent_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if n[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let dot = helper[0] * n[0] + helper[1] * n[1] + helper[2] * n[2];
    let e1 = normalize([helper[0] - dot * n[0], helper[1] - dot * n[1], helper[2] - dot * n[2]]);
    let e2 = [n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]];
    (e1, e2)
}

fn chart(n: [f64; 3], e1: [f64; 3], e2: [f64; 3], u: f64, v: f64) -> [f64; 3] {
    normalize([n[0] + u * e1[0] + v * e2[0], n[1] + u * e1[1] + v * e2[1], n[2] + u * e1[2] + v * e2[2]])
}

/// `H` sampled on `θ_i = (i + ½)π/n_θ`, `φ_k = (k + ½)2π/n_φ`, plus both poles.
#[derive(Debug, Clone)]
pub struct HusimiGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `values[[i, k]]` at `(thetas[i], phis[k])`, in `scale`.
    pub values: Array2<f64>,
    /// Values at `θ = 0` and `θ = π`, in `scale`.
    pub poles: [f64; 2],
    pub scale: Scale,
    husimi: Husimi,
}

/// Samples `ρ`'s Husimi function on an `n_theta × n_phi` offset grid.
pub fn husimi_grid(rho: &ReducedDensity, n_theta: usize, n_phi: usize, scale: Scale) -> Result<HusimiGrid> {
    if n_theta < 8 || n_phi < 8 {
        return Err(Error::InvalidParameter(format!("Husimi grid {n_theta}x{n_phi} is below the 8x8 minimum")));
    }
    let husimi = Husimi::new(rho)?;
    let thetas: Vec<f64> = (0..n_theta).map(|i| (i as f64 + 0.5) * PI / n_theta as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|k| (k as f64 + 0.5) * 2.0 * PI / n_phi as f64).collect();
    let mut values = Array2::zeros((n_theta, n_phi));
    for (i, &theta) in thetas.iter().enumerate() {
        for (slot, h) in values.row_mut(i).iter_mut().zip(husimi.row(theta, &phis)?) {
            *slot = scale.encode(h);
        }
    }
    let poles = [scale.encode(husimi.eval(0.0, 0.0)?), scale.encode(husimi.eval(PI, 0.0)?)];
    Ok(HusimiGrid { thetas, phis, values, poles, scale, husimi })
}

impl HusimiGrid {
    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phis.len()
    }

    pub fn j(&self) -> f64 {
        self.husimi.j()
    }

    pub fn husimi(&self) -> &Husimi {
        &self.husimi
    }

    /// The same samples stored in another scale.
    pub fn rescaled(&self, scale: Scale) -> HusimiGrid {
        let convert = |v: f64| scale.encode(self.scale.decode(v));
        HusimiGrid {
            thetas: self.thetas.clone(),
            phis: self.phis.clone(),
            values: self.values.mapv(convert),
            poles: self.poles.map(convert),
            scale,
            husimi: self.husimi.clone(),
        }
    }

    /// Smallest linear-scale cell value.
    pub fn min_value(&self) -> f64 {
        self.scale.decode(self.values.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Linear-scale value at grid point `(i, k)`.
    pub fn h(&self, i: usize, k: usize) -> f64 {
        self.scale.decode(self.values[[i, k]])
    }

    /// Largest linear-scale value over the grid and poles.
    pub fn max_value(&self) -> f64 {
        let cells = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.scale.decode(cells.max(self.poles[0]).max(self.poles[1]))
    }

    /// Grid indices of the largest cell value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for ((i, k), &v) in self.values.indexed_iter() {
            if v > self.values[best] {
                best = (i, k);
            }
        }
        best
    }

    /// Midpoint-rule estimate of `(2j+1)/(4π) ∫ H dΩ`, which is 1 for unit-trace `ρ`.
    pub fn normalization(&self) -> f64 {
        let dt = PI / self.n_theta() as f64;
        let dp = 2.0 * PI / self.n_phi() as f64;
        let sum: f64 = self
            .values
            .indexed_iter()
            .map(|((i, _), &v)| self.scale.decode(v) * self.thetas[i].sin())
            .sum();
        (2.0 * self.j() + 1.0) / (4.0 * PI) * sum * dt * dp
    }
}

/// Options for [`find_minima`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaOptions {
    /// Zero threshold relative to the grid maximum.
    pub zero_threshold: f64,
    pub refine: bool,
    /// Number of shrinking resampling patches.
    pub levels: usize,
    /// Samples per patch half-width; a patch holds `(2·subdivisions + 1)²` points.
    pub subdivisions: usize,
}

impl Default for MinimaOptions {
    fn default() -> Self {
        MinimaOptions { zero_threshold: DEFAULT_ZERO_THRESHOLD, refine: true, levels: 3, subdivisions: 16 }
    }
}

/// One detected local minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub theta: f64,
    pub phi: f64,
    /// Linear-scale `H` at the reported point.
    pub value: f64,
    pub is_zero: bool,
    /// Order of the zero (1 for positive minima and unrefined zeros).
    pub multiplicity: u32,
    /// Set when several grid minima coalesced here or the zero is multiple.
    pub degenerate: bool,
}

/// Minima of a log-scale grid, split into zeros and positive minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaReport {
    pub minima: Vec<Minimum>,
    pub zeros: usize,
    pub positive: usize,
    /// Sum of zero multiplicities; `2j` for a pure state once all zeros are resolved.
    pub zero_multiplicity: u32,
    /// Absolute threshold `zero_threshold · max H`.
    pub threshold: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub refinement_levels: usize,
}

impl MinimaReport {
    pub fn total(&self) -> usize {
        self.minima.len()
    }
}

/// Strict local minima of the grid with `φ` wraparound; each pole is one
/// virtual cell adjacent to the whole first or last row.
fn grid_minima(grid: &HusimiGrid) -> Vec<[f64; 3]> {
    let (nt, np) = (grid.n_theta(), grid.n_phi());
    let v = &grid.values;
    let mut found = Vec::new();
    if v.row(0).iter().all(|&x| grid.poles[0] < x) {
        found.push([0.0, 0.0, 1.0]);
    }
    if v.row(nt - 1).iter().all(|&x| grid.poles[1] < x) {
        found.push([0.0, 0.0, -1.0]);
    }
    for i in 0..nt {
        for k in 0..np {
            let c = v[[i, k]];
            let mut is_min = true;
            'scan: for di in [-1isize, 0, 1] {
                let ii = i as isize + di;
                for dk in [-1isize, 0, 1] {
                    if di == 0 && dk == 0 {
                        continue;
                    }
                    let neighbour = if ii < 0 {
                        grid.poles[0]
                    } else if ii >= nt as isize {
                        grid.poles[1]
                    } else {
                        v[[ii as usize, (k as isize + dk).rem_euclid(np as isize) as usize]]
                    };
                    if !(c < neighbour) {
                        is_min = false;
                        break 'scan;
                    }
                }
            }
            if is_min {
                found.push(to_vec(grid.thetas[i], grid.phis[k]));
            }
        }
    }
    found
}

struct Refined {
    point: [f64; 3],
    value: f64,
}

/// Resamples shrinking tangent-plane patches around `start`, then polishes the
/// best sample with the vertex of a quadratic fitted to its 3×3 stencil.
fn refine(h: &Husimi, start: [f64; 3], half_width: f64, opts: &MinimaOptions) -> Result<(Refined, f64)> {
    let sub = opts.subdivisions.max(2) as isize;
    let mut best = Refined { point: start, value: h.eval_vec(start)? };
    let mut width = half_width;
    let mut spacing = width / sub as f64;
    for _ in 0..opts.levels {
        spacing = width / sub as f64;
        let n = best.point;
        let (e1, e2) = tangent_frame(n);
        for a in -sub..=sub {
            for b in -sub..=sub {
                let p = chart(n, e1, e2, a as f64 * spacing, b as f64 * spacing);
                let value = h.eval_vec(p)?;
                if value < best.value {
                    best = Refined { point: p, value };
                }
            }
        }
        width = 2.0 * spacing;
    }
    for _ in 0..2 {
        let n = best.point;
        let (e1, e2) = tangent_frame(n);
        let mut f = [[0.0; 3]; 3];
        for (a, row) in f.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = h.eval_vec(chart(n, e1, e2, (a as f64 - 1.0) * spacing, (b as f64 - 1.0) * spacing))?;
            }
        }
        let gu = (f[2][1] - f[0][1]) / 2.0;
        let gv = (f[1][2] - f[1][0]) / 2.0;
        let huu = f[2][1] - 2.0 * f[1][1] + f[0][1];
        let hvv = f[1][2] - 2.0 * f[1][1] + f[1][0];
        let huv = (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / 4.0;
        let det = huu * hvv - huv * huv;
        if !(det > 0.0 && huu > 0.0) {
            break;
        }
        let du = -(hvv * gu - huv * gv) / det;
        let dv = -(huu * gv - huv * gu) / det;
        if du.abs() > 1.0 || dv.abs() > 1.0 {
            break;
        }
        let p = chart(n, e1, e2, du * spacing, dv * spacing);
        let value = h.eval_vec(p)?;
        if value < best.value {
            best = Refined { point: p, value };
            spacing *= 0.5;
        } else {
            break;
        }
    }
    Ok((best, width))
}

/// Ring samples must exceed this fraction of the grid maximum; the eigen
/// route resolves `H` to roughly `1e-32` of its scale.
const RING_FLOOR: f64 = 1e-28;

/// Point at stereographic coordinate `ζ = ρ e^{iα}` in the chart whose
/// origin is `n` (`ζ = tan(ϑ/2) e^{iα}` with `ϑ` the angle from `n`).
fn stereo(n: [f64; 3], e1: [f64; 3], e2: [f64; 3], rho: f64, alpha: f64) -> [f64; 3] {
    let angle = 2.0 * rho.atan();
    let (s, c) = angle.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    normalize([
        c * n[0] + s * (ca * e1[0] + sa * e2[0]),
        c * n[1] + s * (ca * e1[1] + sa * e2[1]),
        c * n[2] + s * (ca * e1[2] + sa * e2[2]),
    ])
}

/// Number of zeros (with multiplicity) within stereographic radius `rho` of `n`,
/// and the radius finally used.
///
/// For a pure state `H = |P(ζ)|² / (1 + |ζ|²)^{2j}` with `P` a polynomial in
/// the stereographic coordinate centred anywhere on the sphere. By Jensen's
/// formula the circle mean of `ln |P|` grows by `m ln 2` between radii `ρ` and
/// `2ρ` when `m` zeros lie inside `ρ` and none in between, so the count is
/// exact once the known normalisation factor is removed. The radius is
/// doubled until every ring sample is resolved above the rounding floor.
fn zero_order(h: &Husimi, n: [f64; 3], rho: f64, floor: f64) -> Result<(u32, f64)> {
    let (e1, e2) = tangent_frame(n);
    let two_j = 2.0 * h.j();
    let samples = 64;
    let ring_mean = |r: f64| -> Result<Option<f64>> {
        let mut acc = 0.0;
        for s in 0..samples {
            let value = h.eval_vec(stereo(n, e1, e2, r, 2.0 * PI * s as f64 / samples as f64))?;
            if !(value > floor) {
                return Ok(None);
            }
            acc += value.ln();
        }
        Ok(Some(acc / samples as f64 + two_j * (1.0 + r * r).ln()))
    };
    let mut r = rho;
    while r < 4.0 {
        if let (Some(inner), Some(outer)) = (ring_mean(r)?, ring_mean(2.0 * r)?) {
            let order = (outer - inner) / (2.0 * 2f64.ln());
            return Ok((order.round().max(1.0) as u32, r));
        }
        r *= 2.0;
    }
    Ok((1, r))
}

/// Finds, optionally refines, and classifies the local minima of a log-scale grid.
///
/// With refinement, each zero's multiplicity is counted on a small circle
/// around it; other candidates inside that circle are the same zero cluster
/// and are absorbed, which flags the survivor as degenerate.
pub fn find_minima(grid: &HusimiGrid, opts: &MinimaOptions) -> Result<MinimaReport> {
    if grid.scale != Scale::Log {
        return Err(Error::InvalidParameter("minima detection needs a log-scale Husimi grid".into()));
    }
    let hmax = grid.max_value();
    let threshold = opts.zero_threshold * hmax;
    let cell = PI / grid.n_theta() as f64;
    let mut found: Vec<(Minimum, [f64; 3])> = Vec::new();
    let mut merge_radius: f64 = 0.0;
    for start in grid_minima(grid) {
        let (point, value) = if opts.refine {
            let (refined, final_width) = refine(&grid.husimi, start, cell, opts)?;
            merge_radius = merge_radius.max(final_width);
            (refined.point, refined.value)
        } else {
            (start, grid.husimi.eval_vec(start)?)
        };
        let (theta, phi) = to_angles(point);
        let minimum = Minimum { theta, phi, value, is_zero: value < threshold, multiplicity: 1, degenerate: false };
        found.push((minimum, point));
    }
    found.sort_by(|a, b| a.0.value.total_cmp(&b.0.value));
    let mut kept: Vec<(Minimum, [f64; 3], f64)> = Vec::new();
    for (mut m, point) in found {
        if let Some(owner) = kept.iter_mut().find(|(_, q, reach)| angle_between(*q, point) < reach.max(merge_radius)) {
            owner.0.degenerate = true;
            continue;
        }
        let mut reach = 0.0;
        if m.is_zero && opts.refine {
            let (order, rho) = zero_order(&grid.husimi, point, 0.025 * cell, RING_FLOOR * hmax)?;
            m.multiplicity = order;
            m.degenerate = order > 1;
            reach = 2.0 * rho.atan();
        }
        kept.push((m, point, reach));
    }
    let minima: Vec<Minimum> = kept.into_iter().map(|(m, _, _)| m).collect();
    let zeros = minima.iter().filter(|m| m.is_zero).count();
    let zero_multiplicity = minima.iter().filter(|m| m.is_zero).map(|m| m.multiplicity).sum();
    Ok(MinimaReport {
        positive: minima.len() - zeros,
        zeros,
        zero_multiplicity,
        minima,
        threshold,
        n_theta: grid.n_theta(),
        n_phi: grid.n_phi(),
        refinement_levels: if opts.refine { opts.levels } else { 0 },
    })
}
