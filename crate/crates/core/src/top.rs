//! Spin-j kicked top: angular momentum matrices, the one-step Floquet
//! operator, the `Jz ⊗ Jz` coupling and spin coherent states.
//!
//! The basis is ordered `m = j, j-1, ..., -j`; basis index `i` holds
//! `m = j - i`.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{cis, unitary_exp, CMatrix, CVector, DiagonalPhases, Observable, I};

/// Parameters of one kicked top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopParams {
    two_j: u32,
    pub hbar: f64,
    pub k: f64,
}

impl TopParams {
    /// `j` must be a positive integer or half-integer.
    pub fn new(j: f64, hbar: f64, k: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        if !(two_j >= 1.0) || (two_j - two_j.round()).abs() > 1e-12 || two_j > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "spin j = {j} is not a positive integer or half-integer"
            )));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar = {hbar} must be positive")));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("kick strength k = {k} must be >= 0")));
        }
        Ok(TopParams { two_j: two_j.round() as u32, hbar, k })
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Hilbert space dimension `2j + 1`.
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum numbers in basis order.
    pub fn m_values(&self) -> impl Iterator<Item = f64> {
        let j = self.j();
        (0..self.dim()).map(move |i| j - i as f64)
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        TopParams::new(self.j(), self.hbar, k)
    }
}

/// Cartesian angular momentum matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
}

pub fn spin_operators(p: &TopParams) -> SpinOperators {
    let d = p.dim();
    let j = p.j();
    let h = p.hbar;
    let m: Vec<f64> = p.m_values().collect();
    let mut jp = CMatrix::zeros((d, d));
    // J+ |m> = ħ sqrt(j(j+1) - m(m+1)) |m+1>, and |m+1> sits one index lower
    for i in 1..d {
        let mi = m[i];
        jp[[i - 1, i]] = C64::new(h * (j * (j + 1.0) - mi * (mi + 1.0)).max(0.0).sqrt(), 0.0);
    }
    let jm = jp.t().to_owned();
    let jx = (&jp + &jm).mapv(|z| z * 0.5);
    let jy = (&jp - &jm).mapv(|z| z / (2.0 * I));
    let jz = CMatrix::from_diag(&Array1::from_iter(m.iter().map(|&x| C64::new(h * x, 0.0))));
    SpinOperators { jx, jy, jz }
}

/// Torsion factor `exp(-i k Jz² / (2jħ))`, entries `exp(-i k m² ħ / (2j))`.
pub fn top_kick_phases(p: &TopParams) -> DiagonalPhases {
    let j = p.j();
    DiagonalPhases::from_angles(p.m_values().map(|m| -p.k * m * m * p.hbar / (2.0 * j)))
}

/// Rotation factor `exp(-i π Jy / (2ħ))`.
pub fn top_rotation(p: &TopParams) -> Result<CMatrix> {
    let ops = spin_operators(p);
    unitary_exp(&ops.jy, PI / (2.0 * p.hbar))
}

/// One-step operator `U = exp(-i k Jz²/(2jħ)) exp(-i π Jy/(2ħ))`.
pub fn top_floquet(p: &TopParams) -> Result<CMatrix> {
    let mut u = top_rotation(p)?;
    top_kick_phases(p).apply_rows_of(&mut u.view_mut());
    Ok(u)
}

/// `ln n!` for `n = 0..=max`.
fn log_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

/// Precomputed binomial weights for spin coherent states of one `j`.
#[derive(Debug, Clone)]
pub struct CoherentBasis {
    two_j: u32,
    half_log_binom: Vec<f64>,
}

impl CoherentBasis {
    pub fn new(two_j: u32) -> Self {
        let n = two_j as usize;
        let lf = log_factorials(n);
        let half_log_binom = (0..=n).map(|i| 0.5 * (lf[n] - lf[i] - lf[n - i])).collect();
        CoherentBasis { two_j, half_log_binom }
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Moduli `|<j, j-i | θ, φ>|`, which do not depend on φ.
    pub fn magnitudes(&self, theta: f64) -> Vec<f64> {
        let n = self.two_j as usize;
        if theta <= 0.0 {
            let mut v = vec![0.0; n + 1];
            v[0] = 1.0;
            return v;
        }
        if theta >= PI {
            let mut v = vec![0.0; n + 1];
            v[n] = 1.0;
            return v;
        }
        let ls = (0.5 * theta).sin().ln();
        let lc = (0.5 * theta).cos().ln();
        (0..=n)
            .map(|i| (i as f64 * ls + (n - i) as f64 * lc + self.half_log_binom[i]).exp())
            .collect()
    }

    /// `|θ, φ>` with amplitudes `γ^{j-m} (1+|γ|²)^{-j} sqrt((2j)! / ((j+m)!(j-m)!))`,
    /// `γ = e^{iφ} tan(θ/2)`.
    pub fn state(&self, theta: f64, phi: f64) -> CVector {
        self.magnitudes(theta)
            .into_iter()
            .enumerate()
            .map(|(i, a)| a * cis(phi * i as f64))
            .collect()
    }
}

/// Spin coherent state pointing along `(θ, φ)`.
pub fn spin_coherent(p: &TopParams, theta: f64, phi: f64) -> CVector {
    CoherentBasis::new(p.two_j).state(theta, phi)
}

/// Coupling `exp(-i ε Jz₁ Jz₂ / (jħ))` as phases on the product basis,
/// index `i₁·d + i₂`.
pub fn top_coupling(p1: &TopParams, p2: &TopParams, eps: f64) -> Result<DiagonalPhases> {
    if p1.two_j != p2.two_j {
        return Err(Error::MismatchedSpin(p1.two_j, p2.two_j));
    }
    if p1.hbar != p2.hbar {
        return Err(Error::InvalidParameter(format!(
            "coupled tops need a common hbar (got {} and {})",
            p1.hbar, p2.hbar
        )));
    }
    let j = p1.j();
    let h = p1.hbar;
    let m: Vec<f64> = p1.m_values().collect();
    Ok(DiagonalPhases::from_angles(
        m.iter().flat_map(|&m1| m.iter().map(move |&m2| -eps * m1 * m2 * h / j)),
    ))
}

/// Factorization of the coupling potential, `V = (Jz/√j) ⊗ (Jz/√j)`.
pub fn top_coupling_factors(p: &TopParams) -> Vec<(Observable, Observable)> {
    let scale = p.hbar / p.j().sqrt();
    let q = Observable::Diagonal(p.m_values().map(|m| m * scale).collect());
    vec![(q.clone(), q)]
}
