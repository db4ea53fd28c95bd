//! Kicked rotor quantized on the 2π × 2π torus.
//!
//! Periodicity in both angle and momentum leaves an `N`-dimensional Hilbert
//! space with `N ħ = 2π`. States are stored in the position basis
//! `θ_n = 2πn/N`; the unitary DFT maps them to the momentum basis, where DFT
//! index `n` carries momentum `I = ħ n'` with the signed representative
//! `n' = n` for `n < ⌈N/2⌉` and `n' = n - N` otherwise.

use std::f64::consts::TAU;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector, DiagonalPhases, Dft, Direction, Observable};

/// Parameters of one kicked rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorParams {
    n: usize,
    pub hbar: f64,
    pub k: f64,
}

/// Torus quantization for a given `ħ`, with no kick.
pub fn rotor_space(hbar: f64) -> Result<RotorParams> {
    RotorParams::new(hbar, 0.0)
}

impl RotorParams {
    pub fn new(hbar: f64, k: f64) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar = {hbar} must be positive")));
        }
        if !k.is_finite() {
            return Err(Error::InvalidParameter(format!("kick strength k = {k} is not finite")));
        }
        let ratio = TAU / hbar;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 || n < 1.0 {
            return Err(Error::NonIntegerTorus(ratio));
        }
        Ok(RotorParams { n: n as usize, hbar, k })
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        RotorParams::new(self.hbar, k)
    }

    /// Grid size `N = 2π/ħ`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn theta_grid(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |i| TAU * i as f64 / self.n as f64)
    }

    /// Signed momentum quantum number of DFT index `idx`.
    pub fn signed_index(&self, idx: usize) -> i64 {
        let n = self.n as i64;
        let idx = idx as i64;
        if idx < (n + 1) / 2 {
            idx
        } else {
            idx - n
        }
    }

    /// Momentum values in DFT index order.
    pub fn momentum_grid(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |i| TAU * self.signed_index(i) as f64 / self.n as f64)
    }

    /// DFT index of momentum `i0`, if it lies on the grid.
    pub fn momentum_index(&self, i0: f64) -> Option<usize> {
        let q = i0 / self.hbar;
        let r = q.round();
        if (q - r).abs() * self.hbar > 1e-9 {
            return None;
        }
        Some((r as i64).rem_euclid(self.n as i64) as usize)
    }
}

/// Free-rotation phases `exp(-i I²/(2ħ))` in the momentum basis.
pub fn rotor_free_phases(p: &RotorParams) -> DiagonalPhases {
    DiagonalPhases::from_angles(p.momentum_grid().iter().map(|&i| -i * i / (2.0 * p.hbar)))
}

/// Kick phases `exp(-i k cos θ / ħ)` in the position basis.
pub fn rotor_kick_phases(p: &RotorParams) -> DiagonalPhases {
    DiagonalPhases::from_angles(p.theta_grid().iter().map(|&t| -p.k * t.cos() / p.hbar))
}

/// Split-step one-period map: kick in position space, then free rotation in
/// momentum space.
#[derive(Debug, Clone)]
pub struct RotorMap {
    kick: DiagonalPhases,
    free: DiagonalPhases,
    dft: Dft,
}

impl RotorMap {
    pub fn new(p: &RotorParams) -> Result<Self> {
        Ok(RotorMap { kick: rotor_kick_phases(p), free: rotor_free_phases(p), dft: Dft::new(p.n)? })
    }

    pub fn dim(&self) -> usize {
        self.dft.len()
    }

    /// Largest deviation of the kick and free phases from unit modulus; the
    /// DFT itself is unitary by construction.
    pub fn phase_defect(&self) -> f64 {
        self.kick.modulus_defect().max(self.free.modulus_defect())
    }

    /// Advances every length-`N` chunk of `buf` by one period.
    pub fn apply_chunks(&self, buf: &mut [C64]) {
        let n = self.dim();
        for chunk in buf.chunks_exact_mut(n) {
            self.kick.apply(chunk);
        }
        self.dft.process(buf, Direction::Forward);
        for chunk in buf.chunks_exact_mut(n) {
            self.free.apply(chunk);
        }
        self.dft.process(buf, Direction::Inverse);
    }
}

/// One period of the kicked rotor applied to a position-basis state.
pub fn rotor_step(p: &RotorParams, psi: &CVector) -> Result<CVector> {
    if psi.len() != p.n {
        return Err(Error::DimensionMismatch { context: "rotor_step", expected: p.n, found: psi.len() });
    }
    let map = RotorMap::new(p)?;
    let mut buf = psi.to_vec();
    map.apply_chunks(&mut buf);
    Ok(CVector::from(buf))
}

/// Coupling `exp(-i ε cos(θ_a - θ_b)/ħ)` on the product position basis,
/// index `a·N + b`.
pub fn rotor_coupling_phases(p: &RotorParams, eps: f64) -> DiagonalPhases {
    let theta = p.theta_grid();
    DiagonalPhases::from_angles(
        theta.iter().flat_map(|&a| theta.iter().map(move |&b| -eps * (a - b).cos() / p.hbar)),
    )
}

/// `cos(θ₁-θ₂) = cos θ₁ cos θ₂ + sin θ₁ sin θ₂`.
pub fn rotor_coupling_factors(p: &RotorParams) -> Vec<(Observable, Observable)> {
    let theta = p.theta_grid();
    let c = Observable::Diagonal(theta.mapv(f64::cos));
    let s = Observable::Diagonal(theta.mapv(f64::sin));
    vec![(c.clone(), c), (s.clone(), s)]
}

/// Wrapped Gaussian centred at `θ₀` with mean momentum `I₀` and position
/// width `σ`, normalized on the grid.
pub fn torus_coherent(p: &RotorParams, theta0: f64, i0: f64, sigma: f64) -> Result<CVector> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("coherent width sigma = {sigma} must be positive")));
    }
    if !theta0.is_finite() {
        return Err(Error::InvalidParameter(format!("theta0 = {theta0} is not finite")));
    }
    let n_mom = p.momentum_index(i0).ok_or(Error::OffGridMomentum(i0))?;
    let n_signed = p.signed_index(n_mom) as f64;
    let theta0 = theta0.rem_euclid(TAU);
    // |θ_n - θ₀| < 2π, so image w contributes at most exp(-(2π(|w|-1))²/(4σ²))
    let reach = (4.0 * sigma * sigma * (1e14_f64).ln()).sqrt();
    let images = (reach / TAU).ceil() as i64 + 1;
    let mut psi: CVector = p
        .theta_grid()
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for w in -images..=images {
                let x = t - theta0 + TAU * w as f64;
                acc += (-x * x / (4.0 * sigma * sigma)).exp();
            }
            // I₀(θ + 2πw)/ħ differs from I₀θ/ħ by a multiple of 2π on the grid
            acc * cis(n_signed * t)
        })
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Invariant("coherent state vanished on the grid".into()));
    }
    psi.mapv_inplace(|z| z / norm);
    Ok(psi)
}

/// Default width `√(ħ/2)`.
pub fn default_sigma(p: &RotorParams) -> f64 {
    (p.hbar / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::linalg::{dft, kron, max_abs, unitary_exp, unitarity_defect, CMatrix};

    #[test]
    fn space_from_hbar() {
        let p = rotor_space(TAU / 128.0).unwrap();
        assert_eq!(p.n(), 128);
        assert!((p.n() as f64 * p.hbar - TAU).abs() < 1e-12);
        let p4 = rotor_space(TAU / 4.0).unwrap();
        let mut grid = p4.momentum_grid().to_vec();
        grid.sort_by(f64::total_cmp);
        let expected = [-PI, -PI / 2.0, 0.0, PI / 2.0];
        for (g, e) in grid.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
        assert!(matches!(rotor_space(1.0), Err(Error::NonIntegerTorus(_))));
        assert_eq!(p4.theta_grid().len(), 4);
    }

    #[test]
    fn free_phase_values() {
        let p = rotor_space(TAU / 4.0).unwrap();
        let ph = rotor_free_phases(&p);
        assert_eq!(ph.0[0], C64::new(1.0, 0.0));
        assert!((ph.0[1] - cis(-PI / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn kick_phase_values() {
        let p = RotorParams::new(TAU / 16.0, 2.0).unwrap();
        let ph = rotor_kick_phases(&p);
        assert!((ph.0[0] - cis(-2.0 / p.hbar)).norm() < 1e-15);
        let zero = rotor_kick_phases(&p.with_k(0.0).unwrap());
        assert!(zero.0.iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn momentum_eigenstate_under_free_rotation() {
        let p = rotor_space(TAU / 32.0).unwrap();
        for idx in [0, 3, 17, 31] {
            let n_signed = p.signed_index(idx) as f64;
            let psi: CVector =
                p.theta_grid().iter().map(|&t| cis(n_signed * t) / (32f64).sqrt()).collect();
            let out = rotor_step(&p, &psi).unwrap();
            let i = p.momentum_grid()[idx];
            let phase = cis(-i * i / (2.0 * p.hbar));
            let expected = psi.mapv(|z| z * phase);
            assert!(out.iter().zip(expected.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    fn dense_floquet(p: &RotorParams) -> CMatrix {
        let n = p.n();
        let mut u = CMatrix::zeros((n, n));
        for col in 0..n {
            let mut e = CVector::zeros(n);
            e[col] = C64::new(1.0, 0.0);
            let out = rotor_step(p, &e).unwrap();
            u.column_mut(col).assign(&out);
        }
        u
    }

    #[test]
    fn split_step_matches_explicit_matrix() {
        let p = RotorParams::new(TAU / 8.0, 1.7).unwrap();
        let n = 8;
        // F[n, x] = N^{-1/2} exp(-2πi n x / N)
        let f = CMatrix::from_shape_fn((n, n), |(a, b)| {
            cis(-TAU * (a * b) as f64 / n as f64) / (n as f64).sqrt()
        });
        let explicit = crate::linalg::adjoint(&f)
            .dot(&rotor_free_phases(&p).to_dense())
            .dot(&f)
            .dot(&rotor_kick_phases(&p).to_dense());
        let split = dense_floquet(&p);
        assert!(max_abs(&(split.clone() - explicit)) < 1e-12);
        assert!(unitarity_defect(&split) < 1e-12);
    }

    #[test]
    fn step_rejects_wrong_dimension() {
        let p = rotor_space(TAU / 8.0).unwrap();
        assert!(matches!(
            rotor_step(&p, &CVector::zeros(7)),
            Err(Error::DimensionMismatch { expected: 8, found: 7, .. })
        ));
    }

    #[test]
    fn free_evolution_keeps_momentum_distribution() {
        let p = rotor_space(TAU / 64.0).unwrap();
        let psi = torus_coherent(&p, 1.0, 5.0 * p.hbar, 0.3).unwrap();
        let before = dft(&psi, Direction::Forward).unwrap();
        let mut state = psi;
        for _ in 0..50 {
            state = rotor_step(&p, &state).unwrap();
        }
        let after = dft(&state, Direction::Forward).unwrap();
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-14);
        }
    }

    #[test]
    fn coupling_phases_and_factors() {
        let p = rotor_space(TAU / 8.0).unwrap();
        let zero = rotor_coupling_phases(&p, 0.0);
        assert!(zero.0.iter().all(|z| *z == C64::new(1.0, 0.0)));
        let eps = 0.21;
        let ph = rotor_coupling_phases(&p, eps);
        for a in 0..8 {
            assert!((ph.0[a * 8 + a] - cis(-eps / p.hbar)).norm() < 1e-15);
            for b in 0..8 {
                assert!((ph.0[a * 8 + b] - ph.0[b * 8 + a]).norm() < 1e-15);
            }
        }
        let factors = rotor_coupling_factors(&p);
        assert_eq!(factors.len(), 2);
        let mut v = CMatrix::zeros((64, 64));
        for (q1, q2) in &factors {
            assert!(matches!(q1, Observable::Diagonal(_)));
            v = v + kron(&q1.to_dense(), &q2.to_dense()).unwrap();
        }
        let dense = unitary_exp(&v, eps / p.hbar).unwrap();
        assert!(max_abs(&(dense - ph.to_dense())) < 1e-12);
    }

    #[test]
    fn coherent_state_properties() {
        let p = rotor_space(TAU / 128.0).unwrap();
        let psi = torus_coherent(&p, 1.0, 0.0, 0.3).unwrap();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);

        let theta0 = 2.2;
        let psi = torus_coherent(&p, theta0, 3.0 * p.hbar, 0.2).unwrap();
        let mean: C64 = psi.iter().zip(p.theta_grid().iter()).map(|(z, &t)| z.norm_sqr() * cis(t)).sum();
        assert!((mean.arg() - theta0).abs() < 1e-6);

        let wide = torus_coherent(&p, 0.5, 0.0, 10.0).unwrap();
        let uniform = 1.0 / (128f64).sqrt();
        let overlap: C64 = wide.iter().map(|z| z * uniform).sum();
        assert!(overlap.norm() > 0.999);
    }

    #[test]
    fn coherent_rejects_off_grid_momentum() {
        let p = rotor_space(TAU / 128.0).unwrap();
        assert!(matches!(torus_coherent(&p, 0.0, 0.5 * p.hbar, 0.2), Err(Error::OffGridMomentum(_))));
        assert!(torus_coherent(&p, 0.0, 0.0, 0.0).is_err());
    }
}
