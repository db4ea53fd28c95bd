//! Bipartite pure-state evolution under `U_ε (U₁ ⊗ U₂)`, partial traces and
//! the linear entropy.
//!
//! A joint state is kept as its `d₁ × d₂` coefficient matrix `C`, so `U₁`
//! acts as `U₁ C`, `U₂` as `C U₂ᵀ`, and the diagonal coupling elementwise.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, hermitian_eig, kron, unitarity_defect, unitary_exp, CMatrix, CVector, DiagonalPhases, Observable};
use crate::rotor::{rotor_coupling_factors, rotor_coupling_phases, RotorMap, RotorParams};
use crate::top::{top_coupling, top_coupling_factors, top_floquet, TopParams};

/// Which model a [`FloquetSystem`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Top,
    Rotor,
}

/// One-step operator of a single subsystem.
#[derive(Debug, Clone)]
pub enum Propagator {
    Dense(CMatrix),
    SplitStep(RotorMap),
}

impl Propagator {
    pub fn dim(&self) -> usize {
        match self {
            Propagator::Dense(u) => u.nrows(),
            Propagator::SplitStep(map) => map.dim(),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            Propagator::Dense(u) => u.dot(v),
            Propagator::SplitStep(map) => {
                let mut buf = v.to_vec();
                map.apply_chunks(&mut buf);
                CVector::from(buf)
            }
        }
    }

    /// Replaces every column `v` of `m` by `U v`.
    pub fn apply_columns(&self, m: &mut CMatrix) {
        match self {
            Propagator::Dense(u) => *m = u.dot(&*m),
            Propagator::SplitStep(_) => {
                let mut t = m.t().as_standard_layout().into_owned();
                self.apply_rows(&mut t);
                *m = t.reversed_axes().as_standard_layout().into_owned();
            }
        }
    }

    /// Replaces every row `v` of `m` by `U v`, i.e. `m ← m Uᵀ`.
    pub fn apply_rows(&self, m: &mut CMatrix) {
        match self {
            Propagator::Dense(u) => *m = m.dot(&u.t()),
            Propagator::SplitStep(map) => {
                if !m.is_standard_layout() {
                    *m = m.as_standard_layout().into_owned();
                }
                map.apply_chunks(m.as_slice_mut().expect("standard layout"));
            }
        }
    }

    /// `max |U†U - I|` for dense operators; phase moduli for split-step maps.
    pub fn unitarity_defect(&self) -> f64 {
        match self {
            Propagator::Dense(u) => unitarity_defect(u),
            Propagator::SplitStep(map) => map.phase_defect(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Propagator::Dense(u) => u.clone(),
            Propagator::SplitStep(_) => {
                let mut m = CMatrix::eye(self.dim());
                self.apply_columns(&mut m);
                m
            }
        }
    }
}

/// Two kicked subsystems and their diagonal coupling.
#[derive(Debug, Clone)]
pub struct FloquetSystem {
    pub kind: SystemKind,
    pub u1: Propagator,
    pub u2: Propagator,
    pub coupling: DiagonalPhases,
    /// Factorization `V = Σ_α q_α⁽¹⁾ ⊗ q_α⁽²⁾` with `U_ε = exp(-iεV/ħ)`.
    pub factors: Vec<(Observable, Observable)>,
    pub eps: f64,
    pub hbar: f64,
}

impl FloquetSystem {
    pub fn tops(p1: &TopParams, p2: &TopParams, eps: f64) -> Result<Self> {
        let coupling = top_coupling(p1, p2, eps)?;
        Ok(FloquetSystem {
            kind: SystemKind::Top,
            u1: Propagator::Dense(top_floquet(p1)?),
            u2: Propagator::Dense(top_floquet(p2)?),
            coupling,
            factors: top_coupling_factors(p1),
            eps,
            hbar: p1.hbar,
        })
    }

    pub fn rotors(p1: &RotorParams, p2: &RotorParams, eps: f64) -> Result<Self> {
        if p1.n() != p2.n() || p1.hbar != p2.hbar {
            return Err(Error::DimensionMismatch { context: "coupled rotors", expected: p1.n(), found: p2.n() });
        }
        Ok(FloquetSystem {
            kind: SystemKind::Rotor,
            u1: Propagator::SplitStep(RotorMap::new(p1)?),
            u2: Propagator::SplitStep(RotorMap::new(p2)?),
            coupling: rotor_coupling_phases(p1, eps),
            factors: rotor_coupling_factors(p1),
            eps,
            hbar: p1.hbar,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u1.dim(), self.u2.dim())
    }

    /// Dense `U_ε (U₁ ⊗ U₂)` on the flattened product space.
    pub fn dense_operator(&self) -> Result<CMatrix> {
        let mut u = kron(&self.u1.to_dense(), &self.u2.to_dense())?;
        self.coupling.apply_rows_of(&mut u.view_mut());
        Ok(u)
    }

    /// `max |exp(-iε Σ q⊗q / ħ) - U_ε|`, built densely; small dimensions only.
    pub fn factor_consistency(&self) -> Result<f64> {
        let (d1, d2) = self.dims();
        let mut v = CMatrix::zeros((d1 * d2, d1 * d2));
        for (q1, q2) in &self.factors {
            v = v + kron(&q1.to_dense(), &q2.to_dense())?;
        }
        let u = unitary_exp(&v, self.eps / self.hbar)?;
        Ok((u - self.coupling.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Unitarity defects of `U₁` and `U₂`.
    pub fn unitarity_defects(&self) -> (f64, f64) {
        (unitarity_defect(&self.u1.to_dense()), unitarity_defect(&self.u2.to_dense()))
    }
}

/// Joint pure state `Σ C[i,j] |i⟩⊗|j⟩` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    pub coeffs: CMatrix,
    pub t: usize,
}

impl BipartiteState {
    pub fn product(a: &CVector, b: &CVector) -> Self {
        let coeffs = CMatrix::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        BipartiteState { coeffs, t: 0 }
    }

    /// Builds a state from a row-major flattened vector of length `d1·d2`.
    pub fn from_flat(v: &CVector, d1: usize, d2: usize) -> Result<Self> {
        if v.len() != d1 * d2 {
            return Err(Error::DimensionMismatch { context: "BipartiteState::from_flat", expected: d1 * d2, found: v.len() });
        }
        let coeffs = CMatrix::from_shape_vec((d1, d2), v.to_vec()).expect("shape checked");
        Ok(BipartiteState { coeffs, t: 0 })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coeffs.dim()
    }

    /// Row-major flattening, index `i·d₂ + j`.
    pub fn flatten(&self) -> CVector {
        self.coeffs.iter().copied().collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Advances `psi` by one step in place.
pub fn step_in_place(sys: &FloquetSystem, psi: &mut BipartiteState) -> Result<()> {
    let (d1, d2) = sys.dims();
    let (r, c) = psi.dims();
    if r != d1 {
        return Err(Error::DimensionMismatch { context: "step (subsystem 1)", expected: d1, found: r });
    }
    if c != d2 {
        return Err(Error::DimensionMismatch { context: "step (subsystem 2)", expected: d2, found: c });
    }
    sys.u1.apply_columns(&mut psi.coeffs);
    sys.u2.apply_rows(&mut psi.coeffs);
    if !psi.coeffs.is_standard_layout() {
        psi.coeffs = psi.coeffs.as_standard_layout().into_owned();
    }
    sys.coupling.apply(psi.coeffs.as_slice_mut().expect("standard layout"));
    psi.t += 1;
    Ok(())
}

/// `|Ψ(t+1)⟩ = U_ε U₁ U₂ |Ψ(t)⟩`.
pub fn step(sys: &FloquetSystem, psi: &BipartiteState) -> Result<BipartiteState> {
    let mut next = psi.clone();
    step_in_place(sys, &mut next)?;
    Ok(next)
}

/// Applies `steps` one-step maps.
pub fn evolve(sys: &FloquetSystem, psi0: &BipartiteState, steps: usize) -> Result<BipartiteState> {
    let mut psi = psi0.clone();
    for _ in 0..steps {
        step_in_place(sys, &mut psi)?;
    }
    Ok(psi)
}

/// Density matrix of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    rho: CMatrix,
}

impl ReducedDensity {
    /// Validates Hermiticity and unit trace (both to 1e-12).
    pub fn from_matrix(rho: CMatrix) -> Result<Self> {
        let (r, c) = rho.dim();
        if r != c {
            return Err(Error::DimensionMismatch { context: "ReducedDensity", expected: r, found: c });
        }
        let herm = crate::linalg::hermiticity_defect(&rho);
        if herm > 1e-12 {
            return Err(Error::Invariant(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr: C64 = rho.diag().sum();
        if (tr - 1.0).norm() > 1e-12 {
            return Err(Error::Invariant(format!("density matrix trace {tr} differs from 1")));
        }
        Ok(ReducedDensity { rho })
    }

    /// Pure-state projector `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &CVector) -> Self {
        let n = psi.len();
        ReducedDensity { rho: CMatrix::from_shape_fn((n, n), |(i, k)| psi[i] * psi[k].conj()) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.diag().sum()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        Ok(hermitian_eig(&self.rho)?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Elementwise `|ρ_{m₁ m₂}|`.
    pub fn magnitudes(&self) -> ndarray::Array2<f64> {
        self.rho.mapv(|z| z.norm())
    }
}

fn symmetrize(m: CMatrix) -> CMatrix {
    let adj = adjoint(&m);
    (m + adj).mapv(|z| z * 0.5)
}

/// `ρ⁽¹⁾ = Tr₂ |Ψ⟩⟨Ψ|`, i.e. `C C†`.
pub fn reduced_density(psi: &BipartiteState) -> ReducedDensity {
    let c = &psi.coeffs;
    ReducedDensity { rho: symmetrize(c.dot(&adjoint(c))) }
}

/// `ρ⁽²⁾ = Tr₁ |Ψ⟩⟨Ψ|`, i.e. `Cᵀ C̄`.
pub fn reduced_density_second(psi: &BipartiteState) -> ReducedDensity {
    let c = &psi.coeffs;
    ReducedDensity { rho: symmetrize(c.t().dot(&c.mapv(|z| z.conj()))) }
}

/// Tolerance beyond which an out-of-range linear entropy is an error.
const ENTROPY_TOL: f64 = 1e-10;

/// `S_lin = 1 - Tr ρ²`, clamped to `[0, 1 - 1/d]`.
pub fn linear_entropy(rho: &ReducedDensity) -> Result<f64> {
    let d = rho.dim() as f64;
    let s = 1.0 - rho.purity();
    let max = 1.0 - 1.0 / d;
    if !s.is_finite() || s < -ENTROPY_TOL || s > max + ENTROPY_TOL {
        return Err(Error::Invariant(format!("linear entropy {s} outside [0, {max}]")));
    }
    Ok(s.clamp(0.0, max))
}

/// Linear entropy sampled on integer steps.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EntropySeries {
    pub times: Vec<usize>,
    pub values: Vec<f64>,
    /// Dimension of the traced-to subsystem; bounds the entropy by `1 - 1/dim`.
    pub dim: usize,
}

impl EntropySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_possible(&self) -> f64 {
        1.0 - 1.0 / self.dim as f64
    }

    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.times.iter().position(|&x| x == t).map(|i| self.values[i])
    }
}

/// Exact `S_lin(t)` for `t = 0, stride, 2·stride, ..., T` (always including `T`).
pub fn evolve_series(sys: &FloquetSystem, psi0: &BipartiteState, steps: usize, stride: usize) -> Result<EntropySeries> {
    if steps == 0 {
        return Err(Error::InvalidParameter("series needs at least one step".into()));
    }
    let stride = stride.max(1);
    let mut psi = psi0.clone();
    let mut times = vec![psi.t];
    let mut values = vec![linear_entropy(&reduced_density(&psi))?];
    for n in 1..=steps {
        step_in_place(sys, &mut psi)?;
        if n % stride == 0 || n == steps {
            times.push(psi.t);
            values.push(linear_entropy(&reduced_density(&psi))?);
        }
    }
    Ok(EntropySeries { times, values, dim: psi0.dims().0 })
}

/// Applies a dense operator on the flattened product space.
pub fn apply_dense(u: &CMatrix, psi: &BipartiteState) -> Result<BipartiteState> {
    let (d1, d2) = psi.dims();
    let v = u.dot(&psi.flatten());
    let mut out = BipartiteState::from_flat(&v, d1, d2)?;
    out.t = psi.t + 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::top::spin_coherent;
    use std::f64::consts::TAU;

    fn random_vector(n: usize, seed: u64) -> CVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: CVector = (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv(|z| z / norm)
    }

    fn small_tops(eps: f64) -> FloquetSystem {
        let p1 = TopParams::new(2.0, 1.0, 2.5).unwrap();
        let p2 = TopParams::new(2.0, 1.0, 4.0).unwrap();
        FloquetSystem::tops(&p1, &p2, eps).unwrap()
    }

    #[test]
    fn uncoupled_product_stays_product() {
        let sys = small_tops(0.0);
        let a = random_vector(5, 1);
        let b = random_vector(5, 2);
        let mut psi = BipartiteState::product(&a, &b);
        for _ in 0..20 {
            psi = step(&sys, &psi).unwrap();
            assert!(linear_entropy(&reduced_density(&psi)).unwrap() < 1e-14);
        }
        assert_eq!(psi.t, 20);
    }

    #[test]
    fn step_matches_dense_operator() {
        let sys = small_tops(0.3);
        let dense = sys.dense_operator().unwrap();
        let mut psi = BipartiteState::from_flat(&random_vector(25, 3), 5, 5).unwrap();
        for _ in 0..10 {
            let exact = apply_dense(&dense, &psi).unwrap();
            psi = step(&sys, &psi).unwrap();
            assert!(max_abs(&(&psi.coeffs - &exact.coeffs)) < 1e-12);
        }
    }

    #[test]
    fn rotor_step_matches_dense_operator() {
        let p1 = RotorParams::new(TAU / 8.0, 3.0).unwrap();
        let p2 = RotorParams::new(TAU / 8.0, 5.0).unwrap();
        let sys = FloquetSystem::rotors(&p1, &p2, 0.2).unwrap();
        assert!(sys.factor_consistency().unwrap() < 1e-12);
        let dense = sys.dense_operator().unwrap();
        assert!(unitarity_defect(&dense) < 1e-12);
        let psi = BipartiteState::from_flat(&random_vector(64, 4), 8, 8).unwrap();
        let exact = apply_dense(&dense, &psi).unwrap();
        let got = step(&sys, &psi).unwrap();
        assert!(max_abs(&(&got.coeffs - &exact.coeffs)) < 1e-12);
    }

    #[test]
    fn subsystem_order_is_irrelevant() {
        let sys = small_tops(0.0);
        let psi = BipartiteState::from_flat(&random_vector(25, 5), 5, 5).unwrap();
        let mut a = psi.coeffs.clone();
        sys.u1.apply_columns(&mut a);
        sys.u2.apply_rows(&mut a);
        let mut b = psi.coeffs.clone();
        sys.u2.apply_rows(&mut b);
        sys.u1.apply_columns(&mut b);
        assert!(max_abs(&(a - b)) < 1e-12);
    }

    #[test]
    fn step_rejects_mismatched_state() {
        let sys = small_tops(0.1);
        let psi = BipartiteState::product(&random_vector(4, 1), &random_vector(5, 1));
        assert!(matches!(step(&sys, &psi), Err(Error::DimensionMismatch { expected: 5, found: 4, .. })));
    }

    #[test]
    fn reduced_density_examples() {
        let a = random_vector(3, 7);
        let b = random_vector(4, 8);
        let rho = reduced_density(&BipartiteState::product(&a, &b));
        assert!(max_abs(&(rho.matrix() - ReducedDensity::pure(&a).matrix())) < 1e-15);
        assert!(linear_entropy(&rho).unwrap() < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = BipartiteState::from_flat(
            &ndarray::array![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)],
            2,
            2,
        )
        .unwrap();
        let rho = reduced_density(&bell);
        assert!(max_abs(&(rho.matrix() - CMatrix::eye(2).mapv(|z| z * 0.5))) < 1e-15);
        assert!((linear_entropy(&rho).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_entropy() {
        let d = 7;
        let rho = ReducedDensity::from_matrix(CMatrix::eye(d).mapv(|z| z / d as f64)).unwrap();
        assert!((linear_entropy(&rho).unwrap() - (1.0 - 1.0 / d as f64)).abs() < 1e-15);
    }

    #[test]
    fn from_matrix_validates() {
        assert!(ReducedDensity::from_matrix(CMatrix::eye(2)).is_err());
        let mut m = CMatrix::eye(2).mapv(|z| z * 0.5);
        m[[0, 1]] = C64::new(0.0, 0.1);
        assert!(ReducedDensity::from_matrix(m).is_err());
    }

    #[test]
    fn entropy_rejects_unphysical_purity() {
        // trace-one Hermitian matrix with purity > 1
        let m = ndarray::array![[C64::new(2.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]];
        let rho = ReducedDensity::from_matrix(m).unwrap();
        assert!(matches!(linear_entropy(&rho), Err(Error::Invariant(_))));
    }

    #[test]
    fn degenerate_subsystem_has_zero_entropy() {
        let psi = BipartiteState::from_flat(&random_vector(6, 9), 1, 6).unwrap();
        assert_eq!(linear_entropy(&reduced_density(&psi)).unwrap(), 0.0);
    }

    #[test]
    fn series_zero_without_coupling() {
        let p = TopParams::new(10.0, 1.0, 3.0).unwrap();
        let sys = FloquetSystem::tops(&p, &p, 0.0).unwrap();
        let c = spin_coherent(&p, 0.89, 0.63);
        let series = evolve_series(&sys, &BipartiteState::product(&c, &c), 30, 1).unwrap();
        assert_eq!(series.len(), 31);
        assert!(series.values.iter().all(|&s| s < 1e-13));
    }

    #[test]
    fn series_stride_keeps_endpoint() {
        let sys = small_tops(0.1);
        let a = random_vector(5, 3);
        let series = evolve_series(&sys, &BipartiteState::product(&a, &a), 10, 3).unwrap();
        assert_eq!(series.times, vec![0, 3, 6, 9, 10]);
        assert!(evolve_series(&sys, &BipartiteState::product(&a, &a), 0, 1).is_err());
    }
}
