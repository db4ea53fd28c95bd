//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `ndarray` arrays of [`C64`]. Hermitian eigendecompositions are
//! delegated to `nalgebra`; the discrete Fourier transform to `rustfft`.

use std::{fmt, sync::Arc};

use nalgebra as na;
use ndarray::{Array1, Array2, ArrayViewMut2, Axis};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// Unitarity tolerance for constructed operators.
pub const UNITARY_TOL: f64 = 1e-12;
/// Largest number of entries `kron` will allocate by default (2^26, 1 GiB).
pub const KRON_MAX_ENTRIES: usize = 1 << 26;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `exp(i x)`.
#[inline]
pub fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

/// Kronecker product `A ⊗ B` with the default size limit.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_limit(a, b, KRON_MAX_ENTRIES)
}

/// Kronecker product, rejecting results with more than `max_entries` entries.
pub fn kron_with_limit(a: &CMatrix, b: &CMatrix, max_entries: usize) -> Result<CMatrix> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let overflow = |rows, cols| Error::DimensionOverflow { rows, cols, max: max_entries };
    let rows = ra.checked_mul(rb).ok_or(overflow(usize::MAX, 0))?;
    let cols = ca.checked_mul(cb).ok_or(overflow(rows, usize::MAX))?;
    match rows.checked_mul(cols) {
        Some(n) if n <= max_entries => {}
        _ => return Err(overflow(rows, cols)),
    }
    let mut out = CMatrix::zeros((rows, cols));
    for ((i, j), &aij) in a.indexed_iter() {
        if aij == C64::new(0.0, 0.0) {
            continue;
        }
        let mut block = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
        block.zip_mut_with(b, |o, &bkl| *o = aij * bkl);
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// `max |A - A†|`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let (r, c) = a.dim();
    if r != c {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..r {
        for j in i..c {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `max |U†U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let (r, c) = u.dim();
    if r != c {
        return f64::INFINITY;
    }
    let prod = adjoint(u).dot(u);
    prod.indexed_iter()
        .map(|((i, j), z)| if i == j { (z - 1.0).norm() } else { z.norm() })
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; column `k` of the unitary
/// matrix is the eigenvector belonging to eigenvalue `k`.
pub fn hermitian_eig(h: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    let (n, c) = h.dim();
    if n != c {
        return Err(Error::DimensionMismatch { context: "hermitian_eig", expected: n, found: c });
    }
    let defect = hermiticity_defect(h);
    if defect >= 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), CMatrix::zeros((0, 0))));
    }
    // symmetrize before handing off so the solver sees an exactly Hermitian input
    let m = na::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[[i, j]] + h[[j, i]].conj()));
    let eig = na::SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = CMatrix::from_shape_fn((n, n), |(i, col)| eig.eigenvectors[(i, order[col])]);
    Ok((values, vectors))
}

/// `exp(-i s H)` for Hermitian `H`, built from its eigendecomposition.
pub fn unitary_exp(h: &CMatrix, s: f64) -> Result<CMatrix> {
    let (values, v) = hermitian_eig(h)?;
    let mut scaled = v.clone();
    for (mut col, &lambda) in scaled.axis_iter_mut(Axis(1)).zip(values.iter()) {
        let phase = cis(-s * lambda);
        col.mapv_inplace(|z| z * phase);
    }
    Ok(scaled.dot(&adjoint(&v)))
}

/// A diagonal unitary stored as its vector of phases.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPhases(pub CVector);

impl DiagonalPhases {
    pub fn from_angles<It: IntoIterator<Item = f64>>(angles: It) -> Self {
        DiagonalPhases(angles.into_iter().map(cis).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice().expect("contiguous phase vector")
    }

    /// Multiplies `v` elementwise in place.
    pub fn apply(&self, v: &mut [C64]) {
        debug_assert_eq!(v.len(), self.len());
        for (x, p) in v.iter_mut().zip(self.0.iter()) {
            *x *= p;
        }
    }

    /// Scales row `i` of `m` by phase `i`.
    pub fn apply_rows_of(&self, m: &mut ArrayViewMut2<C64>) {
        for (mut row, p) in m.axis_iter_mut(Axis(0)).zip(self.0.iter()) {
            row.mapv_inplace(|z| z * p);
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        CMatrix::from_diag(&self.0)
    }

    /// `max ||p| - 1|`.
    pub fn modulus_defect(&self) -> f64 {
        self.0.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Hermitian observable acting on one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Dense(CMatrix),
    /// Real diagonal in the computational basis.
    Diagonal(Array1<f64>),
}

impl Observable {
    pub fn dim(&self) -> usize {
        match self {
            Observable::Dense(m) => m.nrows(),
            Observable::Diagonal(d) => d.len(),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            Observable::Dense(m) => m.dot(v),
            Observable::Diagonal(d) => v * &d.mapv(|x| C64::new(x, 0.0)),
        }
    }

    /// Applies the observable to every column of `m`.
    pub fn apply_columns(&self, m: &CMatrix) -> CMatrix {
        match self {
            Observable::Dense(q) => q.dot(m),
            Observable::Diagonal(d) => {
                let mut out = m.clone();
                for (mut row, &x) in out.axis_iter_mut(Axis(0)).zip(d.iter()) {
                    row.mapv_inplace(|z| z * x);
                }
                out
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Observable {
        match self {
            Observable::Dense(m) => Observable::Dense(m.mapv(|z| z * c)),
            Observable::Diagonal(d) => Observable::Diagonal(d * c),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Observable::Dense(m) => m.clone(),
            Observable::Diagonal(d) => CMatrix::from_diag(&d.mapv(|x| C64::new(x, 0.0))),
        }
    }
}

/// Transform direction for [`dft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unitary DFT plan of fixed length, `1/√N` normalization in both directions.
///
/// Forward: `X_n = N^{-1/2} Σ_x v_x exp(-2πi n x / N)`.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("DFT length must be at least 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Dft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Transforms consecutive chunks of length `n` in place.
    pub fn process(&self, buf: &mut [C64], dir: Direction) {
        debug_assert_eq!(buf.len() % self.n, 0);
        match dir {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }
}

/// One-shot unitary DFT.
pub fn dft(v: &CVector, dir: Direction) -> Result<CVector> {
    let plan = Dft::new(v.len())?;
    let mut buf = v.to_vec();
    plan.process(&mut buf, dir);
    Ok(CVector::from(buf))
}
