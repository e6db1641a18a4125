//! Dense complex matrices and density-operator validation.
//!
//! Everything else in the crate is built on [`ComplexMatrix`], a thin newtype
//! over a square `nalgebra` matrix of `Complex64`. Target dimensions are small
//! (a few qubits), so all storage is dense.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has zero dimension")]
    Empty,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("row {row} has {len} entries, expected {expected}")]
    RaggedRow { row: usize, len: usize, expected: usize },
}

/// Square dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<C64>) -> Result<Self, OperatorError> {
        if inner.nrows() != inner.ncols() {
            return Err(OperatorError::NotSquare {
                rows: inner.nrows(),
                cols: inner.ncols(),
            });
        }
        if inner.nrows() == 0 {
            return Err(OperatorError::Empty);
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OperatorError::NonFinite);
        }
        Ok(Self(inner))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, OperatorError> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(OperatorError::RaggedRow {
                    row: r,
                    len: row.len(),
                    expected: n,
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, OperatorError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn projector(psi: &[C64]) -> Self {
        let n = psi.len();
        Self(DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |M − M†|` entrywise.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }

    /// Eigendecomposition of a Hermitian matrix. Only the lower triangle of the
    /// Hermitian part is meaningful; callers hermitize first if in doubt.
    pub fn eigh(&self) -> HermitianEigen {
        let eig = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        HermitianEigen {
            values,
            vectors: ComplexMatrix(vectors),
        }
    }

    fn check_same_dim(&self, other: &Self) -> Result<(), OperatorError> {
        if self.dim() != other.dim() {
            return Err(OperatorError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

// Row-major array of [re, im] pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut rows = serializer.serialize_seq(Some(n))?;
        for i in 0..n {
            let row: Vec<[f64; 2]> = (0..n)
                .map(|j| {
                    let z = self.0[(i, j)];
                    [z.re, z.im]
                })
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(&rows).map_err(de::Error::custom)
    }
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, OperatorError> {
    a.check_same_dim(b)?;
    Ok(&(a * b) - &(b * a))
}

pub fn anticommutator(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix, OperatorError> {
    a.check_same_dim(b)?;
    Ok(&(a * b) + &(b * a))
}

/// `(m + m†)/2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.dim();
    let mut out = m.0.clone();
    for i in 0..n {
        out[(i, i)] = C64::new(m.0[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (m.0[(i, j)] + m.0[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    ComplexMatrix(out)
}

/// Tolerances shared by every validity check in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Entrywise Hermiticity tolerance.
    pub herm: f64,
    /// Unit-trace tolerance.
    pub trace: f64,
    /// Allowed negativity of the smallest eigenvalue.
    pub pos: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            trace: 1e-9,
            pos: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("not Hermitian: max |M - M^dagger| = {0:e}")]
    NotHermitian(f64),
    #[error("trace deviates from 1 by {0:e}")]
    TraceDeviation(f64),
    #[error("negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// A validated density operator: Hermitian, unit trace, positive semidefinite
/// within the run tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `|Tr ρ − 1|`.
    pub fn trace_drift(&self) -> f64 {
        (self.matrix.trace() - C64::new(1.0, 0.0)).norm()
    }
}

pub fn validate_density(
    m: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<DensityMatrix, DensityError> {
    if !m.is_finite() {
        return Err(DensityError::NonFinite);
    }
    let herm_dev = m.hermiticity_deviation();
    if herm_dev > tol.herm {
        return Err(DensityError::NotHermitian(herm_dev));
    }
    let tr_dev = (m.trace() - C64::new(1.0, 0.0)).norm();
    if tr_dev > tol.trace {
        return Err(DensityError::TraceDeviation(tr_dev));
    }
    let min_eig = hermitize(m).eigh().values[0];
    if min_eig < -tol.pos {
        return Err(DensityError::NegativeEigenvalue(min_eig));
    }
    Ok(DensityMatrix {
        matrix: m.clone(),
        min_eigenvalue: min_eig,
    })
}

/// Single-qubit operators in the computational basis `{|0⟩, |1⟩}`, with
/// `σ_z = diag(1, −1)` and `σ₋ = |0⟩⟨1|` (decay `|1⟩ → |0⟩`).
pub mod pauli {
    use super::{ComplexMatrix, C64};

    fn m(rows: [[C64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).expect("2x2 literal")
    }

    const O: C64 = C64::new(0.0, 0.0);
    const R: C64 = C64::new(1.0, 0.0);
    const J: C64 = C64::new(0.0, 1.0);

    pub fn sigma_x() -> ComplexMatrix {
        m([[O, R], [R, O]])
    }

    pub fn sigma_y() -> ComplexMatrix {
        m([[O, -J], [J, O]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        m([[R, O], [O, -R]])
    }

    pub fn sigma_minus() -> ComplexMatrix {
        m([[O, R], [O, O]])
    }

    pub fn sigma_plus() -> ComplexMatrix {
        m([[O, O], [R, O]])
    }

    pub fn ground() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, 0.0])
    }

    pub fn excited() -> ComplexMatrix {
        ComplexMatrix::diag(&[0.0, 1.0])
    }

    /// `|+⟩⟨+| = (I + σ_x)/2`.
    pub fn plus() -> ComplexMatrix {
        m([[R * 0.5, R * 0.5], [R * 0.5, R * 0.5]])
    }
}
