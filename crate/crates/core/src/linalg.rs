//! Dense complex operator algebra.
//!
//! Every operator is a square [`ComplexMatrix`]. Tensor products use a single
//! global index convention: in `a ⊗ b` the first factor is the slow (outer)
//! index, so basis state `|i⟩ ⊗ |j⟩` sits at position `i * dim(b) + j`.
//! Partial traces, channels and CTC scenarios all follow this ordering.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QfixError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default tolerance on the Hermiticity defect accepted by [`hermitian_eig`].
pub const DEFAULT_SYMMETRIZE_TOL: f64 = 1e-8;

/// Square dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Wraps a dense matrix, rejecting non-square or non-finite input.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QfixError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QfixError::NonFinite);
        }
        Ok(Self(m))
    }

    pub(crate) fn from_raw(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    /// Builds a matrix from `dim * dim` entries in row-major order.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QfixError::EntryCount {
                dim,
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// The ket-bra `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(QfixError::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        Ok(Self::from_fn(a.len(), |i, j| a[i] * b[j].conj()))
    }

    /// Matrix unit `|i⟩⟨j|` in dimension `dim`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = ONE;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn row_major_entries(&self) -> Vec<C64> {
        let d = self.dim();
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.conjugate())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// `(M + M†) / 2`.
    pub fn symmetrized(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).scale(0.5))
    }

    /// Operator norm of `M − M†`.
    pub fn hermiticity_defect(&self) -> f64 {
        operator_norm(&Self(&self.0 - self.0.adjoint()))
    }

    /// Operator norm of `M†M − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        operator_norm(&Self(self.0.adjoint() * &self.0 - DMatrix::identity(d, d)))
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.0[(i, j)] == ZERO))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `A B A†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        Self(&a.0 * &self.0 * a.0.adjoint())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Wire format: `{"dim": d, "entries": [[re, im], ...]}`, row-major, `d²` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = QfixError;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let entries: Vec<C64> = j.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        ComplexMatrix::from_row_major(j.dim, &entries)
    }
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        MatrixJson {
            dim: m.dim(),
            entries: m.row_major_entries().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// Kronecker product `a ⊗ b`, first factor outer.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Which tensor factor survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    First,
    Second,
}

/// Reduces an operator on `C^d1 ⊗ C^d2` to the kept factor.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Keep) -> Result<ComplexMatrix> {
    let (d1, d2) = dims;
    if m.dim() != d1 * d2 {
        return Err(QfixError::DimensionMismatch {
            expected: d1 * d2,
            found: m.dim(),
        });
    }
    let a = &m.0;
    let out = match keep {
        Keep::First => DMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| a[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Keep::Second => DMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| a[(k * d2 + i, k * d2 + j)]).sum()
        }),
    };
    Ok(ComplexMatrix(out))
}

/// Singular values, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.dim() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = match to_faer(m).singular_values() {
        Ok(s) => s,
        Err(_) => m.0.clone().singular_values().iter().copied().collect(),
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten 1-norm: sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.0.column(k).iter().copied().collect()
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.vectors.0;
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(k).scale_mut(w);
        }
        ComplexMatrix(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|`, weights in eigenvalue order.
    pub fn reconstruct_with_weights(&self, weights: &[f64]) -> ComplexMatrix {
        let v = &self.vectors.0;
        let mut scaled = v.clone();
        for (k, &w) in weights.iter().enumerate() {
            scaled.column_mut(k).scale_mut(w);
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

/// Hermitian eigendecomposition with the default symmetrize tolerance.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    hermitian_eig_with(m, DEFAULT_SYMMETRIZE_TOL)
}

/// Hermitian eigendecomposition of `(m + m†)/2`.
///
/// Rejects input whose Hermiticity defect exceeds `sym_tol · max(1, ‖m‖_op)`.
pub fn hermitian_eig_with(m: &ComplexMatrix, sym_tol: f64) -> Result<HermitianEig> {
    let d = m.dim();
    if d == 0 {
        return Ok(HermitianEig {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0),
        });
    }
    let defect = m.hermiticity_defect();
    let scale = operator_norm(m).max(1.0);
    if defect > sym_tol * scale {
        return Err(QfixError::Invalid(format!(
            "matrix is not Hermitian within {sym_tol:e} (defect {defect:e})"
        )));
    }
    let max_iter = 100 * d.max(10);
    let eig = m
        .symmetrized()
        .0
        .try_symmetric_eigen(f64::EPSILON, max_iter)
        .ok_or(QfixError::EigenNoConvergence {
            dim: d,
            iterations: max_iter,
        })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig {
        values,
        vectors: ComplexMatrix(vectors),
    })
}

/// Eigenvalues of a general square matrix (QR algorithm with aggressive early
/// deflation; nalgebra's Schur iteration stalls on strongly non-normal
/// superoperators such as the truncated shift's).
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    let d = m.dim();
    if d == 0 {
        return Ok(Vec::new());
    }
    to_faer(m)
        .eigenvalues()
        .map_err(|_| QfixError::DecompositionFailed {
            what: "eigenvalue solver",
            dim: d,
        })
}

fn to_faer(m: &ComplexMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.dim(), m.dim(), |i, j| m.0[(i, j)])
}

/// Full SVD `m = U Σ V†` with singular values sorted descending.
pub(crate) struct Svd {
    pub u: DMatrix<C64>,
    pub v_t: DMatrix<C64>,
}

pub(crate) fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let d = m.dim();
    let s = to_faer(m).svd().map_err(|_| QfixError::DecompositionFailed {
        what: "SVD",
        dim: d,
    })?;
    let (u, sig, v) = (s.U(), s.S().column_vector(), s.V());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sig[b].re.total_cmp(&sig[a].re));
    Ok(Svd {
        u: DMatrix::from_fn(d, d, |i, j| u[(i, order[j])]),
        v_t: DMatrix::from_fn(d, d, |i, j| v[(j, order[i])].conj()),
    })
}

pub fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
