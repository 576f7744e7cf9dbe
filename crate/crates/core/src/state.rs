//! Certified density operators and orthogonal projections.

use serde::{Deserialize, Serialize};

use crate::error::{QfixError, Result};
use crate::linalg::{hermitian_eig, operator_norm, ComplexMatrix, C64, ONE, ZERO};

/// Default certification tolerance for density operators.
pub const DEFAULT_CERT_TOL: f64 = 1e-9;

/// Measured distance of a matrix from the set of density operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub trace_defect: f64,
}

impl Certification {
    pub fn measure(m: &ComplexMatrix) -> Result<Self> {
        let hermiticity_defect = m.hermiticity_defect();
        let sym = m.symmetrized();
        let eig = hermitian_eig(&sym)?;
        Ok(Self {
            hermiticity_defect,
            min_eigenvalue: eig.values.first().copied().unwrap_or(0.0),
            trace_defect: (m.trace() - ONE).norm(),
        })
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.hermiticity_defect <= tol && self.min_eigenvalue >= -tol && self.trace_defect <= tol
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
///
/// The stored matrix is the Hermitian part `(M + M†)/2` of the certified input.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    cert_tol: f64,
}

impl DensityOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_CERT_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, cert_tol: f64) -> Result<Self> {
        let cert = Certification::measure(&m)?;
        if !cert.passes(cert_tol) {
            return Err(QfixError::NotDensity(format!(
                "hermiticity defect {:e}, min eigenvalue {:e}, trace defect {:e} (tol {cert_tol:e})",
                cert.hermiticity_defect, cert.min_eigenvalue, cert.trace_defect
            )));
        }
        Ok(Self {
            matrix: m.symmetrized(),
            cert_tol,
        })
    }

    /// Skips certification; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self {
            matrix,
            cert_tol: DEFAULT_CERT_TOL,
        }
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = crate::linalg::vector_norm(psi);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QfixError::NotUnitVector { norm });
        }
        Ok(Self::from_trusted(ComplexMatrix::outer(psi, psi)?))
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        Self::from_trusted(ComplexMatrix::unit(dim, index, index))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn cert_tol(&self) -> f64 {
        self.cert_tol
    }

    /// `Re Tr(ρ A)`.
    pub fn expectation(&self, a: &ComplexMatrix) -> f64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.matrix.get(i, k) * a.get(k, i);
            }
        }
        acc.re
    }

    /// `Tr(ρ D)` for a real diagonal observable given by its diagonal.
    pub fn diagonal_expectation(&self, diag: &[f64]) -> f64 {
        diag.iter()
            .enumerate()
            .map(|(i, &x)| self.matrix.get(i, i).re * x)
            .sum()
    }

    /// `t ρ + (1 − t) σ`; no certification needed for `t ∈ [0, 1]`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(QfixError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(QfixError::Invalid(format!("mixing weight {t} outside [0, 1]")));
        }
        Ok(Self::from_trusted(
            &self.matrix.scale(t) + &other.matrix.scale(1.0 - t),
        ))
    }
}

/// Serialized as its matrix in the operator JSON format.
impl Serialize for DensityOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(de)?;
        DensityOperator::new(m).map_err(serde::de::Error::custom)
    }
}

/// Orthogonal projection. `basis_indices` is set when the projection is
/// diagonal in the working basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    matrix: ComplexMatrix,
    basis_indices: Option<Vec<usize>>,
}

impl Projection {
    /// Coordinate projection onto the given basis indices.
    pub fn diagonal(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut idx: Vec<usize> = indices.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
            return Err(QfixError::Invalid(format!(
                "projection index {bad} out of range for dim {dim}"
            )));
        }
        let mut diag = vec![0.0; dim];
        for &i in &idx {
            diag[i] = 1.0;
        }
        Ok(Self {
            matrix: ComplexMatrix::from_real_diagonal(&diag),
            basis_indices: Some(idx),
        })
    }

    /// General projection; checks `P² = P` and `P = P†` within `tol`.
    pub fn from_matrix(m: ComplexMatrix, tol: f64) -> Result<Self> {
        let idem = operator_norm(&(&(&m * &m) - &m));
        let herm = m.hermiticity_defect();
        let defect = idem.max(herm);
        if defect > tol {
            return Err(QfixError::NotProjection { defect });
        }
        Ok(Self {
            matrix: m,
            basis_indices: None,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn basis_indices(&self) -> Option<&[usize]> {
        self.basis_indices.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn rank(&self) -> usize {
        match &self.basis_indices {
            Some(idx) => idx.len(),
            None => self.matrix.trace().re.round() as usize,
        }
    }

    /// `1 − P`.
    pub fn complement(&self) -> Self {
        let d = self.dim();
        let matrix = &ComplexMatrix::identity(d) - &self.matrix;
        let basis_indices = self.basis_indices.as_ref().map(|idx| {
            let mut inside = vec![false; d];
            for &i in idx {
                inside[i] = true;
            }
            (0..d).filter(|&i| !inside[i]).collect()
        });
        Self {
            matrix,
            basis_indices,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match &self.basis_indices {
            Some(idx) => {
                let mut out = vec![ZERO; v.len()];
                for &i in idx {
                    out[i] = v[i];
                }
                out
            }
            None => self.matrix.apply(v),
        }
    }

    /// `P ρ P`.
    pub fn sandwich(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &(&self.matrix * m) * &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_norm;

    #[test]
    fn certification_rejects_bad_matrices() {
        let neg = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(DensityOperator::new(neg).is_err());
        let trace2 = ComplexMatrix::from_real_diagonal(&[1.0, 1.0]);
        assert!(DensityOperator::new(trace2).is_err());
        let nonherm = ComplexMatrix::from_row_major(
            2,
            &[C64::new(0.5, 0.0), C64::new(0.1, 0.0), ZERO, C64::new(0.5, 0.0)],
        )
        .unwrap();
        assert!(DensityOperator::new(nonherm).is_err());
        assert!(DensityOperator::new(ComplexMatrix::from_real_diagonal(&[0.25, 0.75])).is_ok());
    }

    #[test]
    fn pure_state_needs_unit_vector() {
        assert!(DensityOperator::pure(&[ONE, ONE]).is_err());
        let rho = DensityOperator::pure(&[ONE, ZERO]).unwrap();
        assert!((trace_norm(rho.matrix()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_complement_sums_to_identity() {
        let p = Projection::diagonal(5, [0, 3, 3, 1]).unwrap();
        assert_eq!(p.basis_indices().unwrap(), &[0, 1, 3]);
        assert_eq!(p.rank(), 3);
        assert_eq!(&(p.matrix() * p.matrix()), p.matrix());
        let q = p.complement();
        assert_eq!(q.basis_indices().unwrap(), &[2, 4]);
        assert_eq!(&(p.matrix() + q.matrix()), &ComplexMatrix::identity(5));
        assert!(Projection::diagonal(3, [3]).is_err());
    }

    #[test]
    fn general_projection_check() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [C64::new(s, 0.0), C64::new(0.0, s)];
        let p = Projection::from_matrix(ComplexMatrix::outer(&v, &v).unwrap(), 1e-12).unwrap();
        assert_eq!(p.rank(), 1);
        assert!(Projection::from_matrix(ComplexMatrix::from_real_diagonal(&[0.5, 1.0]), 1e-12).is_err());
    }
}
