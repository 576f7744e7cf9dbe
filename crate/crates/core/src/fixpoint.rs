//! Fixed points of channels: Cesàro averaging and spectral solving.
//!
//! For any channel `S` and state `ρ₀` the Cesàro mean
//! `ρ(N) = (1/(N+1)) Σ_{k=0}^{N} S^k(ρ₀)` satisfies
//! `S(ρ(N)) − ρ(N) = (S^{N+1}(ρ₀) − ρ₀)/(N+1)`, so its residual in trace norm
//! is at most `2/(N+1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channels::{unvectorize, vectorize, Channel};
use crate::error::{QfixError, Result};
use crate::linalg::{eigenvalues, hermitian_eig, svd, trace_norm, ComplexMatrix, C64, ONE};
use crate::state::DensityOperator;

/// Eigenvalues within this distance of 1 form the fixed-point cluster.
pub const DEFAULT_EIG_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cesaro,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub method: Method,
    /// `‖S(ρ) − ρ‖₁` of the returned state.
    pub residual: f64,
    /// Iteration count `N` for Cesàro, fixed-point multiplicity for spectral.
    pub iterations_or_multiplicity: usize,
    pub rho: DensityOperator,
}

/// `‖S(ρ) − ρ‖₁`.
pub fn residual(s: &Channel, rho: &DensityOperator) -> Result<f64> {
    let out = s.apply(rho.matrix())?;
    Ok(trace_norm(&(&out - rho.matrix())))
}

/// Cesàro mean `ρ(N)` accumulated with one channel application per step.
pub fn cesaro_mean(s: &Channel, rho0: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if s.dim() != rho0.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: s.dim(),
            found: rho0.dim(),
        });
    }
    let mut current = rho0.clone();
    let mut sum = rho0.clone();
    for _ in 0..n {
        current = s.apply(&current)?;
        sum = &sum + &current;
    }
    Ok(sum.scale(1.0 / (n as f64 + 1.0)))
}

pub fn cesaro_iterate(s: &Channel, rho0: &DensityOperator, n: usize) -> Result<FixedPointResult> {
    let mean = cesaro_mean(s, rho0.matrix(), n)?;
    let rho = DensityOperator::with_tolerance(mean, rho0.cert_tol())?;
    let residual = residual(s, &rho)?;
    Ok(FixedPointResult {
        method: Method::Cesaro,
        residual,
        iterations_or_multiplicity: n,
        rho,
    })
}

/// Number of superoperator eigenvalues `λ` with `|λ − 1| ≤ tol`, counted with
/// multiplicity.
pub fn fixed_point_multiplicity(s: &Channel, tol: f64) -> Result<usize> {
    let ev = eigenvalues(s.to_superop()?.matrix())?;
    Ok(ev.iter().filter(|z| (*z - ONE).norm() <= tol).count())
}

pub fn spectral_fixed_point(s: &Channel, tol: f64) -> Result<FixedPointResult> {
    spectral_fixed_point_with(s, tol, DEFAULT_EIG_CLUSTER_TOL)
}

/// Spectral fixed-point solver.
///
/// Counts the eigenvalue-1 cluster of the superoperator `M`, takes the right
/// and left null spaces of `M − I` of that dimension from one SVD, and applies
/// the spectral projector `R (L†R)⁻¹ L†` (the Cesàro limit of `M^k`) to the
/// maximally mixed state. The result is made Hermitian, its negative part is
/// discarded and it is renormalized. Falls back to Cesàro iteration with
/// `N = ⌈2/tol⌉` when the discarded part exceeds `tol` or the residual does.
pub fn spectral_fixed_point_with(
    s: &Channel,
    tol: f64,
    eig_cluster_tol: f64,
) -> Result<FixedPointResult> {
    let d = s.dim();
    let sup = s.to_superop()?;
    let m = sup.matrix();
    let ev = eigenvalues(m)?;
    let closest = ev
        .iter()
        .map(|z| (z - ONE).norm())
        .fold(f64::INFINITY, f64::min);
    let multiplicity = ev
        .iter()
        .filter(|z| (*z - ONE).norm() <= eig_cluster_tol)
        .count();
    if multiplicity == 0 {
        return Err(QfixError::NoFixedPoint { closest });
    }

    let candidate = project_maximally_mixed(m, d, multiplicity)
        .and_then(|y| repair_to_state(&y, tol));
    if let Some(rho) = candidate {
        let r = residual(s, &rho)?;
        if r <= tol {
            return Ok(FixedPointResult {
                method: Method::Spectral,
                residual: r,
                iterations_or_multiplicity: multiplicity,
                rho,
            });
        }
    }
    let n = (2.0 / tol).ceil() as usize;
    cesaro_iterate(s, &DensityOperator::maximally_mixed(d), n)
}

/// Applies the spectral projector of the eigenvalue-1 cluster to `vec(I/d)`.
fn project_maximally_mixed(m: &ComplexMatrix, d: usize, k: usize) -> Option<ComplexMatrix> {
    let d2 = d * d;
    let a = m - &ComplexMatrix::identity(d2);
    let svd = svd(&a).ok()?;
    // smallest k singular values sit at the end
    let right = DMatrix::from_fn(d2, k, |i, j| svd.v_t[(d2 - k + j, i)].conj());
    let left = DMatrix::from_fn(d2, k, |i, j| svd.u[(i, d2 - k + j)]);
    let gram = left.adjoint() * &right;
    let gram_inv = gram.try_inverse()?;
    let x = vectorize(&ComplexMatrix::identity(d).scale(1.0 / d as f64));
    let x = nalgebra::DVector::from_vec(x);
    let y: nalgebra::DVector<C64> = &right * (gram_inv * (left.adjoint() * x));
    unvectorize(y.as_slice(), d).ok()
}

/// Hermitian part, negative part dropped, renormalized; `None` if the dropped
/// part has trace norm above `tol`.
fn repair_to_state(y: &ComplexMatrix, tol: f64) -> Option<DensityOperator> {
    let h = y.symmetrized();
    let eig = hermitian_eig(&h).ok()?;
    let negative: f64 = eig.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if negative > tol {
        return None;
    }
    let positive = eig.reconstruct_with(|v| v.max(0.0));
    let tr = positive.trace().re;
    if tr <= 0.0 {
        return None;
    }
    DensityOperator::new(positive.scale(1.0 / tr)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{deutsch_channel, truncated_shift_channel, KrausChannel};
    use crate::linalg::{operator_norm, ZERO};
    use crate::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn swap(d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d * d, |r, c| {
            if r == (c % d) * d + c / d {
                ONE
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn cesaro_on_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho0 = random::random_state(&mut rng, 3, 3);
        for n in [0, 1, 17] {
            let r = cesaro_iterate(&Channel::identity(3), &rho0, n).unwrap();
            assert!(r.rho.matrix().max_abs_diff(rho0.matrix()) < 1e-14);
            assert!(r.residual < 1e-14);
        }
    }

    #[test]
    fn cesaro_geometric_sum_on_phase_gate() {
        let theta: f64 = 0.7;
        let u = ComplexMatrix::from_diagonal(&[ONE, C64::from_polar(1.0, theta)]);
        let s: Channel = KrausChannel::unitary(u).unwrap().into();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityOperator::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        for n in [0usize, 5, 99] {
            let r = cesaro_iterate(&s, &plus, n).unwrap();
            let geometric: C64 = (0..=n).map(|k| C64::from_polar(1.0, k as f64 * theta)).sum();
            let expected = geometric / (2.0 * (n as f64 + 1.0));
            assert!((r.rho.matrix().get(1, 0) - expected).norm() < 1e-12);
            assert!((r.rho.matrix().get(0, 1) - expected.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn cesaro_bound_and_telescoping() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let d = rng.random_range(2..=5);
            let s: Channel = random::random_kraus_channel(&mut rng, d, 2).into();
            let rho0 = random::random_state(&mut rng, d, 1);
            let n = 99;
            let r = cesaro_iterate(&s, &rho0, n).unwrap();
            assert!(r.residual <= 2.0 / (n as f64 + 1.0) + 1e-9);

            let lhs = &s.apply(r.rho.matrix()).unwrap() - r.rho.matrix();
            let mut power = rho0.matrix().clone();
            for _ in 0..=n {
                power = s.apply(&power).unwrap();
            }
            let rhs = (&power - rho0.matrix()).scale(1.0 / (n as f64 + 1.0));
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn residual_examples() {
        let x = ComplexMatrix::from_row_major(2, &[ZERO, ONE, ONE, ZERO]).unwrap();
        let s: Channel = KrausChannel::unitary(x).unwrap().into();
        let r = residual(&s, &DensityOperator::basis_state(2, 0)).unwrap();
        assert!((r - 2.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Channel = random::random_kraus_channel(&mut rng, 3, 2).into();
        let rho = random::random_state(&mut rng, 3, 3);
        let diff = &c.apply(rho.matrix()).unwrap() - rho.matrix();
        // Hermitian difference: trace norm is the sum of |eigenvalues|
        let oracle: f64 = hermitian_eig(&diff).unwrap().values.iter().map(|v| v.abs()).sum();
        assert!((residual(&c, &rho).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn spectral_identity_swap_and_shift() {
        let r = spectral_fixed_point(&Channel::identity(2), 1e-8).unwrap();
        assert!(r.residual < 1e-12);
        assert_eq!(r.method, Method::Spectral);
        assert_eq!(r.iterations_or_multiplicity, 4);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho_in = random::random_state(&mut rng, 2, 2);
        let sw: Channel = deutsch_channel(&swap(2), &rho_in, 2, 2).unwrap().into();
        let r = spectral_fixed_point(&sw, 1e-8).unwrap();
        assert!(r.residual < 1e-10);
        assert!(r.rho.matrix().max_abs_diff(rho_in.matrix()) < 1e-10);

        let shift: Channel = truncated_shift_channel(5).unwrap().into();
        let r = spectral_fixed_point(&shift, 1e-8).unwrap();
        assert!(r.residual < 1e-10);
        assert!(r.rho.matrix().max_abs_diff(&ComplexMatrix::unit(5, 4, 4)) < 1e-10);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(fixed_point_multiplicity(&Channel::identity(2), 1e-8).unwrap(), 4);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho_in = random::random_state(&mut rng, 2, 2);
        let sw: Channel = deutsch_channel(&swap(2), &rho_in, 2, 2).unwrap().into();
        assert_eq!(fixed_point_multiplicity(&sw, 1e-8).unwrap(), 1);

        // U = exp(-iH) with non-degenerate H: diagonal operators in the H eigenbasis are fixed.
        let h = random::random_hermitian(&mut rng, 3);
        let eig = hermitian_eig(&h).unwrap();
        let v = &eig.vectors;
        let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, -l)).collect();
        let u = &(v * &ComplexMatrix::from_diagonal(&phases)) * &v.adjoint();
        let s: Channel = KrausChannel::unitary(u.clone()).unwrap().into();
        assert_eq!(fixed_point_multiplicity(&s, 1e-8).unwrap(), 3);

        let r = spectral_fixed_point(&s, 1e-8).unwrap();
        assert!(operator_norm(&r.rho.matrix().commutator(&u)) <= 1e-8);
    }

    #[test]
    fn spectral_on_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let d = rng.random_range(2..=6);
            let k = rng.random_range(1..=3);
            let s: Channel = random::random_kraus_channel(&mut rng, d, k).into();
            let r = spectral_fixed_point(&s, 1e-8).unwrap();
            assert!(r.residual <= 1e-8);
            let again = residual(&s, &r.rho).unwrap();
            assert!((again - r.residual).abs() <= 1e-12);
        }
    }

    #[test]
    fn result_json_shape() {
        let r = spectral_fixed_point(&Channel::identity(2), 1e-8).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["method"], "spectral");
        assert_eq!(v["iterations_or_multiplicity"], 4);
        assert_eq!(v["rho"]["dim"], 2);
        assert!(v["residual"].is_number());
    }

    #[test]
    fn dimension_mismatch() {
        let rho = DensityOperator::maximally_mixed(3);
        assert!(cesaro_iterate(&Channel::identity(2), &rho, 3).is_err());
    }
}
