//! Seeded random operators: Ginibre matrices, Haar-like unitaries, states and channels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::{KrausChannel, StinespringChannel};
use crate::linalg::{ComplexMatrix, C64};
use crate::state::DensityOperator;

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_raw(rect_ginibre(rng, dim, dim))
}

fn rect_ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    // Fill row by row so the draw order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ginibre(rng, dim).symmetrized()
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = crate::linalg::vector_norm(&v);
    v.into_iter().map(|z| z / n).collect()
}

/// Random density operator of rank at most `rank`: `G G† / Tr(G G†)` with `G` a
/// `dim × rank` Ginibre matrix.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let g = rect_ginibre(rng, dim, rank.max(1));
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    DensityOperator::from_trusted(ComplexMatrix::from_raw(w.unscale(tr)).symmetrized())
}

/// Unitary from the QR decomposition of a Ginibre matrix with the phases of
/// `R`'s diagonal absorbed, giving the Haar measure.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_raw(haar_columns(rng, dim, dim))
}

/// First `cols` columns of a Haar unitary on `C^rows`: an isometry.
fn haar_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    let g = rect_ginibre(rng, rows, rows);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..rows {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q.columns(0, cols).into_owned()
}

/// Channel with `n_kraus` Kraus operators cut from a random isometry
/// `C^d → C^(n·d)`, so completeness holds to rounding.
pub fn random_kraus_channel<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_kraus: usize) -> KrausChannel {
    let n = n_kraus.max(1);
    let v = haar_columns(rng, n * dim, dim);
    let kraus = (0..n)
        .map(|k| ComplexMatrix::from_raw(v.rows(k * dim, dim).into_owned()))
        .collect();
    KrausChannel::new(kraus).expect("isometry blocks satisfy completeness")
}

/// Stinespring channel with Haar unitary and random environment state.
pub fn random_stinespring<R: Rng + ?Sized>(
    rng: &mut R,
    env_dim: usize,
    sys_dim: usize,
) -> StinespringChannel {
    let u = random_unitary(rng, env_dim * sys_dim);
    let rank = rng.random_range(1..=env_dim);
    let rho_env = random_state(rng, env_dim, rank);
    StinespringChannel::new(env_dim, sys_dim, u, rho_env).expect("Haar unitary is unitary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Certification;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_satisfy_their_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [1, 2, 5, 9] {
            let u = random_unitary(&mut rng, d);
            assert!(u.unitarity_defect() < 1e-12);
            let rho = random_state(&mut rng, d, 2);
            assert!(Certification::measure(rho.matrix()).unwrap().passes(1e-12));
            let c = random_kraus_channel(&mut rng, d, 3);
            assert!(c.completeness_defect() < 1e-12);
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = random_unitary(&mut ChaCha8Rng::seed_from_u64(7), 4);
        let b = random_unitary(&mut ChaCha8Rng::seed_from_u64(7), 4);
        assert_eq!(a, b);
    }
}
