//! Truncated Fock spaces, the constraint set `K`, and the truncation
//! inequalities behind its total boundedness.
//!
//! A [`FockSpace`] enumerates occupation vectors over a finite list of
//! single-particle energies, cut off at total particle number `n_max` and
//! total energy `e_max`. Its basis diagonalizes both the number operator and
//! the free Hamiltonian, so the joint projection-valued measure of `(N̂, Ê)` is
//! the map from basis labels `(n, e)` to coordinate projections.
//!
//! `K` is the set of density operators whose expectation vector
//! `(Tr ρA₁, …, Tr ρA_m)` lies in the box `∏ [0, b_i]`. For `ε > 0` the cutoff
//! `n_{i,ε}` is the least positive integer with `4m·b_i/n < ε²`, and `P_ε`
//! projects onto the basis states whose labels all satisfy `x_i ≤ n_{i,ε}`.
//! Markov's inequality then gives `Tr(ρP_ε) ≥ 1 − ε²/4` on `K`, and
//! `‖P_ε ρ P_ε − ρ‖₁ ≤ 2√Tr((1−P_ε)ρ) ≤ ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QfixError, Result};
use crate::linalg::{hermitian_eig, trace_norm, vector_norm, ComplexMatrix, C64};
use crate::random;
use crate::state::{DensityOperator, Projection};

/// Default upper bound on the number of enumerated basis states.
pub const DEFAULT_BASIS_CAP: usize = 4096;
/// Slack on membership boundary decisions.
pub const DEFAULT_K_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

/// `{"energies": [...], "statistics": "boson"|"fermion", "n_max": .., "e_max": ..}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    pub energies: Vec<f64>,
    pub statistics: Statistics,
    pub n_max: usize,
    pub e_max: f64,
}

/// `{"bounds": [N, E]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub bounds: Vec<f64>,
}

/// One occupation-number basis vector with its `(n, e)` label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockState {
    pub occupations: Vec<usize>,
    pub n: usize,
    pub e: f64,
}

/// `a ≤ b` up to relative rounding, so energies like `0.1 + 0.2` meet a bound of `0.3`.
fn le_slack(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * b.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockSpace {
    mode_energies: Vec<f64>,
    statistics: Statistics,
    n_max: usize,
    e_max: f64,
    basis: Vec<FockState>,
}

impl FockSpace {
    pub fn from_spec(spec: &FockSpec) -> Result<Self> {
        build_fock(&spec.energies, spec.statistics, spec.n_max, spec.e_max)
    }

    pub fn spec(&self) -> FockSpec {
        FockSpec {
            energies: self.mode_energies.clone(),
            statistics: self.statistics,
            n_max: self.n_max,
            e_max: self.e_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[FockState] {
        &self.basis
    }

    pub fn mode_energies(&self) -> &[f64] {
        &self.mode_energies
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// The all-zero occupation vector is lexicographically first.
    pub fn vacuum_index(&self) -> usize {
        0
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        self.basis.iter().position(|s| s.occupations == occupations)
    }

    pub fn number_labels(&self) -> Vec<f64> {
        self.basis.iter().map(|s| s.n as f64).collect()
    }

    pub fn energy_labels(&self) -> Vec<f64> {
        self.basis.iter().map(|s| s.e).collect()
    }

    /// Joint spectral points `(n, e)` of every basis vector.
    pub fn pvm_grid(&self) -> PvmGrid {
        PvmGrid {
            points: self.basis.iter().map(|s| vec![s.n as f64, s.e]).collect(),
        }
    }

    pub fn vacuum(&self) -> DensityOperator {
        DensityOperator::basis_state(self.dim(), self.vacuum_index())
    }
}

pub fn build_fock(
    mode_energies: &[f64],
    statistics: Statistics,
    n_max: usize,
    e_max: f64,
) -> Result<FockSpace> {
    build_fock_capped(mode_energies, statistics, n_max, e_max, DEFAULT_BASIS_CAP)
}

/// Enumerates every occupation vector with `n ≤ n_max` and `e ≤ e_max` in
/// lexicographic order.
pub fn build_fock_capped(
    mode_energies: &[f64],
    statistics: Statistics,
    n_max: usize,
    e_max: f64,
    cap: usize,
) -> Result<FockSpace> {
    if mode_energies.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(QfixError::Invalid("mode energies must be positive and finite".into()));
    }
    if mode_energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(QfixError::Invalid("mode energies must be ascending".into()));
    }
    if !(e_max.is_finite() && e_max >= 0.0) {
        return Err(QfixError::Invalid("e_max must be finite and non-negative".into()));
    }
    let max_occ = match statistics {
        Statistics::Boson => usize::MAX,
        Statistics::Fermion => 1,
    };
    let mut basis = Vec::new();
    let mut occ = vec![0; mode_energies.len()];
    enumerate(
        mode_energies,
        max_occ,
        n_max,
        e_max,
        cap,
        0,
        0,
        0.0,
        &mut occ,
        &mut basis,
    )?;
    Ok(FockSpace {
        mode_energies: mode_energies.to_vec(),
        statistics,
        n_max,
        e_max,
        basis,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    energies: &[f64],
    max_occ: usize,
    n_max: usize,
    e_max: f64,
    cap: usize,
    mode: usize,
    n: usize,
    e: f64,
    occ: &mut Vec<usize>,
    out: &mut Vec<FockState>,
) -> Result<()> {
    if mode == energies.len() {
        if out.len() >= cap {
            return Err(QfixError::BasisTooLarge { cap });
        }
        out.push(FockState {
            occupations: occ.clone(),
            n,
            e,
        });
        return Ok(());
    }
    let mut k = 0;
    loop {
        let nk = n + k;
        let ek = e + k as f64 * energies[mode];
        if k > max_occ || nk > n_max || !le_slack(ek, e_max) {
            break;
        }
        occ[mode] = k;
        enumerate(energies, max_occ, n_max, e_max, cap, mode + 1, nk, ek, occ, out)?;
        k += 1;
    }
    occ[mode] = 0;
    Ok(())
}

/// `N̂` as a diagonal matrix.
pub fn number_operator(f: &FockSpace) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&f.number_labels())
}

/// `Ê = dΓ(H₁)` as a diagonal matrix.
pub fn energy_operator(f: &FockSpace) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&f.energy_labels())
}

/// Per-basis-vector points of the joint spectral measure, all in the positive octant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvmGrid {
    points: Vec<Vec<f64>>,
}

impl PvmGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let m = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != m) {
            return Err(QfixError::Invalid("PVM points have inconsistent arity".into()));
        }
        if points.iter().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(QfixError::Invalid(
                "PVM points must lie in the positive octant".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn arity(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest value of coordinate `i` over the grid.
    pub fn coordinate_max(&self, i: usize) -> f64 {
        self.points.iter().map(|p| p[i]).fold(0.0, f64::max)
    }
}

/// Number of basis vectors with `n ≤ a1` and `e ≤ a2`: the rank of the joint
/// spectral projection of the box `[0, a1] × [0, a2]`.
pub fn spectral_subspace_dim(f: &FockSpace, a1: f64, a2: f64) -> usize {
    f.basis
        .iter()
        .filter(|s| le_slack(s.n as f64, a1) && le_slack(s.e, a2))
        .count()
}

/// `i(e)`: single-particle levels (with multiplicity) of energy at most `e`.
pub fn single_particle_count(f: &FockSpace, e: f64) -> usize {
    f.mode_energies.iter().filter(|&&x| le_slack(x, e)).count()
}

/// `Σ_{n ∈ ℤ ∩ [0, a1]} i(a2)ⁿ`, saturating.
pub fn combinatorial_bound(f: &FockSpace, a1: f64, a2: f64) -> u128 {
    if a1 < 0.0 {
        return 0;
    }
    let i = single_particle_count(f, a2) as u128;
    let top = a1.floor() as u64;
    let mut total: u128 = 0;
    let mut power: u128 = 1;
    for _ in 0..=top {
        total = total.saturating_add(power);
        power = power.saturating_mul(i);
        if power == 0 && i == 0 {
            // 0ⁿ = 0 for n ≥ 1: nothing more to add
            break;
        }
    }
    total
}

/// Commuting diagonal observables `A₁ … A_m` with box bounds `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    observables: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

impl ConstraintSet {
    /// Each observable is given by its (non-negative) diagonal.
    pub fn new(observables: Vec<Vec<f64>>, bounds: Vec<f64>) -> Result<Self> {
        if observables.is_empty() || observables.len() != bounds.len() {
            return Err(QfixError::Invalid(format!(
                "{} observables but {} bounds",
                observables.len(),
                bounds.len()
            )));
        }
        let dim = observables[0].len();
        if observables.iter().any(|o| o.len() != dim) {
            return Err(QfixError::Invalid("observables differ in dimension".into()));
        }
        if observables.iter().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(QfixError::Invalid("observables must be positive".into()));
        }
        if bounds.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(QfixError::Invalid("bounds must be positive and finite".into()));
        }
        Ok(Self {
            observables,
            bounds,
        })
    }

    /// `A₁ = N̂`, `A₂ = Ê` with bounds `(N, E)`.
    pub fn number_energy(f: &FockSpace, n_bound: f64, e_bound: f64) -> Result<Self> {
        Self::new(
            vec![f.number_labels(), f.energy_labels()],
            vec![n_bound, e_bound],
        )
    }

    pub fn from_spec(f: &FockSpace, spec: &ConstraintSpec) -> Result<Self> {
        match spec.bounds.as_slice() {
            [n, e] => Self::number_energy(f, *n, *e),
            other => Err(QfixError::Invalid(format!(
                "constraint bounds must be [N, E], got {} values",
                other.len()
            ))),
        }
    }

    pub fn m(&self) -> usize {
        self.bounds.len()
    }

    pub fn dim(&self) -> usize {
        self.observables[0].len()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn observable_diagonals(&self) -> &[Vec<f64>] {
        &self.observables
    }

    pub fn observable_matrices(&self) -> Vec<ComplexMatrix> {
        self.observables
            .iter()
            .map(|d| ComplexMatrix::from_real_diagonal(d))
            .collect()
    }

    pub fn pvm_grid(&self) -> PvmGrid {
        PvmGrid {
            points: (0..self.dim())
                .map(|i| self.observables.iter().map(|o| o[i]).collect())
                .collect(),
        }
    }

    /// Basis indices whose labels lie in the box: the range of `P(B)`.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| {
                self.observables
                    .iter()
                    .zip(&self.bounds)
                    .all(|(o, &b)| le_slack(o[i], b))
            })
            .collect()
    }

    pub fn expectations(&self, rho: &DensityOperator) -> Vec<f64> {
        self.observables
            .iter()
            .map(|o| rho.diagonal_expectation(o))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub expectations: Vec<f64>,
}

pub fn k_membership(rho: &DensityOperator, k: &ConstraintSet) -> Result<Membership> {
    k_membership_with(rho, k, DEFAULT_K_TOL)
}

/// `member ⇔ −k_tol ≤ Tr(ρA_i) ≤ b_i + k_tol` for every `i`.
pub fn k_membership_with(rho: &DensityOperator, k: &ConstraintSet, k_tol: f64) -> Result<Membership> {
    if rho.dim() != k.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: k.dim(),
            found: rho.dim(),
        });
    }
    let expectations = k.expectations(rho);
    let member = expectations
        .iter()
        .zip(k.bounds())
        .all(|(&x, &b)| x >= -k_tol && x <= b + k_tol);
    Ok(Membership {
        member,
        expectations,
    })
}

/// Mixture `αρ_a + (1−α)ρ_b` stays in `K` and its expectation vector is the
/// same mixture of the endpoint vectors.
pub fn convexity_check(
    rho_a: &DensityOperator,
    rho_b: &DensityOperator,
    alpha: f64,
    k: &ConstraintSet,
) -> Result<bool> {
    let ma = k_membership(rho_a, k)?;
    let mb = k_membership(rho_b, k)?;
    for m in [&ma, &mb] {
        if !m.member {
            return Err(QfixError::NotInK {
                expectations: m.expectations.clone(),
            });
        }
    }
    let mix = rho_a.mix(rho_b, alpha)?;
    let mm = k_membership(&mix, k)?;
    let linear = mm
        .expectations
        .iter()
        .zip(ma.expectations.iter().zip(&mb.expectations))
        .all(|(&x, (&a, &b))| {
            let expected = alpha * a + (1.0 - alpha) * b;
            (x - expected).abs() <= 1e-12 * expected.abs().max(1.0)
        });
    Ok(mm.member && linear)
}

/// Least positive integer `n` with `4m·b/n < ε²`.
pub fn markov_cutoff(m: usize, b: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(QfixError::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(b.is_finite() && b >= 0.0) || m == 0 {
        return Err(QfixError::Invalid("bound must be non-negative and m positive".into()));
    }
    let ratio = 4.0 * m as f64 * b;
    let eps2 = epsilon * epsilon;
    let holds = |n: u64| ratio / (n as f64) < eps2;
    let estimate = (ratio / eps2).floor();
    if estimate >= u64::MAX as f64 / 2.0 {
        return Err(QfixError::Invalid("cutoff overflows u64".into()));
    }
    // the closed-form guess can be off by one under rounding; settle locally
    let mut n = (estimate as u64).saturating_add(1).max(1);
    while n > 1 && holds(n - 1) {
        n -= 1;
    }
    while !holds(n) {
        n += 1;
    }
    Ok(n)
}

/// `P_ε = P(∏ [0, n_{i,ε}])` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationProjection {
    pub epsilon: f64,
    pub n_cutoffs: Vec<u64>,
    pub projection: Projection,
    /// Some cutoff reaches past the largest grid value in its coordinate, so the
    /// finite model already truncates harder than `P_ε` there.
    pub exceeds_basis: bool,
}

pub fn truncation_projection(
    k: &ConstraintSet,
    grid: &PvmGrid,
    epsilon: f64,
) -> Result<TruncationProjection> {
    if grid.len() != k.dim() || grid.arity() != k.m() {
        return Err(QfixError::Invalid(format!(
            "grid of {} points × {} coordinates does not match constraint set ({} × {})",
            grid.len(),
            grid.arity(),
            k.dim(),
            k.m()
        )));
    }
    let m = k.m();
    let n_cutoffs = k
        .bounds()
        .iter()
        .map(|&b| markov_cutoff(m, b, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let inside = grid.points().iter().enumerate().filter_map(|(idx, p)| {
        p.iter()
            .zip(&n_cutoffs)
            .all(|(&x, &n)| x <= n as f64)
            .then_some(idx)
    });
    let projection = Projection::diagonal(grid.len(), inside)?;
    let exceeds_basis = n_cutoffs
        .iter()
        .enumerate()
        .any(|(i, &n)| n as f64 >= grid.coordinate_max(i));
    Ok(TruncationProjection {
        epsilon,
        n_cutoffs,
        projection,
        exceeds_basis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovCheck {
    /// `Tr(ρP_ε)`.
    pub mass: f64,
    /// `1 − ε²/4`.
    pub bound: f64,
    pub pass: bool,
}

pub fn markov_mass_check(rho: &DensityOperator, p_eps: &TruncationProjection) -> Result<MarkovCheck> {
    let p = &p_eps.projection;
    if p.dim() != rho.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: p.dim(),
            found: rho.dim(),
        });
    }
    let mass = rho.expectation(p.matrix());
    let bound = 1.0 - p_eps.epsilon * p_eps.epsilon / 4.0;
    Ok(MarkovCheck {
        mass,
        bound,
        pass: mass >= bound - 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationDefect {
    /// `‖P_ε ρ P_ε − ρ‖₁`.
    pub defect: f64,
    /// `2√Tr((1−P_ε)ρ)`.
    pub jensen_bound: f64,
    pub pass: bool,
}

pub fn truncation_defect(rho: &DensityOperator, p_eps: &TruncationProjection) -> Result<TruncationDefect> {
    let p = &p_eps.projection;
    if p.dim() != rho.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: p.dim(),
            found: rho.dim(),
        });
    }
    let cut = p.sandwich(rho.matrix());
    let defect = trace_norm(&(&cut - rho.matrix()));
    let outside = rho.expectation(p.complement().matrix()).max(0.0);
    let jensen_bound = 2.0 * outside.sqrt();
    Ok(TruncationDefect {
        defect,
        jensen_bound,
        pass: defect <= jensen_bound + 1e-10,
    })
}

/// The three sides of `‖PψψP − ψψ‖₁ = β√(4−3β²) ≤ 2β`, `β = ‖(1−P)ψ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankOneNorm {
    pub beta: f64,
    pub numeric: f64,
    pub closed_form: f64,
    pub two_beta_bound: f64,
}

pub fn rank_one_truncation_norm(psi: &[C64], p: &Projection) -> Result<RankOneNorm> {
    if psi.len() != p.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: p.dim(),
            found: psi.len(),
        });
    }
    let norm = vector_norm(psi);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(QfixError::NotUnitVector { norm });
    }
    let inside = p.apply(psi);
    let outside: Vec<C64> = psi.iter().zip(&inside).map(|(a, b)| a - b).collect();
    let alpha = vector_norm(&inside);
    let beta = vector_norm(&outside);

    if alpha == 0.0 {
        // O = −|ψ⟩⟨ψ|
        return Ok(RankOneNorm {
            beta: 1.0,
            numeric: 1.0,
            closed_form: 1.0,
            two_beta_bound: 2.0,
        });
    }
    if beta == 0.0 {
        return Ok(RankOneNorm {
            beta: 0.0,
            numeric: 0.0,
            closed_form: 0.0,
            two_beta_bound: 0.0,
        });
    }
    let o = &ComplexMatrix::outer(&inside, &inside)? - &ComplexMatrix::outer(psi, psi)?;
    let numeric: f64 = hermitian_eig(&o)?.values.iter().map(|v| v.abs()).sum();
    Ok(RankOneNorm {
        beta,
        numeric,
        closed_form: beta * (4.0 - 3.0 * beta * beta).sqrt(),
        two_beta_bound: 2.0 * beta,
    })
}

/// The restriction of `PψψP − ψψ` to `span{a, b}` with `ψ = αa + βb`, `α = √(1−β²)`.
pub fn lemma_matrix(beta: f64) -> ComplexMatrix {
    let alpha = (1.0 - beta * beta).max(0.0).sqrt();
    let off = C64::new(-alpha * beta, 0.0);
    ComplexMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => C64::new(0.0, 0.0),
        (1, 1) => C64::new(-beta * beta, 0.0),
        _ => off,
    })
}

/// `λ_{1,2} = −β/2 (β ± √(4−3β²))`, returned ascending.
pub fn lemma_eigenvalues(beta: f64) -> (f64, f64) {
    let root = (4.0 - 3.0 * beta * beta).sqrt();
    (-beta / 2.0 * (beta + root), -beta / 2.0 * (beta - root))
}

/// Deterministic sample of members of `K`.
///
/// Sample 0 is the lowest-excitation basis state inside the box (the vacuum
/// whenever the box contains it). The rest cycle through three kinds:
/// random states supported on `range P(B)`; a random state on the whole space
/// mixed into the anchor; and a single random basis state mixed into the
/// anchor. Mixtures use the largest weight that keeps every expectation in
/// the box, scaled by a random factor in `[0.5, 1)`, so they put as much
/// weight on high labels as `K` allows.
pub fn sample_k(k: &ConstraintSet, f: &FockSpace, count: usize, seed: u64) -> Result<Vec<DensityOperator>> {
    if f.dim() != k.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: k.dim(),
            found: f.dim(),
        });
    }
    let interior = k.interior_indices();
    if interior.is_empty() {
        return Err(QfixError::EmptySupport);
    }
    let dim = k.dim();
    let excitation = |i: usize| -> f64 {
        k.observable_diagonals()
            .iter()
            .zip(k.bounds())
            .map(|(o, &b)| o[i] / b)
            .sum()
    };
    let anchor_idx = interior
        .iter()
        .copied()
        .min_by(|&a, &b| excitation(a).total_cmp(&excitation(b)).then(a.cmp(&b)))
        .expect("interior is non-empty");
    let anchor = DensityOperator::basis_state(dim, anchor_idx);
    let anchor_exp = k.expectations(&anchor);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let rho = if j == 0 {
            anchor.clone()
        } else if j % 3 == 1 {
            let rank = rng.random_range(1..=interior.len().min(4));
            let local = random::random_state(&mut rng, interior.len(), rank);
            embed(&local, &interior, dim)
        } else {
            let sigma = if j % 3 == 2 {
                let rank = rng.random_range(1..=dim.min(4));
                random::random_state(&mut rng, dim, rank)
            } else {
                DensityOperator::basis_state(dim, rng.random_range(0..dim))
            };
            let sigma_exp = k.expectations(&sigma);
            let mut t_max: f64 = 1.0;
            for ((&s, &a), &b) in sigma_exp.iter().zip(&anchor_exp).zip(k.bounds()) {
                if s > b {
                    t_max = t_max.min((b - a) / (s - a));
                }
            }
            let u: f64 = rng.random_range(0.5..1.0);
            sigma.mix(&anchor, (t_max * u).clamp(0.0, 1.0))?
        };
        debug_assert!(k_membership(&rho, k)?.member);
        out.push(rho);
    }
    Ok(out)
}

fn embed(local: &DensityOperator, indices: &[usize], dim: usize) -> DensityOperator {
    let mut m = ComplexMatrix::zeros(dim).into_dmatrix();
    for (a, &i) in indices.iter().enumerate() {
        for (b, &j) in indices.iter().enumerate() {
            m[(i, j)] = local.matrix().get(a, b);
        }
    }
    DensityOperator::from_trusted(ComplexMatrix::from_raw(m))
}
