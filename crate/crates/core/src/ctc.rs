//! Deutsch CTC scenarios: build the once-around channel from scenario data,
//! solve the consistency condition, assemble the history, and probe whether
//! the channel maps the constraint set `K` into itself.
//!
//! The full space is `ℋ_in ⊗ ℋ_F` with the chronology-respecting factor first.
//! Given `ρ_{T₁−}` on the full space, `ρ_in = Tr_F ρ_{T₁−}` and the channel on
//! `ℋ_F` is `S(ρ) = Tr_in(U (ρ_in ⊗ ρ) U†)`. A consistent history is a fixed
//! point `ρ₁ = S(ρ₁)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{deutsch_channel, verify_cptp, Channel, DEFAULT_CPTP_TOL, UNITARY_TOL};
use crate::error::{QfixError, Result};
use crate::fixpoint::{
    cesaro_iterate, fixed_point_multiplicity, spectral_fixed_point_with, Method,
    DEFAULT_EIG_CLUSTER_TOL,
};
use crate::fock::{k_membership, sample_k, ConstraintSet, FockSpace, FockSpec};
use crate::linalg::{hermitian_eig, partial_trace, tensor, trace_norm, ComplexMatrix, Keep, C64, ONE, ZERO};
use crate::random;
use crate::state::DensityOperator;

/// Resonance tolerance for the eigenvalue scan of the cylinder model.
pub const DEFAULT_PHASE_TOL: f64 = 1e-9;

/// What enters the chronology-respecting region after `T₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostT2Rule {
    /// `Tr_F(ρ_{T₂−}) ⊗ |0⟩⟨0|`.
    VacuumSplice,
    /// `Tr_F(ρ_{T₂−}) ⊗ Tr_in(ρ_{T₁−})`.
    RecycleSplice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtcScenario {
    h_in_dim: usize,
    fock: FockSpace,
    u: ComplexMatrix,
    rho_t1_minus: DensityOperator,
    post_t2_rule: PostT2Rule,
}

impl CtcScenario {
    pub fn new(
        h_in_dim: usize,
        fock: FockSpace,
        u: ComplexMatrix,
        rho_t1_minus: DensityOperator,
        post_t2_rule: PostT2Rule,
    ) -> Result<Self> {
        if h_in_dim == 0 {
            return Err(QfixError::Invalid("h_in_dim must be positive".into()));
        }
        let full = h_in_dim * fock.dim();
        for found in [u.dim(), rho_t1_minus.dim()] {
            if found != full {
                return Err(QfixError::DimensionMismatch {
                    expected: full,
                    found,
                });
            }
        }
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(QfixError::NotUnitary { defect });
        }
        Ok(Self {
            h_in_dim,
            fock,
            u,
            rho_t1_minus,
            post_t2_rule,
        })
    }

    pub fn h_in_dim(&self) -> usize {
        self.h_in_dim
    }

    pub fn fock(&self) -> &FockSpace {
        &self.fock
    }

    pub fn f_dim(&self) -> usize {
        self.fock.dim()
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn rho_t1_minus(&self) -> &DensityOperator {
        &self.rho_t1_minus
    }

    pub fn post_t2_rule(&self) -> PostT2Rule {
        self.post_t2_rule
    }

    pub fn with_rule(mut self, rule: PostT2Rule) -> Self {
        self.post_t2_rule = rule;
        self
    }

    fn dims(&self) -> (usize, usize) {
        (self.h_in_dim, self.f_dim())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    h_in_dim: usize,
    fock: FockSpec,
    u: ComplexMatrix,
    rho_t1_minus: ComplexMatrix,
    post_t2_rule: PostT2Rule,
}

impl Serialize for CtcScenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScenarioJson {
            h_in_dim: self.h_in_dim,
            fock: self.fock.spec(),
            u: self.u.clone(),
            rho_t1_minus: self.rho_t1_minus.matrix().clone(),
            post_t2_rule: self.post_t2_rule,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CtcScenario {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let j = ScenarioJson::deserialize(de)?;
        let fock = FockSpace::from_spec(&j.fock).map_err(D::Error::custom)?;
        let rho = DensityOperator::new(j.rho_t1_minus).map_err(D::Error::custom)?;
        CtcScenario::new(j.h_in_dim, fock, j.u, rho, j.post_t2_rule).map_err(D::Error::custom)
    }
}

/// `ρ_in = Tr_F(ρ_{T₁−})`.
pub fn derive_rho_in(scenario: &CtcScenario) -> Result<DensityOperator> {
    let m = partial_trace(scenario.rho_t1_minus.matrix(), scenario.dims(), Keep::First)?;
    DensityOperator::new(m)
}

/// The once-around channel on `ℋ_F`, certified CPTP at `1e-8`.
pub fn build_ctc_channel(scenario: &CtcScenario) -> Result<Channel> {
    let rho_in = derive_rho_in(scenario)?;
    let (d_in, d_f) = scenario.dims();
    let channel: Channel = deutsch_channel(&scenario.u, &rho_in, d_in, d_f)?.into();
    let report = verify_cptp(&channel, DEFAULT_CPTP_TOL)?;
    if !report.pass {
        return Err(QfixError::NotCptp {
            trace_defect: report.trace_preserving_defect,
            choi_min: report.choi_min_eigenvalue,
        });
    }
    Ok(channel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub method: Method,
    pub tol: f64,
    /// Cesàro iteration count; ignored by the spectral solver.
    pub n: usize,
    pub eig_cluster_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            method: Method::Spectral,
            tol: 1e-8,
            n: 999,
            eig_cluster_tol: DEFAULT_EIG_CLUSTER_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistentHistory {
    pub rho_in: DensityOperator,
    pub rho1: DensityOperator,
    pub rho_t2_minus: DensityOperator,
    pub rho_t2_plus: DensityOperator,
    /// `‖Tr_in(ρ_{T₂−}) − ρ₁‖₁`.
    pub consistency_residual: f64,
    /// Dimension of the fixed-point space; above 1 the history is not unique
    /// and `rho1` is the Cesàro limit started from the maximally mixed state.
    pub multiplicity: usize,
    pub method: Method,
    pub post_t2_rule: PostT2Rule,
}

/// Solves `S(ρ₁) = ρ₁` and assembles `ρ_{T₁+} = ρ_in ⊗ ρ₁`,
/// `ρ_{T₂−} = U ρ_{T₁+} U†` and `ρ_{T₂+}` per the scenario's splice rule.
pub fn solve_history(scenario: &CtcScenario, params: &SolverParams) -> Result<ConsistentHistory> {
    let (d_in, d_f) = scenario.dims();
    let channel = build_ctc_channel(scenario)?;
    let rho_in = derive_rho_in(scenario)?;
    let (fp, multiplicity) = match params.method {
        Method::Spectral => {
            let fp = spectral_fixed_point_with(&channel, params.tol, params.eig_cluster_tol)?;
            let mult = match fp.method {
                Method::Spectral => fp.iterations_or_multiplicity,
                Method::Cesaro => fixed_point_multiplicity(&channel, params.eig_cluster_tol)?,
            };
            (fp, mult)
        }
        Method::Cesaro => {
            let fp = cesaro_iterate(&channel, &DensityOperator::maximally_mixed(d_f), params.n)?;
            let mult = fixed_point_multiplicity(&channel, params.eig_cluster_tol)?;
            (fp, mult)
        }
    };
    let rho1 = fp.rho;
    let t1_plus = tensor(rho_in.matrix(), rho1.matrix());
    let t2_minus = DensityOperator::new(t1_plus.conjugate_by(&scenario.u))?;
    let rho2 = partial_trace(t2_minus.matrix(), (d_in, d_f), Keep::Second)?;
    let consistency_residual = trace_norm(&(&rho2 - rho1.matrix()));
    if consistency_residual > params.tol {
        return Err(QfixError::NoFixedPoint {
            closest: consistency_residual,
        });
    }
    let outgoing = partial_trace(t2_minus.matrix(), (d_in, d_f), Keep::First)?;
    let f_part = match scenario.post_t2_rule {
        PostT2Rule::VacuumSplice => scenario.fock.vacuum().into_matrix(),
        PostT2Rule::RecycleSplice => {
            partial_trace(scenario.rho_t1_minus.matrix(), (d_in, d_f), Keep::Second)?
        }
    };
    let rho_t2_plus = DensityOperator::new(tensor(&outgoing, &f_part))?;
    Ok(ConsistentHistory {
        rho_in,
        rho1,
        rho_t2_minus: t2_minus,
        rho_t2_plus,
        consistency_residual,
        multiplicity,
        method: fp.method,
        post_t2_rule: scenario.post_t2_rule,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderReport {
    /// Equal mixture of the Hamiltonian's eigenprojections.
    pub diagonal_fixed_state: DensityOperator,
    /// `‖e^{−iHt} ρ e^{iHt} − ρ‖₁` for the state above.
    pub residual: f64,
    /// Integers `k` with an eigenvalue within `phase_tol` of `2πk/t`; each one
    /// admits invariant pure states.
    pub resonant_k: Vec<i64>,
}

/// `e^{−iHt}` through the eigendecomposition of `H`.
pub fn cylinder_propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let v = eig.vectors.as_dmatrix();
    let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    let d = h.dim();
    Ok(ComplexMatrix::from_fn(d, |i, j| {
        (0..d).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum()
    }))
}

/// State `Σ w_k |v_k⟩⟨v_k|` built on an eigenbasis of `H`; `weights` must be a
/// probability vector.
pub fn diagonal_state_in_eigenbasis(h: &ComplexMatrix, weights: &[f64]) -> Result<DensityOperator> {
    let eig = hermitian_eig(h)?;
    if weights.len() != h.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: h.dim(),
            found: weights.len(),
        });
    }
    DensityOperator::new(eig.reconstruct_with_weights(weights))
}

pub fn cylinder_fixed_points(h: &ComplexMatrix, t: f64) -> Result<CylinderReport> {
    cylinder_fixed_points_with(h, t, DEFAULT_PHASE_TOL)
}

pub fn cylinder_fixed_points_with(h: &ComplexMatrix, t: f64, phase_tol: f64) -> Result<CylinderReport> {
    if !(t.is_finite() && t > 0.0) {
        return Err(QfixError::Invalid(format!("period must be positive, got {t}")));
    }
    let d = h.dim();
    let eig = hermitian_eig(h)?;
    let rho = diagonal_state_in_eigenbasis(h, &vec![1.0 / d as f64; d])?;
    let u = cylinder_propagator(h, t)?;
    let evolved = rho.matrix().conjugate_by(&u);
    let residual = trace_norm(&(&evolved - rho.matrix()));
    let quantum = 2.0 * std::f64::consts::PI / t;
    let mut resonant_k: Vec<i64> = eig
        .values
        .iter()
        .filter_map(|&l| {
            let k = (l / quantum).round();
            ((l - k * quantum).abs() <= phase_tol).then_some(k as i64)
        })
        .collect();
    resonant_k.sort_unstable();
    resonant_k.dedup();
    Ok(CylinderReport {
        diagonal_fixed_state: rho,
        residual,
        resonant_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSample {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub member_after: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `Tr(S(ρ)A_i) − b_i` over all samples and coordinates, floored at 0.
    pub worst_excess: f64,
    pub per_sample: Vec<ProbeSample>,
}

/// Empirical test of `S(K) ⊆ K` on [`sample_k`] draws. A violation falsifies
/// the hypothesis; zero violations proves nothing.
pub fn k_invariance_probe(
    s: &Channel,
    k: &ConstraintSet,
    f: &FockSpace,
    samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if s.dim() != k.dim() {
        return Err(QfixError::DimensionMismatch {
            expected: k.dim(),
            found: s.dim(),
        });
    }
    let states = sample_k(k, f, samples, seed)?;
    let mut per_sample = Vec::with_capacity(samples);
    let mut violations = 0;
    let mut worst_excess: f64 = 0.0;
    for rho in &states {
        let before = k.expectations(rho);
        let out = s.apply_state(rho)?;
        let m = k_membership(&out, k)?;
        if !m.member {
            violations += 1;
        }
        for (&x, &b) in m.expectations.iter().zip(k.bounds()) {
            worst_excess = worst_excess.max(x - b);
        }
        per_sample.push(ProbeSample {
            before,
            after: m.expectations,
            member_after: m.member,
        });
    }
    Ok(ProbeReport {
        samples,
        violations,
        worst_excess,
        per_sample,
    })
}

/// `|i⟩⊗|j⟩ ↦ |j⟩⊗|i⟩` on `ℂᵈ ⊗ ℂᵈ`.
pub fn swap_unitary(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { ZERO })
}

/// Haar unitary and random full-rank `ρ_{T₁−}`.
pub fn random_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    h_in_dim: usize,
    fock: FockSpace,
    rule: PostT2Rule,
) -> Result<CtcScenario> {
    let full = h_in_dim * fock.dim();
    let u = random::random_unitary(rng, full);
    let rho = random::random_state(rng, full, full);
    CtcScenario::new(h_in_dim, fock, u, rho, rule)
}

/// Unitary on `ℋ_in ⊗ ℋ_F`, both factors labelled by `(n, e)`, that is block
/// diagonal over sectors of equal total particle number and total energy.
/// Such a `U` conserves both totals exactly.
pub fn random_sector_unitary<R: Rng + ?Sized>(
    rng: &mut R,
    h_in: &FockSpace,
    f: &FockSpace,
) -> ComplexMatrix {
    let df = f.dim();
    let full = h_in.dim() * df;
    let mut sectors: BTreeMap<(usize, i64), Vec<usize>> = BTreeMap::new();
    for (a, sa) in h_in.basis().iter().enumerate() {
        for (b, sb) in f.basis().iter().enumerate() {
            // energies are sums of the same few mode energies; round away float noise
            let e_key = ((sa.e + sb.e) * 1e9).round() as i64;
            sectors.entry((sa.n + sb.n, e_key)).or_default().push(a * df + b);
        }
    }
    let mut m = ComplexMatrix::zeros(full).into_dmatrix();
    for idx in sectors.values() {
        let block = random::random_unitary(rng, idx.len());
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                m[(i, j)] = block.get(r, c);
            }
        }
    }
    ComplexMatrix::from_raw(m)
}

/// Deterministic seeded variant of [`random_scenario`], for callers without an RNG.
pub fn seeded_scenario(seed: u64, h_in_dim: usize, fock: FockSpace, rule: PostT2Rule) -> Result<CtcScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_scenario(&mut rng, h_in_dim, fock, rule)
}
