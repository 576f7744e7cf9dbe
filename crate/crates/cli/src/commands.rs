use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qfix::channels::{verify_cptp as certify, Channel, CptpReport, DEFAULT_CPTP_TOL, UNITARY_TOL};
use qfix::ctc::{build_ctc_channel, k_invariance_probe, solve_history, CtcScenario, ProbeReport, SolverParams};
use qfix::fixpoint::{cesaro_iterate, spectral_fixed_point_with, Method, DEFAULT_EIG_CLUSTER_TOL};
use qfix::fock::{
    combinatorial_bound, k_membership, markov_mass_check, rank_one_truncation_norm, sample_k,
    spectral_subspace_dim, truncation_defect, truncation_projection, ConstraintSet, ConstraintSpec, FockSpace,
    FockSpec, DEFAULT_K_TOL,
};
use qfix::linalg::{ComplexMatrix, C64};
use qfix::random;
use qfix::state::{DensityOperator, Projection, DEFAULT_CERT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::config::{load_json, positive, CliError, Settings};

const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_N: usize = 999;
const DEFAULT_EPSILONS: [f64; 3] = [0.5, 0.2, 0.1];
const DEFAULT_FOCK_SAMPLES: usize = 200;
const DEFAULT_PROBE_SAMPLES: usize = 50;
const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_DIM_MAX: usize = 64;
const MARKOV_SLACK: f64 = 1e-12;
const DEFECT_SLACK: f64 = 1e-10;
const LEMMA_TOL: f64 = 1e-10;

pub struct Outcome {
    pub report: Value,
    pub pass: bool,
    pub summary: String,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    tolerances: BTreeMap<&'a str, f64>,
    pass: bool,
    result: T,
}

fn outcome<T: Serialize>(
    command: &str,
    seed: Option<u64>,
    tolerances: &[(&str, f64)],
    pass: bool,
    result: T,
    summary: String,
) -> Result<Outcome, CliError> {
    let report = Report {
        command,
        version: qfix::VERSION,
        seed,
        tolerances: tolerances.iter().copied().collect(),
        pass,
        result,
    };
    let report = serde_json::to_value(&report)
        .map_err(|e| CliError::Failure(format!("cannot serialize report: {e}")))?;
    let verdict = if pass { "pass" } else { "FAIL" };
    Ok(Outcome {
        report,
        pass,
        summary: format!("{command}: {summary} [{verdict}]"),
    })
}

fn check_channel_dims(settings: &Settings, ch: &Channel) -> Result<(), CliError> {
    settings.check_operator_dim("channel", ch.dim())?;
    if let Channel::Stinespring(s) = ch {
        settings.check_operator_dim("Stinespring dilation", s.env_dim() * s.sys_dim())?;
    }
    Ok(())
}

fn check_scenario_dims(settings: &Settings, sc: &CtcScenario) -> Result<(), CliError> {
    settings.check_operator_dim("scenario", sc.h_in_dim() * sc.f_dim())?;
    settings.check_superop_dim("CTC factor", sc.f_dim())
}

fn tolerance(flag: Option<f64>, settings: &Settings) -> Result<f64, CliError> {
    positive("tol", flag.or(settings.file.tol).unwrap_or(DEFAULT_TOL))
}

pub fn solve(
    settings: &Settings,
    path: &Path,
    method: Option<Method>,
    n: Option<usize>,
    tol: Option<f64>,
) -> Result<Outcome, CliError> {
    let channel: Channel = load_json(path)?;
    check_channel_dims(settings, &channel)?;
    let method = method.or(settings.file.method).unwrap_or(Method::Spectral);
    let tol = tolerance(tol, settings)?;
    let result = match method {
        Method::Spectral => {
            settings.check_superop_dim("channel", channel.dim())?;
            spectral_fixed_point_with(&channel, tol, DEFAULT_EIG_CLUSTER_TOL)
        }
        Method::Cesaro => {
            let n = n.or(settings.file.n).unwrap_or(DEFAULT_N);
            cesaro_iterate(&channel, &DensityOperator::maximally_mixed(channel.dim()), n)
        }
    }
    .map_err(CliError::computing)?;
    let summary = format!(
        "{:?} residual {:e}, {} {}",
        result.method,
        result.residual,
        match result.method {
            Method::Spectral => "multiplicity",
            Method::Cesaro => "iterations",
        },
        result.iterations_or_multiplicity
    );
    let mut tolerances = vec![("tol", tol), ("cert_tol", DEFAULT_CERT_TOL)];
    if method == Method::Spectral {
        tolerances.push(("eig_cluster_tol", DEFAULT_EIG_CLUSTER_TOL));
    }
    outcome("solve", None, &tolerances, true, result, summary.to_lowercase())
}

pub fn verify_cptp(settings: &Settings, path: &Path, tol: Option<f64>) -> Result<Outcome, CliError> {
    let channel: Channel = load_json(path)?;
    check_channel_dims(settings, &channel)?;
    settings.check_superop_dim("channel", channel.dim())?;
    let tol = positive("tol", tol.or(settings.file.tol).unwrap_or(DEFAULT_CPTP_TOL))?;
    let report: CptpReport = certify(&channel, tol).map_err(CliError::computing)?;
    let summary = format!(
        "trace defect {:e}, Choi min eigenvalue {:e}",
        report.trace_preserving_defect, report.choi_min_eigenvalue
    );
    outcome("verify-cptp", None, &[("tol", tol)], report.pass, report, summary)
}

pub fn ctc_run(
    settings: &Settings,
    path: &Path,
    method: Option<Method>,
    n: Option<usize>,
    tol: Option<f64>,
) -> Result<Outcome, CliError> {
    let scenario: CtcScenario = load_json(path)?;
    check_scenario_dims(settings, &scenario)?;
    let params = SolverParams {
        method: method.or(settings.file.method).unwrap_or(Method::Spectral),
        tol: tolerance(tol, settings)?,
        n: n.or(settings.file.n).unwrap_or(DEFAULT_N),
        eig_cluster_tol: DEFAULT_EIG_CLUSTER_TOL,
    };
    let history = solve_history(&scenario, &params).map_err(CliError::computing)?;
    let summary = format!(
        "consistency residual {:e}, multiplicity {}",
        history.consistency_residual, history.multiplicity
    );
    let tolerances = [
        ("tol", params.tol),
        ("eig_cluster_tol", params.eig_cluster_tol),
        ("cptp_tol", DEFAULT_CPTP_TOL),
        ("unitary_tol", UNITARY_TOL),
    ];
    outcome("ctc-run", None, &tolerances, true, history, summary)
}

#[derive(Serialize)]
struct EpsilonReport {
    epsilon: f64,
    n_cutoffs: Vec<u64>,
    rank: usize,
    exceeds_basis: bool,
    mass_bound: f64,
    min_mass: f64,
    max_defect: f64,
    markov_failures: usize,
    defect_failures: usize,
}

#[derive(Serialize)]
struct SubspaceReport {
    a1: f64,
    a2: f64,
    dim: usize,
    combinatorial_bound: u128,
}

#[derive(Serialize)]
struct FockCheckReport {
    fock_dim: usize,
    bounds: Vec<f64>,
    samples: usize,
    membership_failures: usize,
    epsilons: Vec<EpsilonReport>,
    spectral_subspace: SubspaceReport,
}

pub fn fock_check(
    settings: &Settings,
    fock_path: &Path,
    constraints_path: &Path,
    epsilons: Option<Vec<f64>>,
    samples: Option<usize>,
) -> Result<Outcome, CliError> {
    let spec: FockSpec = load_json(fock_path)?;
    let f = FockSpace::from_spec(&spec).map_err(CliError::loading)?;
    settings.check_operator_dim("Fock space", f.dim())?;
    let cspec: ConstraintSpec = load_json(constraints_path)?;
    let k = ConstraintSet::from_spec(&f, &cspec).map_err(CliError::loading)?;
    let epsilons = epsilons
        .or_else(|| settings.file.epsilons.clone())
        .unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    for &e in &epsilons {
        positive("epsilon", e)?;
    }
    let count = samples.or(settings.file.samples).unwrap_or(DEFAULT_FOCK_SAMPLES);
    let states = sample_k(&k, &f, count, settings.seed).map_err(CliError::computing)?;

    let mut membership_failures = 0;
    for rho in &states {
        if !k_membership(rho, &k).map_err(CliError::computing)?.member {
            membership_failures += 1;
        }
    }
    let grid = f.pvm_grid();
    let mut per_eps = Vec::new();
    for &eps in &epsilons {
        let tp = truncation_projection(&k, &grid, eps).map_err(CliError::computing)?;
        let mut min_mass = f64::INFINITY;
        let mut max_defect: f64 = 0.0;
        let (mut markov_failures, mut defect_failures) = (0, 0);
        for rho in &states {
            let mc = markov_mass_check(rho, &tp).map_err(CliError::computing)?;
            let td = truncation_defect(rho, &tp).map_err(CliError::computing)?;
            min_mass = min_mass.min(mc.mass);
            max_defect = max_defect.max(td.defect);
            if mc.mass < mc.bound - MARKOV_SLACK {
                markov_failures += 1;
            }
            let outside = (1.0 - mc.mass).max(0.0);
            if td.defect > (2.0 * outside.sqrt()).min(eps) + DEFECT_SLACK {
                defect_failures += 1;
            }
        }
        per_eps.push(EpsilonReport {
            epsilon: eps,
            n_cutoffs: tp.n_cutoffs.clone(),
            rank: tp.projection.rank(),
            exceeds_basis: tp.exceeds_basis,
            mass_bound: 1.0 - eps * eps / 4.0,
            min_mass: if states.is_empty() { 1.0 } else { min_mass },
            max_defect,
            markov_failures,
            defect_failures,
        });
    }
    let (a1, a2) = (cspec.bounds[0], cspec.bounds[1]);
    let sub = SubspaceReport {
        a1,
        a2,
        dim: spectral_subspace_dim(&f, a1, a2),
        combinatorial_bound: combinatorial_bound(&f, a1, a2),
    };
    let failures: usize = membership_failures
        + per_eps.iter().map(|e| e.markov_failures + e.defect_failures).sum::<usize>()
        + usize::from(sub.dim as u128 > sub.combinatorial_bound);
    let summary = format!(
        "{} epsilons x {} samples on dim {}, {} failures",
        epsilons.len(),
        states.len(),
        f.dim(),
        failures
    );
    let report = FockCheckReport {
        fock_dim: f.dim(),
        bounds: cspec.bounds.clone(),
        samples: states.len(),
        membership_failures,
        epsilons: per_eps,
        spectral_subspace: sub,
    };
    let tolerances = [
        ("k_tol", DEFAULT_K_TOL),
        ("markov_slack", MARKOV_SLACK),
        ("defect_slack", DEFECT_SLACK),
    ];
    outcome("fock-check", Some(settings.seed), &tolerances, failures == 0, report, summary)
}

pub fn k_probe(
    settings: &Settings,
    path: &Path,
    constraints: Option<PathBuf>,
    samples: Option<usize>,
) -> Result<Outcome, CliError> {
    let scenario: CtcScenario = load_json(path)?;
    check_scenario_dims(settings, &scenario)?;
    let cpath = constraints
        .or_else(|| settings.file.constraints.clone())
        .ok_or_else(|| CliError::Input("k-probe needs --constraints <file>".into()))?;
    let cspec: ConstraintSpec = load_json(&cpath)?;
    let k = ConstraintSet::from_spec(scenario.fock(), &cspec).map_err(CliError::loading)?;
    let count = samples.or(settings.file.samples).unwrap_or(DEFAULT_PROBE_SAMPLES);
    let channel = build_ctc_channel(&scenario).map_err(CliError::computing)?;
    let report: ProbeReport =
        k_invariance_probe(&channel, &k, scenario.fock(), count, settings.seed).map_err(CliError::computing)?;
    let summary = format!(
        "{} violations in {} samples, worst excess {:e}",
        report.violations, report.samples, report.worst_excess
    );
    let tolerances = [("k_tol", DEFAULT_K_TOL), ("cptp_tol", DEFAULT_CPTP_TOL)];
    let pass = report.violations == 0;
    outcome("k-probe", Some(settings.seed), &tolerances, pass, report, summary)
}

#[derive(Serialize)]
struct LemmaReport {
    trials: usize,
    dim_max: usize,
    max_abs_error: f64,
    max_numeric_over_two_beta: f64,
    bound_violations: usize,
    error_violations: usize,
    /// Numeric norm for `ψ` inside the range of `P`.
    degenerate_in_range: f64,
    /// Numeric norm for `ψ` orthogonal to the range of `P`.
    degenerate_orthogonal: f64,
}

pub fn lemma_check(settings: &Settings, trials: Option<usize>, dim_max: Option<usize>) -> Result<Outcome, CliError> {
    let trials = trials.or(settings.file.trials).unwrap_or(DEFAULT_TRIALS);
    let dim_max = dim_max.or(settings.file.dim_max).unwrap_or(DEFAULT_DIM_MAX);
    if dim_max < 2 {
        return Err(CliError::Input("dim-max must be at least 2".into()));
    }
    settings.check_operator_dim("lemma trial", dim_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut max_abs_error: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let (mut bound_violations, mut error_violations) = (0, 0);
    for _ in 0..trials {
        let d = rng.random_range(2..=dim_max);
        let psi = random::random_unit_vector(&mut rng, d);
        let rank = rng.random_range(0..=d);
        let p = if rng.random_bool(0.5) {
            Projection::diagonal(d, 0..rank)
        } else {
            let w = random::random_unitary(&mut rng, d);
            let diag: Vec<f64> = (0..d).map(|i| if i < rank { 1.0 } else { 0.0 }).collect();
            Projection::from_matrix(ComplexMatrix::from_real_diagonal(&diag).conjugate_by(&w), 1e-10)
        }
        .map_err(CliError::computing)?;
        let r = rank_one_truncation_norm(&psi, &p).map_err(CliError::computing)?;
        let err = (r.numeric - r.closed_form).abs();
        max_abs_error = max_abs_error.max(err);
        if err > LEMMA_TOL {
            error_violations += 1;
        }
        if r.numeric > r.two_beta_bound + 1e-12 {
            bound_violations += 1;
        }
        if r.beta > 0.0 {
            max_ratio = max_ratio.max(r.numeric / r.two_beta_bound);
        }
    }
    let e0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let inside = rank_one_truncation_norm(&e0, &Projection::diagonal(2, [0]).map_err(CliError::computing)?)
        .map_err(CliError::computing)?;
    let outside = rank_one_truncation_norm(&e0, &Projection::diagonal(2, [1]).map_err(CliError::computing)?)
        .map_err(CliError::computing)?;
    let pass = bound_violations == 0 && error_violations == 0 && inside.numeric == 0.0 && outside.numeric == 1.0;
    let summary = format!("{trials} trials, max |numeric - closed form| {max_abs_error:e}");
    let report = LemmaReport {
        trials,
        dim_max,
        max_abs_error,
        max_numeric_over_two_beta: max_ratio,
        bound_violations,
        error_violations,
        degenerate_in_range: inside.numeric,
        degenerate_orthogonal: outside.numeric,
    };
    outcome("lemma-check", Some(settings.seed), &[("error_tol", LEMMA_TOL)], pass, report, summary)
}
