//! Quantum channels in Kraus, superoperator and Stinespring form.
//!
//! Vectorization stacks rows: `vec(ρ)[i·d + j] = ρ[i, j]`. Under this
//! convention (and the first-factor-outer Kronecker product) the channel
//! `ρ ↦ Σ K ρ K†` has superoperator matrix `Σ K ⊗ conj(K)`, and
//! `vec(A X B) = (A ⊗ Bᵀ) vec(X)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QfixError, Result};
use crate::linalg::{
    hermitian_eig, hermitian_eig_with, operator_norm, partial_trace, tensor, ComplexMatrix, Keep,
    C64, ONE, ZERO,
};
use crate::state::{Certification, DensityOperator};

/// Default tolerance for trace-preservation and Choi-positivity defects.
pub const DEFAULT_CPTP_TOL: f64 = 1e-8;
/// Environment eigenvalues below this are dropped when deriving Kraus operators.
pub const DEFAULT_KRAUS_DROP_TOL: f64 = 1e-12;
/// Unitarity tolerance for Stinespring dilations.
pub const UNITARY_TOL: f64 = 1e-10;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QfixError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `vec(ρ)` with row stacking.
pub fn vectorize(m: &ComplexMatrix) -> Vec<C64> {
    m.row_major_entries()
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[C64], dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim * dim, v.len())?;
    Ok(ComplexMatrix::from_raw(DMatrix::from_row_slice(dim, dim, v)))
}

/// Channel `ρ ↦ Σ K_i ρ K_i†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Validates completeness at [`DEFAULT_CPTP_TOL`].
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(kraus, DEFAULT_CPTP_TOL)
    }

    pub fn with_tolerance(kraus: Vec<ComplexMatrix>, cptp_tol: f64) -> Result<Self> {
        let c = Self::from_operators(kraus)?;
        let defect = c.completeness_defect();
        if defect > cptp_tol {
            return Err(QfixError::NotTracePreserving { defect });
        }
        Ok(c)
    }

    /// Shape checks only. Used for raw maps that are certified separately.
    pub fn from_operators(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = kraus
            .first()
            .ok_or_else(|| QfixError::Invalid("Kraus list is empty".into()))?
            .dim();
        for k in &kraus {
            check_dim(dim, k.dim())?;
        }
        Ok(Self { dim, kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kraus: vec![ComplexMatrix::identity(dim)],
        }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(QfixError::NotUnitary { defect });
        }
        Ok(Self {
            dim: u.dim(),
            kraus: vec![u],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// `‖Σ K†K − I‖_op`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::identity(self.dim).scale(-1.0);
        for k in &self.kraus {
            sum = &sum + &(&k.adjoint() * k);
        }
        operator_norm(&sum)
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.dim, rho.dim())?;
        let mut out = ComplexMatrix::zeros(self.dim);
        for k in &self.kraus {
            out = &out + &rho.conjugate_by(k);
        }
        Ok(out)
    }

    /// `M = Σ K ⊗ conj(K)`.
    pub fn to_superop(&self) -> SuperoperatorMatrix {
        let d2 = self.dim * self.dim;
        let mut m = ComplexMatrix::zeros(d2);
        for k in &self.kraus {
            m = &m + &tensor(k, &k.conj());
        }
        SuperoperatorMatrix {
            dim: self.dim,
            matrix: m,
        }
    }
}

/// Linear map on operators as a `d² × d²` matrix acting on row-stacked
/// vectorizations. Not necessarily completely positive: the transpose map is
/// representable and fails [`verify_cptp`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuperoperatorMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperoperatorMatrix {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        check_dim(dim * dim, matrix.dim())?;
        Ok(Self { dim, matrix })
    }

    /// The transpose map `ρ ↦ ρᵀ`: trace preserving and positive but not
    /// completely positive.
    pub fn transpose_map(dim: usize) -> Self {
        let d2 = dim * dim;
        let matrix = ComplexMatrix::from_fn(d2, |r, c| {
            let (i, j) = (r / dim, r % dim);
            if c == j * dim + i {
                ONE
            } else {
                ZERO
            }
        });
        Self { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.dim, rho.dim())?;
        let v = self.matrix.apply(&vectorize(rho));
        unvectorize(&v, self.dim)
    }

    /// `‖D − I‖_op` with `D[i, j] = Tr S(|i⟩⟨j|)`.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let m = &self.matrix;
        let defect = ComplexMatrix::from_fn(d, |i, j| {
            let tr: C64 = (0..d).map(|a| m.get(a * d + a, i * d + j)).sum();
            if i == j {
                tr - ONE
            } else {
                tr
            }
        });
        operator_norm(&defect)
    }

    /// Reshuffle `Choi[(a,i),(b,j)] = M[(a,b),(i,j)]`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let m = &self.matrix;
        let matrix = ComplexMatrix::from_fn(d * d, |r, c| {
            let (a, i) = (r / d, r % d);
            let (b, j) = (c / d, c % d);
            m.get(a * d + b, i * d + j)
        });
        ChoiMatrix { dim: d, matrix }
    }
}

/// `ρ ↦ Tr_env(U (ρ_env ⊗ ρ) U†)`, environment as the first tensor factor.
#[derive(Debug, Clone, PartialEq)]
pub struct StinespringChannel {
    env_dim: usize,
    sys_dim: usize,
    u: ComplexMatrix,
    rho_env: DensityOperator,
}

impl StinespringChannel {
    pub fn new(
        env_dim: usize,
        sys_dim: usize,
        u: ComplexMatrix,
        rho_env: DensityOperator,
    ) -> Result<Self> {
        check_dim(env_dim * sys_dim, u.dim())?;
        check_dim(env_dim, rho_env.dim())?;
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(QfixError::NotUnitary { defect });
        }
        Ok(Self {
            env_dim,
            sys_dim,
            u,
            rho_env,
        })
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn rho_env(&self) -> &DensityOperator {
        &self.rho_env
    }

    /// The joint state `U (ρ_env ⊗ ρ) U†` before the environment is traced out.
    pub fn evolve_joint(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.sys_dim, rho.dim())?;
        Ok(tensor(self.rho_env.matrix(), rho).conjugate_by(&self.u))
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let joint = self.evolve_joint(rho)?;
        partial_trace(&joint, (self.env_dim, self.sys_dim), Keep::Second)
    }

    /// Kraus operators `K_jk = √p_k (⟨e_j| ⊗ I) U (|f_k⟩ ⊗ I)` from the
    /// spectral decomposition `ρ_env = Σ p_k |f_k⟩⟨f_k|`, dropping `p_k < drop_tol`.
    pub fn to_kraus(&self, drop_tol: f64) -> Result<KrausChannel> {
        let (de, ds) = (self.env_dim, self.sys_dim);
        let eig = hermitian_eig(self.rho_env.matrix())?;
        let mut kraus = Vec::new();
        for (k, &p) in eig.values.iter().enumerate() {
            if p < drop_tol {
                continue;
            }
            let f = eig.vector(k);
            let w = p.sqrt();
            for j in 0..de {
                let op = ComplexMatrix::from_fn(ds, |a, b| {
                    let s: C64 = (0..de).map(|l| self.u.get(j * ds + a, l * ds + b) * f[l]).sum();
                    s * w
                });
                kraus.push(op);
            }
        }
        if kraus.is_empty() {
            return Err(QfixError::Invalid(
                "environment state has no eigenvalue above the drop tolerance".into(),
            ));
        }
        KrausChannel::from_operators(kraus)
    }
}

/// `Σ_ij S(|i⟩⟨j|) ⊗ |i⟩⟨j|`; trace equals `dim` for trace-preserving maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Kraus operators from the eigendecomposition `Choi = Σ λ_k v_k v_k†`
    /// with `K_k[a, i] = √λ_k v_k[a·d + i]`. Fails on eigenvalues below `-tol`.
    pub fn to_kraus(&self, tol: f64) -> Result<KrausChannel> {
        let d = self.dim;
        let eig = hermitian_eig_with(&self.matrix, tol.max(1e-12))?;
        if let Some(&min) = eig.values.first() {
            if min < -tol {
                return Err(QfixError::NotCptp {
                    trace_defect: f64::NAN,
                    choi_min: min,
                });
            }
        }
        let kraus: Vec<ComplexMatrix> = eig
            .values
            .iter()
            .enumerate()
            .filter(|(_, &lam)| lam > tol)
            .map(|(k, &lam)| {
                let v = eig.vector(k);
                let w = lam.sqrt();
                ComplexMatrix::from_fn(d, |a, i| v[a * d + i] * w)
            })
            .collect();
        if kraus.is_empty() {
            return KrausChannel::from_operators(vec![ComplexMatrix::zeros(d)]);
        }
        KrausChannel::from_operators(kraus)
    }
}

/// A linear map on operators in any of the supported representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    Superop(SuperoperatorMatrix),
    Stinespring(StinespringChannel),
}

impl From<KrausChannel> for Channel {
    fn from(c: KrausChannel) -> Self {
        Channel::Kraus(c)
    }
}

impl From<SuperoperatorMatrix> for Channel {
    fn from(c: SuperoperatorMatrix) -> Self {
        Channel::Superop(c)
    }
}

impl From<StinespringChannel> for Channel {
    fn from(c: StinespringChannel) -> Self {
        Channel::Stinespring(c)
    }
}

impl Channel {
    pub fn identity(dim: usize) -> Self {
        KrausChannel::identity(dim).into()
    }

    pub fn dim(&self) -> usize {
        match self {
            Channel::Kraus(c) => c.dim(),
            Channel::Superop(c) => c.dim(),
            Channel::Stinespring(c) => c.sys_dim(),
        }
    }

    pub fn repr_name(&self) -> &'static str {
        match self {
            Channel::Kraus(_) => "kraus",
            Channel::Superop(_) => "superop",
            Channel::Stinespring(_) => "stinespring",
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            Channel::Kraus(c) => c.apply(rho),
            Channel::Superop(c) => c.apply(rho),
            Channel::Stinespring(c) => c.apply(rho),
        }
    }

    /// Applies the channel and certifies the output as a density operator.
    pub fn apply_state(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        DensityOperator::with_tolerance(self.apply(rho.matrix())?, rho.cert_tol())
    }

    pub fn to_superop(&self) -> Result<SuperoperatorMatrix> {
        match self {
            Channel::Kraus(c) => Ok(c.to_superop()),
            Channel::Superop(c) => Ok(c.clone()),
            Channel::Stinespring(c) => Ok(c.to_kraus(DEFAULT_KRAUS_DROP_TOL)?.to_superop()),
        }
    }

    /// Kraus form; superoperators go through the Choi eigendecomposition and
    /// fail if the map is not completely positive within `DEFAULT_CPTP_TOL`.
    pub fn to_kraus(&self) -> Result<KrausChannel> {
        match self {
            Channel::Kraus(c) => Ok(c.clone()),
            Channel::Superop(c) => c.to_choi().to_kraus(DEFAULT_CPTP_TOL),
            Channel::Stinespring(c) => c.to_kraus(DEFAULT_KRAUS_DROP_TOL),
        }
    }

    pub fn choi(&self) -> Result<ChoiMatrix> {
        match self {
            Channel::Superop(c) => Ok(c.to_choi()),
            _ => {
                let d = self.dim();
                let mut m = ComplexMatrix::zeros(d * d);
                for i in 0..d {
                    for j in 0..d {
                        let e = ComplexMatrix::unit(d, i, j);
                        m = &m + &tensor(&self.apply(&e)?, &e);
                    }
                }
                Ok(ChoiMatrix { dim: d, matrix: m })
            }
        }
    }

    pub fn trace_defect(&self) -> Result<f64> {
        match self {
            Channel::Kraus(c) => Ok(c.completeness_defect()),
            Channel::Superop(c) => Ok(c.trace_defect()),
            Channel::Stinespring(_) => {
                let d = self.dim();
                let mut entries = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        let tr = self.apply(&ComplexMatrix::unit(d, i, j))?.trace();
                        entries.push(if i == j { tr - ONE } else { tr });
                    }
                }
                Ok(operator_norm(&ComplexMatrix::from_row_major(d, &entries)?))
            }
        }
    }

    /// Errors unless [`verify_cptp`] passes at `tol`.
    pub fn certify(&self, tol: f64) -> Result<CptpReport> {
        let report = verify_cptp(self, tol)?;
        if !report.pass {
            return Err(QfixError::NotCptp {
                trace_defect: report.trace_preserving_defect,
                choi_min: report.choi_min_eigenvalue,
            });
        }
        Ok(report)
    }
}

/// Applies any channel representation.
pub fn apply(channel: &Channel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    channel.apply(rho)
}

pub fn kraus_to_superop(c: &KrausChannel) -> SuperoperatorMatrix {
    c.to_superop()
}

pub fn choi(channel: &Channel) -> Result<ChoiMatrix> {
    channel.choi()
}

/// Outcome of a CPTP certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub trace_preserving_defect: f64,
    pub choi_min_eigenvalue: f64,
    pub choi_hermiticity_defect: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Trace preservation plus Choi positivity at `D = dim`, which is equivalent
/// to complete positivity.
pub fn verify_cptp(channel: &Channel, tol: f64) -> Result<CptpReport> {
    let trace_preserving_defect = channel.trace_defect()?;
    let choi = channel.choi()?;
    let choi_hermiticity_defect = choi.matrix.hermiticity_defect();
    let eig = hermitian_eig_with(&choi.matrix.symmetrized(), f64::INFINITY)?;
    let choi_min_eigenvalue = eig.values.first().copied().unwrap_or(0.0);
    let pass = trace_preserving_defect <= tol
        && choi_min_eigenvalue >= -tol
        && choi_hermiticity_defect <= tol;
    Ok(CptpReport {
        trace_preserving_defect,
        choi_min_eigenvalue,
        choi_hermiticity_defect,
        tol,
        pass,
    })
}

/// Deutsch's once-around-the-CTC map `ρ ↦ Tr_in(U (ρ_in ⊗ ρ) U†)` with the
/// chronology-respecting factor first.
pub fn deutsch_channel(
    u: &ComplexMatrix,
    rho_in: &DensityOperator,
    env_dim: usize,
    sys_dim: usize,
) -> Result<StinespringChannel> {
    let cert = Certification::measure(rho_in.matrix())?;
    if !cert.passes(rho_in.cert_tol()) {
        return Err(QfixError::NotDensity("rho_in failed certification".into()));
    }
    StinespringChannel::new(env_dim, sys_dim, u.clone(), rho_in.clone())
}

/// Finite stand-in for the unilateral shift: `V|i⟩ = |i+1⟩` for `i < d−1`,
/// `V|d−1⟩ = 0`, plus the sink `|d−1⟩⟨d−1|` so that `Σ K†K = I` exactly.
pub fn truncated_shift_channel(d: usize) -> Result<KrausChannel> {
    if d < 2 {
        return Err(QfixError::Invalid(format!(
            "truncated shift needs d >= 2, got {d}"
        )));
    }
    let v = ComplexMatrix::from_fn(d, |i, j| if j + 1 < d && i == j + 1 { ONE } else { ZERO });
    let sink = ComplexMatrix::unit(d, d - 1, d - 1);
    KrausChannel::with_tolerance(vec![v, sink], 0.0)
}

/// `outer ∘ inner` (apply `inner` first) as a superoperator product.
pub fn compose(outer: &Channel, inner: &Channel) -> Result<Channel> {
    check_dim(outer.dim(), inner.dim())?;
    let mo = outer.to_superop()?;
    let mi = inner.to_superop()?;
    let matrix = mo.matrix() * mi.matrix();
    Ok(SuperoperatorMatrix::new(outer.dim(), matrix)?.into())
}

/// Wire format: `{"dim": d, "repr": "kraus"|"superop"|"stinespring", ...}`.
/// Kraus adds `"kraus"`, superop adds `"matrix"`, Stinespring adds
/// `"env_dim"`, `"u"` and `"rho_env"`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelJson {
    dim: usize,
    repr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kraus: Option<Vec<ComplexMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho_env: Option<DensityOperator>,
}

fn missing(field: &str, repr: &str) -> QfixError {
    QfixError::Invalid(format!("channel repr `{repr}` requires field `{field}`"))
}

impl TryFrom<ChannelJson> for Channel {
    type Error = QfixError;

    fn try_from(j: ChannelJson) -> Result<Self> {
        let extra = |present: bool, field: &str| -> Result<()> {
            if present {
                return Err(QfixError::Invalid(format!(
                    "field `{field}` is not allowed for repr `{}`",
                    j.repr
                )));
            }
            Ok(())
        };
        match j.repr.as_str() {
            "kraus" => {
                extra(j.matrix.is_some(), "matrix")?;
                extra(j.env_dim.is_some() || j.u.is_some() || j.rho_env.is_some(), "env_dim/u/rho_env")?;
                let kraus = j.kraus.clone().ok_or_else(|| missing("kraus", "kraus"))?;
                let c = KrausChannel::from_operators(kraus)?;
                check_dim(j.dim, c.dim())?;
                Ok(c.into())
            }
            "superop" => {
                extra(j.kraus.is_some(), "kraus")?;
                extra(j.env_dim.is_some() || j.u.is_some() || j.rho_env.is_some(), "env_dim/u/rho_env")?;
                let m = j.matrix.clone().ok_or_else(|| missing("matrix", "superop"))?;
                Ok(SuperoperatorMatrix::new(j.dim, m)?.into())
            }
            "stinespring" => {
                extra(j.kraus.is_some(), "kraus")?;
                extra(j.matrix.is_some(), "matrix")?;
                let env_dim = j.env_dim.ok_or_else(|| missing("env_dim", "stinespring"))?;
                let u = j.u.clone().ok_or_else(|| missing("u", "stinespring"))?;
                let rho_env = j.rho_env.clone().ok_or_else(|| missing("rho_env", "stinespring"))?;
                Ok(StinespringChannel::new(env_dim, j.dim, u, rho_env)?.into())
            }
            other => Err(QfixError::Invalid(format!("unknown channel repr `{other}`"))),
        }
    }
}

impl From<&Channel> for ChannelJson {
    fn from(c: &Channel) -> Self {
        let mut j = ChannelJson {
            dim: c.dim(),
            repr: c.repr_name().to_string(),
            kraus: None,
            matrix: None,
            env_dim: None,
            u: None,
            rho_env: None,
        };
        match c {
            Channel::Kraus(k) => j.kraus = Some(k.kraus.clone()),
            Channel::Superop(s) => j.matrix = Some(s.matrix.clone()),
            Channel::Stinespring(s) => {
                j.env_dim = Some(s.env_dim);
                j.u = Some(s.u.clone());
                j.rho_env = Some(s.rho_env.clone());
            }
        }
        j
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = ChannelJson::deserialize(de)?;
        Channel::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_norm;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, &[ZERO, ONE, ONE, ZERO]).unwrap()
    }

    fn swap(d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d * d, |r, c| {
            let (i, j) = (c / d, c % d);
            if r == j * d + i {
                ONE
            } else {
                ZERO
            }
        })
    }

    /// Kraus sum evaluated entry by entry, independent of matrix products.
    fn kraus_sum_oracle(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
        let d = rho.dim();
        ComplexMatrix::from_fn(d, |i, j| {
            let mut acc = ZERO;
            for k in kraus {
                for a in 0..d {
                    for b in 0..d {
                        acc += k.get(i, a) * rho.get(a, b) * k.get(j, b).conj();
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn identity_and_pauli_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::random_state(&mut rng, 3, 3);
        let id = Channel::identity(3);
        assert_eq!(&id.apply(rho.matrix()).unwrap(), rho.matrix());

        let x: Channel = KrausChannel::unitary(pauli_x()).unwrap().into();
        let out = x.apply(&ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert_eq!(out, ComplexMatrix::unit(2, 1, 1));
    }

    #[test]
    fn depolarizing_output_is_a_state() {
        let p: f64 = 0.3;
        let i = ComplexMatrix::identity(2);
        let x = pauli_x();
        let y = ComplexMatrix::from_row_major(2, &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])
            .unwrap();
        let z = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        let kraus = vec![
            i.scale((1.0 - 3.0 * p / 4.0).sqrt()),
            x.scale((p / 4.0).sqrt()),
            y.scale((p / 4.0).sqrt()),
            z.scale((p / 4.0).sqrt()),
        ];
        let c = KrausChannel::new(kraus.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let rho = random::random_state(&mut rng, 2, 2);
            let out = c.apply(rho.matrix()).unwrap();
            assert!(out.max_abs_diff(&kraus_sum_oracle(&kraus, rho.matrix())) < 1e-14);
            assert!((out.trace() - ONE).norm() < 1e-12);
            assert!(DensityOperator::new(out).is_ok());
        }
    }

    #[test]
    fn superop_of_identity_and_unitary() {
        let m = KrausChannel::identity(3).to_superop();
        assert_eq!(m.matrix(), &ComplexMatrix::identity(9));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random::random_unitary(&mut rng, 3);
        let s = KrausChannel::unitary(u.clone()).unwrap().to_superop();
        assert!(s.matrix().max_abs_diff(&tensor(&u, &u.conj())) < 1e-15);
    }

    #[test]
    fn superop_and_kraus_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random::random_kraus_channel(&mut rng, 3, 2);
        let s = c.to_superop();
        for _ in 0..20 {
            let rho = random::random_state(&mut rng, 3, 3);
            let a = kraus_sum_oracle(c.operators(), rho.matrix());
            let b = s.apply(rho.matrix()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn choi_of_identity_is_maximally_entangled() {
        let c = Channel::identity(3).choi().unwrap();
        let eig = hermitian_eig(c.matrix()).unwrap();
        let top = eig.values[8];
        assert!((top - 3.0).abs() < 1e-12);
        assert!(eig.values[..8].iter().all(|v| v.abs() < 1e-12));
        assert!((c.matrix().trace() - C64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let t: Channel = SuperoperatorMatrix::transpose_map(2).into();
        let rho = ComplexMatrix::from_row_major(2, &[ONE, C64::new(0.0, 1.0), ZERO, ZERO]).unwrap();
        assert_eq!(t.apply(&rho).unwrap(), rho.transpose());
        let eig = hermitian_eig(t.choi().unwrap().matrix()).unwrap();
        let expected = [-1.0, 1.0, 1.0, 1.0];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        let report = verify_cptp(&t, DEFAULT_CPTP_TOL).unwrap();
        assert!(!report.pass);
        assert!((report.choi_min_eigenvalue + 1.0).abs() < 1e-12);
        assert!(report.trace_preserving_defect < 1e-15);
        assert!(t.to_kraus().is_err());
    }

    #[test]
    fn unitary_and_stinespring_pass_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Channel = KrausChannel::unitary(random::random_unitary(&mut rng, 3)).unwrap().into();
        let r = verify_cptp(&u, DEFAULT_CPTP_TOL).unwrap();
        assert!(r.pass && r.trace_preserving_defect < 1e-12);

        let s: Channel = random::random_stinespring(&mut rng, 2, 2).into();
        let choi = s.choi().unwrap();
        let eig = hermitian_eig(choi.matrix()).unwrap();
        assert!(eig.values[0] >= -1e-10);
        assert!(verify_cptp(&s, DEFAULT_CPTP_TOL).unwrap().pass);
    }

    #[test]
    fn deutsch_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho_in = random::random_state(&mut rng, 2, 2);
        let id = deutsch_channel(&ComplexMatrix::identity(4), &rho_in, 2, 2).unwrap();
        let sw = deutsch_channel(&swap(2), &rho_in, 2, 2).unwrap();
        for _ in 0..5 {
            let rho = random::random_state(&mut rng, 2, 2);
            assert!(id.apply(rho.matrix()).unwrap().max_abs_diff(rho.matrix()) < 1e-14);
            // SWAP(ρ_in ⊗ ρ)SWAP = ρ ⊗ ρ_in; tracing the first factor leaves ρ_in.
            let swapped = tensor(rho.matrix(), rho_in.matrix());
            let oracle = partial_trace(&swapped, (2, 2), Keep::Second).unwrap();
            let out = sw.apply(rho.matrix()).unwrap();
            assert!(out.max_abs_diff(&oracle) < 1e-14);
            assert!(out.max_abs_diff(rho_in.matrix()) < 1e-14);
        }
    }

    #[test]
    fn deutsch_kraus_matches_stinespring() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random::random_unitary(&mut rng, 4);
        let rho_in = random::random_state(&mut rng, 2, 2);
        let s = deutsch_channel(&u, &rho_in, 2, 2).unwrap();
        let k = s.to_kraus(DEFAULT_KRAUS_DROP_TOL).unwrap();
        assert!(k.completeness_defect() < 1e-10);
        for _ in 0..20 {
            let rho = random::random_state(&mut rng, 2, 2);
            let a = s.apply(rho.matrix()).unwrap();
            let b = k.apply(rho.matrix()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10);
            // Tr S(ρ) = Tr(ρ_in) Tr(ρ)
            assert!((a.trace() - rho_in.matrix().trace() * rho.matrix().trace()).norm() < 1e-10);
        }
    }

    #[test]
    fn deutsch_rejects_bad_inputs() {
        let rho_in = DensityOperator::maximally_mixed(2);
        let not_unitary = ComplexMatrix::identity(4).scale(2.0);
        assert!(matches!(
            deutsch_channel(&not_unitary, &rho_in, 2, 2),
            Err(QfixError::NotUnitary { .. })
        ));
        assert!(deutsch_channel(&ComplexMatrix::identity(6), &rho_in, 2, 2).is_err());
    }

    #[test]
    fn pure_environment_drops_null_weights() {
        let rho_in = DensityOperator::basis_state(3, 1);
        let s = deutsch_channel(&ComplexMatrix::identity(6), &rho_in, 3, 2).unwrap();
        let k = s.to_kraus(DEFAULT_KRAUS_DROP_TOL).unwrap();
        assert_eq!(k.operators().len(), 3);
    }

    #[test]
    fn truncated_shift() {
        let c = truncated_shift_channel(3).unwrap();
        assert_eq!(c.completeness_defect(), 0.0);
        assert_eq!(c.apply(&ComplexMatrix::unit(3, 0, 0)).unwrap(), ComplexMatrix::unit(3, 1, 1));
        let sink = ComplexMatrix::unit(3, 2, 2);
        assert_eq!(c.apply(&sink).unwrap(), sink);
        assert!(truncated_shift_channel(1).is_err());
    }

    #[test]
    fn compose_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Channel = random::random_kraus_channel(&mut rng, 3, 2).into();
        let id = Channel::identity(3);
        let c = compose(&id, &s).unwrap();
        assert!(c.to_superop().unwrap().matrix().max_abs_diff(s.to_superop().unwrap().matrix()) < 1e-14);

        let u = random::random_unitary(&mut rng, 3);
        let uc: Channel = KrausChannel::unitary(u.clone()).unwrap().into();
        let ud: Channel = KrausChannel::unitary(u.adjoint()).unwrap().into();
        let c = compose(&uc, &ud).unwrap();
        assert!(c.to_superop().unwrap().matrix().max_abs_diff(&ComplexMatrix::identity(9)) < 1e-12);

        let ss = compose(&s, &s).unwrap();
        for _ in 0..10 {
            let rho = random::random_state(&mut rng, 3, 2);
            let seq = s.apply(&s.apply(rho.matrix()).unwrap()).unwrap();
            assert!(ss.apply(rho.matrix()).unwrap().max_abs_diff(&seq) < 1e-11);
        }
        assert!(compose(&s, &Channel::identity(2)).is_err());
    }

    #[test]
    fn representation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = random::random_kraus_channel(&mut rng, 3, 3);
        let sup: Channel = k.to_superop().into();
        let back = sup.to_kraus().unwrap();
        for _ in 0..10 {
            let rho = random::random_state(&mut rng, 3, 3);
            let a = k.apply(rho.matrix()).unwrap();
            let b = back.apply(rho.matrix()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-8);
        }
    }

    #[test]
    fn contractive_on_state_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let c: Channel = random::random_kraus_channel(&mut rng, 4, 2).into();
            let a = random::random_state(&mut rng, 4, 4);
            let b = random::random_state(&mut rng, 4, 1);
            let before = trace_norm(&(a.matrix() - b.matrix()));
            let after = trace_norm(&(&c.apply(a.matrix()).unwrap() - &c.apply(b.matrix()).unwrap()));
            assert!(after <= before + 1e-9);
        }
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chans: Vec<Channel> = vec![
            random::random_kraus_channel(&mut rng, 2, 2).into(),
            SuperoperatorMatrix::transpose_map(2).into(),
            random::random_stinespring(&mut rng, 2, 2).into(),
        ];
        for c in chans {
            let s = serde_json::to_string(&c).unwrap();
            let back: Channel = serde_json::from_str(&s).unwrap();
            assert_eq!(back.repr_name(), c.repr_name());
            let rho = random::random_state(&mut rng, 2, 2);
            assert!(back.apply(rho.matrix()).unwrap().max_abs_diff(&c.apply(rho.matrix()).unwrap()) < 1e-12);
        }
        let bad = r#"{"repr": "kraus", "dim": 1, "kraus": [{"dim":1,"entries":[[1,0]]}], "extra": 0}"#;
        assert!(serde_json::from_str::<Channel>(bad).is_err());
        let mismatch = r#"{"repr": "kraus", "dim": 2, "kraus": [{"dim":1,"entries":[[1,0]]}]}"#;
        assert!(serde_json::from_str::<Channel>(mismatch).is_err());
    }
}
