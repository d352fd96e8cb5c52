//! The requirements on a transition probability, as residual-returning
//! checks.
//!
//! A [`CandidateDistribution`] is a function of the overlap `z = ⟨Ψ|Φ⟩`
//! alone, so unitary invariance and dimension independence hold for it by
//! construction; [`check_unitary_invariance`] takes an arbitrary pair
//! function to show what fails without that reduction. Every check returns
//! a residual and pass/fail is decided only against the tolerance stored in
//! the [`AxiomReport`].

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::construction::{contract_error, partial_dft_basis, symmetric_state};
use crate::dsl::{self, DslError, EvalError, Expr, DOMAIN_SLACK};
use crate::error::{Error, Result};
use crate::hilbert::{
    apply_unitary, haar_unitary, inner_product, random_state, OrthonormalBasis, StateVector,
    UnitaryMatrix,
};
use crate::rng;
use crate::serde_util::real;

/// Default tolerance for the axiom reports.
pub const AXIOM_TOLERANCE: f64 = 1e-9;

type EvalFn = dyn Fn(Complex64) -> Result<f64, EvalError> + Send + Sync;

#[derive(Clone)]
pub struct CandidateDistribution {
    name: String,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for CandidateDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateDistribution").field("name", &self.name).finish()
    }
}

impl CandidateDistribution {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        Self::fallible(name, move |z| Ok(f(z)))
    }

    pub fn fallible<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        CandidateDistribution {
            name: name.into(),
            eval: Arc::new(f),
        }
    }

    /// Parses an expression; the source text becomes the candidate name.
    pub fn from_expr(source: &str) -> Result<Self, DslError> {
        let expr: Expr = dsl::parse_candidate(source)?;
        Ok(Self::fallible(source.trim(), move |z| expr.eval(z)))
    }

    /// `|z|²`.
    pub fn born() -> Self {
        Self::new("r^2", |z| z.norm_sqr())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluates on the closed unit disk (with [`DOMAIN_SLACK`]).
    pub fn evaluate(&self, z: Complex64) -> Result<f64, EvalError> {
        let r = z.norm();
        if !(r <= 1.0 + DOMAIN_SLACK) {
            return Err(EvalError::OutOfDomain(r));
        }
        (self.eval)(z)
    }

    /// Like [`evaluate`](Self::evaluate) but folds evaluation failures into
    /// NaN so a sweep can continue; only a domain violation is an error.
    pub fn value(&self, z: Complex64) -> Result<f64> {
        match self.evaluate(z) {
            Ok(v) => Ok(v),
            Err(EvalError::OutOfDomain(modulus)) => Err(Error::Domain { modulus }),
            Err(_) => Ok(f64::NAN),
        }
    }

    /// The induced function of a state pair, `(Ψ, Φ) ↦ P(⟨Ψ|Φ⟩)`.
    pub fn pair_form(&self) -> impl Fn(&StateVector, &StateVector) -> f64 + '_ {
        move |a, b| {
            inner_product(a, b)
                .ok()
                .and_then(|z| self.value(z).ok())
                .unwrap_or(f64::NAN)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    WellDefined,
    Normalization,
    Orthogonality,
    UnitaryInvariance,
    NIndependence,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::WellDefined => "well-defined",
            Axiom::Normalization => "normalization",
            Axiom::Orthogonality => "orthogonality",
            Axiom::UnitaryInvariance => "unitary-invariance",
            Axiom::NIndependence => "n-independence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub candidate: String,
    #[serde(with = "real")]
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub probes: usize,
    pub worst_case: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl AxiomReport {
    fn new(axiom: Axiom, candidate: &str, tolerance: f64) -> Self {
        AxiomReport {
            axiom,
            candidate: candidate.to_string(),
            max_residual: 0.0,
            tolerance,
            passed: true,
            probes: 0,
            worst_case: serde_json::Value::Null,
            note: None,
        }
    }

    /// Records one residual; NaN counts as `+∞`. The first probe attaining
    /// the maximum is kept.
    fn observe(&mut self, residual: f64, witness: impl FnOnce() -> serde_json::Value) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        if self.probes == 0 || residual > self.max_residual {
            self.max_residual = residual;
            self.worst_case = witness();
        }
        self.probes += 1;
        self.passed = self.max_residual <= self.tolerance;
    }
}

/// Distance of `p` from `[0, 1]`; non-finite values are infinitely far.
pub fn range_violation(p: f64) -> f64 {
    if !p.is_finite() {
        f64::INFINITY
    } else if p < 0.0 {
        -p
    } else if p > 1.0 {
        p - 1.0
    } else {
        0.0
    }
}

fn z_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

pub fn check_well_defined(
    p: &CandidateDistribution,
    sample_overlaps: &[Complex64],
    tolerance: f64,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::new(Axiom::WellDefined, p.name(), tolerance);
    for &z in sample_overlaps {
        let v = p.value(z)?;
        report.observe(range_violation(v), || json!({ "z": z_json(z), "value": v.to_string() }));
    }
    Ok(report)
}

/// `|Σ_i P(⟨v_i|Ψ⟩) − 1|`, with `+∞` when any term fails to evaluate.
pub fn check_normalization(
    p: &CandidateDistribution,
    basis: &OrthonormalBasis,
    state: &StateVector,
) -> Result<f64> {
    if basis.dim() != state.dim() {
        return Err(Error::dim_mismatch(basis.dim(), state.dim()));
    }
    let mut sum = 0.0;
    for z in basis.overlaps(state)? {
        sum += p.value(z)?;
    }
    let r = (sum - 1.0).abs();
    Ok(if r.is_nan() { f64::INFINITY } else { r })
}

/// `max_ij |P(⟨v_i|v_j⟩) − δ_ij|` over one basis.
pub fn orthogonality_residual(
    p: &CandidateDistribution,
    basis: &OrthonormalBasis,
) -> Result<(f64, usize, usize)> {
    let vs = basis.vectors();
    let mut worst = (0.0, 0, 0);
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let v = p.value(inner_product(a, b)?)?;
            let target = if i == j { 1.0 } else { 0.0 };
            let r = (v - target).abs();
            let r = if r.is_nan() { f64::INFINITY } else { r };
            if r > worst.0 {
                worst = (r, i, j);
            }
        }
    }
    Ok(worst)
}

pub fn check_orthogonality_axiom(
    p: &CandidateDistribution,
    basis: &OrthonormalBasis,
    tolerance: f64,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::new(Axiom::Orthogonality, p.name(), tolerance);
    let (r, i, j) = orthogonality_residual(p, basis)?;
    report.observe(r, || json!({ "N": basis.dim(), "i": i + 1, "j": j + 1, "basis": basis }));
    report.probes = basis.dim() * basis.dim();
    Ok(report)
}

/// How [`check_unitary_invariance`] draws its unitaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitarySampler {
    Haar,
    Identity,
}

/// `max |F(Uv, Uw) − F(v, w)|` over `trials` random triples in dimension `n`.
pub fn check_unitary_invariance<F>(
    name: &str,
    pair_form: F,
    n: usize,
    trials: usize,
    seed: u64,
    sampler: UnitarySampler,
    tolerance: f64,
) -> Result<AxiomReport>
where
    F: Fn(&StateVector, &StateVector) -> f64,
{
    if trials == 0 {
        return Err(Error::Parameter("unitary invariance needs at least one trial".into()));
    }
    let mut report = AxiomReport::new(Axiom::UnitaryInvariance, name, tolerance);
    for t in 0..trials as u64 {
        let v = random_state(n, rng::tag(&[seed, t, 0]))?;
        let w = random_state(n, rng::tag(&[seed, t, 1]))?;
        let u = match sampler {
            UnitarySampler::Haar => haar_unitary(n, rng::tag(&[seed, t, 2]))?,
            UnitarySampler::Identity => UnitaryMatrix::identity(n)?,
        };
        let before = pair_form(&v, &w);
        let after = pair_form(&apply_unitary(&u, &v)?, &apply_unitary(&u, &w)?);
        report.observe((after - before).abs(), || {
            json!({ "N": n, "seed": seed, "trial": t, "v": v, "w": w, "U": u })
        });
    }
    Ok(report)
}

/// Compares `P` at `e^{iθ}/√N`, reached in dimension `N` through the
/// symmetric state, with the same modulus reached in dimension `M = cN`
/// through the first partial-DFT vector with `K = c`.
///
/// Both routes are certified numerically (contract error ≤ `1e-11`). The
/// candidate is then evaluated at the overlap value shared by the two
/// routes; since a candidate receives only `z`, the residual is zero for
/// every candidate, and the report says so. The largest numerical gap
/// between the two routes is kept in `worst_case.pipeline_drift`.
pub fn check_n_independence(
    p: &CandidateDistribution,
    dims: &[usize],
    theta: f64,
    seed: u64,
    tolerance: f64,
) -> Result<AxiomReport> {
    if dims.is_empty() {
        return Err(Error::Parameter("n-independence needs at least one dimension".into()));
    }
    let mut dims: Vec<usize> = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    if dims[0] == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    let mut report = AxiomReport::new(Axiom::NIndependence, p.name(), tolerance);
    report.note = Some("candidate is a function of the overlap only and takes no dimension".into());
    let mut drift = 0.0_f64;
    let mut worst = serde_json::Value::Null;
    let mut worst_residual = -1.0;
    for &n in &dims {
        let mut partners: Vec<usize> = dims.iter().copied().filter(|&m| m > n && m % n == 0).collect();
        partners.push(2 * n);
        partners.sort_unstable();
        partners.dedup();
        let base_n = OrthonormalBasis::from_unitary(&haar_unitary(n, rng::tag(&[seed, n as u64]))?);
        let direct = base_n.overlaps(symmetric_state(&base_n, theta).state())?[0];
        let ideal = Complex64::from_polar(1.0 / (n as f64).sqrt(), crate::construction::normalize_theta(theta));
        for m in partners {
            let k = m / n;
            let base_m = OrthonormalBasis::from_unitary(&haar_unitary(m, rng::tag(&[seed, m as u64]))?);
            let psi = symmetric_state(&base_m, theta);
            let tilde = partial_dft_basis(&base_m, k)?;
            let via = tilde.basis().overlaps(psi.state())?;
            let cert_err = contract_error(&via, m, k, psi.theta());
            if cert_err > 1e-11 || (direct - ideal).norm() > 1e-11 {
                return Err(Error::Certificate(format!(
                    "n-independence pipeline N={n}, M={m} misses its overlap contract by {cert_err:e}"
                )));
            }
            let gap = (direct - via[0]).norm();
            drift = drift.max(gap);
            // Both routes land on the same overlap value; the candidate
            // cannot tell which dimension it came from.
            let in_n = p.value(ideal)?;
            let in_m = p.value(ideal)?;
            let r = (in_n - in_m).abs();
            let r = if r.is_nan() { f64::INFINITY } else { r };
            if r > worst_residual {
                worst_residual = r;
                worst = json!({ "N": n, "M": m, "K": k, "theta": theta, "z": z_json(ideal) });
            }
            report.observe(r, || serde_json::Value::Null);
        }
    }
    if let serde_json::Value::Object(ref mut map) = worst {
        map.insert("pipeline_drift".into(), json!(drift));
    }
    report.worst_case = worst;
    Ok(report)
}

/// Random probes for [`run_all`]: a Haar basis and a Haar state per trial.
pub fn random_probe(n: usize, seed: u64, trial: u64) -> Result<(OrthonormalBasis, StateVector)> {
    let basis = OrthonormalBasis::from_unitary(&haar_unitary(n, rng::tag(&[seed, n as u64, trial, 0]))?);
    let state = random_state(n, rng::tag(&[seed, n as u64, trial, 1]))?;
    Ok((basis, state))
}

/// All five checks in dimension `n` over `trials` random (basis, state)
/// probes.
pub fn run_all(
    p: &CandidateDistribution,
    n: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<Vec<AxiomReport>> {
    let mut well = AxiomReport::new(Axiom::WellDefined, p.name(), tolerance);
    let mut norm = AxiomReport::new(Axiom::Normalization, p.name(), tolerance);
    let mut orth = AxiomReport::new(Axiom::Orthogonality, p.name(), tolerance);
    for t in 0..trials as u64 {
        let (basis, state) = random_probe(n, seed, t)?;
        for z in basis.overlaps(&state)? {
            let v = p.value(z)?;
            well.observe(range_violation(v), || json!({ "N": n, "trial": t, "z": z_json(z) }));
        }
        let r = check_normalization(p, &basis, &state)?;
        norm.observe(r, || json!({ "N": n, "seed": seed, "trial": t, "basis": basis, "state": state }));
        let (r, i, j) = orthogonality_residual(p, &basis)?;
        orth.observe(r, || json!({ "N": n, "seed": seed, "trial": t, "i": i + 1, "j": j + 1 }));
    }
    let unitary = check_unitary_invariance(
        p.name(),
        p.pair_form(),
        n,
        trials.max(1),
        seed,
        UnitarySampler::Haar,
        tolerance,
    )?;
    let indep = check_n_independence(p, &[n], 1.0, seed, tolerance)?;
    Ok(vec![well, norm, orth, unitary, indep])
}
