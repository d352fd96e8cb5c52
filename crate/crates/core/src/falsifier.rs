//! Search for concrete axiom violations.
//!
//! Three phases run in a fixed order and the first violation above the
//! threshold wins:
//!
//! 1. ledger probes: for each dimension, the orthogonality check on the
//!    certificate basis, then the normalization and range checks on every
//!    `(K, N)` certificate configuration at each of its θ samples;
//! 2. random probes: Haar basis and Haar state per trial;
//! 3. hill climbing: `U ← U·exp(εA)` with random skew-Hermitian `A`, keeping
//!    steps that increase `|Σ P − 1|`.
//!
//! Dimensions are independent in phases 2 and 3 and may run in parallel;
//! the witness with the lowest `N` (then the lowest trial) is returned, so
//! serial and parallel runs agree.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::axioms::{
    check_normalization, orthogonality_residual, random_probe, range_violation, Axiom,
    CandidateDistribution,
};
use crate::derivation::{configuration, CertificateKind, ConstraintLedger};
use crate::error::{Error, Result};
use crate::hilbert::{haar_unitary, random_state, ComplexMatrix, OrthonormalBasis, StateVector, UnitaryMatrix};
use crate::rng;
use crate::serde_util::real;

pub const VIOLATION_THRESHOLD: f64 = 1e-6;
/// Consecutive rejections before the optimizer halves its step.
pub const REJECTIONS_PER_DECAY: usize = 20;
pub const MIN_STEP: f64 = 1e-6;

const RANDOM_STREAM: u64 = 0x5241_4e44;
const OPT_STREAM: u64 = 0x4f50_5449;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstructionTag {
    LedgerCertificate,
    RandomBasis,
    OptimizedBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub candidate: String,
    pub axiom: Axiom,
    #[serde(rename = "N")]
    pub dimension: usize,
    pub state: StateVector,
    pub basis: OrthonormalBasis,
    #[serde(with = "real")]
    pub residual: f64,
    pub seed_chain: Vec<u64>,
    pub construction_tag: ConstructionTag,
    /// Where the probe came from, e.g. `{"K": 1, "theta": 1.0}`.
    pub detail: serde_json::Value,
}

/// The residual the witness's axiom check gives on `(basis, state)`.
pub fn residual_of(p: &CandidateDistribution, axiom: Axiom, basis: &OrthonormalBasis, state: &StateVector) -> Result<f64> {
    match axiom {
        Axiom::Normalization => check_normalization(p, basis, state),
        Axiom::Orthogonality => Ok(orthogonality_residual(p, basis)?.0),
        Axiom::WellDefined => {
            let mut worst = 0.0_f64;
            for z in basis.overlaps(state)? {
                worst = worst.max(range_violation(p.value(z)?));
            }
            Ok(worst)
        }
        other => Err(Error::Parameter(format!("witnesses are not replayable for {other}"))),
    }
}

impl Witness {
    pub fn replay(&self, p: &CandidateDistribution) -> Result<f64> {
        residual_of(p, self.axiom, &self.basis, &self.state)
    }

    /// Replays with the candidate rebuilt from the stored expression.
    pub fn replay_expression(&self) -> Result<f64> {
        let p = CandidateDistribution::from_expr(&self.candidate)
            .map_err(|e| Error::Parameter(format!("stored candidate does not parse: {e}")))?;
        self.replay(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifierConfig {
    pub n_range: Vec<usize>,
    pub random_trials: usize,
    pub optimizer_steps: usize,
    pub step_scale: f64,
    pub violation_threshold: f64,
    pub seed: u64,
}

impl Default for FalsifierConfig {
    fn default() -> Self {
        FalsifierConfig {
            n_range: (2..=8).collect(),
            random_trials: 32,
            optimizer_steps: 200,
            step_scale: 0.1,
            violation_threshold: VIOLATION_THRESHOLD,
            seed: 0,
        }
    }
}

impl FalsifierConfig {
    fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.n_range.iter().copied().filter(|&n| n > 0).collect();
        d.sort_unstable();
        d.dedup();
        d
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCounts {
    pub ledger: usize,
    pub random: usize,
    pub optimizer: usize,
}

impl ProbeCounts {
    pub fn total(&self) -> usize {
        self.ledger + self.random + self.optimizer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyOutcome {
    pub candidate: String,
    pub witness: Option<Witness>,
    pub probes: ProbeCounts,
    /// 1, 2 or 3 for the phase that produced the witness.
    pub phase: Option<u8>,
}

fn tagged(residual: f64) -> f64 {
    if residual.is_nan() {
        f64::INFINITY
    } else {
        residual
    }
}

/// Phase 1 in one dimension: returns the first certificate probe above the
/// threshold and the number of probes evaluated.
pub fn ledger_probes_at(
    p: &CandidateDistribution,
    n: usize,
    ledger: &ConstraintLedger,
    threshold: f64,
) -> Result<(Option<Witness>, usize)> {
    let settings = ledger.settings();
    let opts = settings.options();
    let n64 = n as u64;
    let mut probes = 0;
    let make = |axiom, residual, basis: &OrthonormalBasis, state: &StateVector, k: u64, idx: usize, theta: f64| Witness {
        candidate: p.name().to_string(),
        axiom,
        dimension: n,
        state: state.clone(),
        basis: basis.clone(),
        residual,
        seed_chain: vec![settings.seed, k, n64, idx as u64],
        construction_tag: ConstructionTag::LedgerCertificate,
        detail: serde_json::json!({ "K": k, "N": n, "theta": theta }),
    };

    let uniform_base = opts.base_spec(CertificateKind::Uniform, 1, n64).build(n)?;
    probes += 1;
    let (r, _, _) = orthogonality_residual(p, &uniform_base)?;
    if tagged(r) > threshold {
        let state = uniform_base.vectors()[0].clone();
        return Ok((Some(make(Axiom::Orthogonality, tagged(r), &uniform_base, &state, 0, 0, 0.0)), probes));
    }
    for k in 1..=n64 {
        let kind = CertificateKind::for_fraction(k, n64);
        let base = if k == 1 {
            uniform_base.clone()
        } else {
            opts.base_spec(kind, k, n64).build(n)?
        };
        for (idx, theta) in settings.thetas_for(k, n64).into_iter().enumerate() {
            let (basis, state) = configuration(kind, k as usize, &base, theta)?;
            probes += 1;
            for axiom in [Axiom::Normalization, Axiom::WellDefined] {
                let r = tagged(residual_of(p, axiom, &basis, &state)?);
                if r > threshold {
                    return Ok((Some(make(axiom, r, &basis, &state, k, idx, theta)), probes));
                }
            }
        }
    }
    Ok((None, probes))
}

fn random_phase_at(p: &CandidateDistribution, n: usize, cfg: &FalsifierConfig) -> Result<(Option<Witness>, usize)> {
    let seed = rng::tag(&[RANDOM_STREAM, cfg.seed]);
    for t in 0..cfg.random_trials as u64 {
        let (basis, state) = random_probe(n, seed, t)?;
        for axiom in [Axiom::Normalization, Axiom::WellDefined] {
            let r = tagged(residual_of(p, axiom, &basis, &state)?);
            if r > cfg.violation_threshold {
                let w = Witness {
                    candidate: p.name().to_string(),
                    axiom,
                    dimension: n,
                    state,
                    basis,
                    residual: r,
                    seed_chain: vec![cfg.seed, n as u64, t],
                    construction_tag: ConstructionTag::RandomBasis,
                    detail: serde_json::json!({ "trial": t }),
                };
                return Ok((Some(w), t as usize + 1));
            }
        }
    }
    Ok((None, cfg.random_trials))
}

/// Result of one hill-climbing run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerRun {
    /// Best residual after each step; non-decreasing.
    pub best_trajectory: Vec<f64>,
    pub witness: Option<Witness>,
    pub steps: usize,
}

fn skew_hermitian(n: usize, rng: &mut rng::ChaCha20Rng) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(n);
    let scale = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        for j in 0..=i {
            let g = rng::complex_gaussian(rng) * scale;
            if i == j {
                a.set(i, i, Complex64::new(0.0, g.im));
            } else {
                a.set(i, j, g);
                a.set(j, i, -g.conj());
            }
        }
    }
    a
}

/// Hill climbing on `|Σ_i P(⟨U e_i|Ψ⟩) − 1|` over `U`, from a Haar start
/// and a fixed Haar state in dimension `n`.
pub fn optimize(p: &CandidateDistribution, n: usize, cfg: &FalsifierConfig) -> Result<OptimizerRun> {
    let base_seed = rng::tag(&[OPT_STREAM, cfg.seed, n as u64]);
    let state = random_state(n, rng::tag(&[base_seed, 0]))?;
    let mut u = haar_unitary(n, rng::tag(&[base_seed, 1]))?;
    let mut stream = rng::stream(base_seed, 2);
    let objective = |u: &UnitaryMatrix| -> Result<(f64, OrthonormalBasis)> {
        let basis = OrthonormalBasis::from_unitary(u);
        Ok((tagged(check_normalization(p, &basis, &state)?), basis))
    };
    let (mut best, mut basis) = objective(&u)?;
    let mut trajectory = vec![best];
    let mut step = cfg.step_scale;
    let mut rejections = 0;
    let mut steps = 0;
    let witness = |best: f64, basis: &OrthonormalBasis, steps: usize| Witness {
        candidate: p.name().to_string(),
        axiom: Axiom::Normalization,
        dimension: n,
        state: state.clone(),
        basis: basis.clone(),
        residual: best,
        seed_chain: vec![cfg.seed, n as u64, steps as u64],
        construction_tag: ConstructionTag::OptimizedBasis,
        detail: serde_json::json!({ "steps": steps }),
    };
    if best > cfg.violation_threshold {
        let w = witness(best, &basis, 0);
        return Ok(OptimizerRun {
            best_trajectory: trajectory,
            witness: Some(w),
            steps,
        });
    }
    while steps < cfg.optimizer_steps && step >= MIN_STEP {
        steps += 1;
        let mut a = skew_hermitian(n, &mut stream);
        a.scale(step);
        let candidate = UnitaryMatrix::reunitarize(u.matrix().mul(&a.exp()))?;
        let (r, b) = objective(&candidate)?;
        if r > best {
            best = r;
            basis = b;
            u = candidate;
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= REJECTIONS_PER_DECAY {
                step *= 0.5;
                rejections = 0;
            }
        }
        trajectory.push(best);
        if best > cfg.violation_threshold {
            let w = witness(best, &basis, steps);
            return Ok(OptimizerRun {
                best_trajectory: trajectory,
                witness: Some(w),
                steps,
            });
        }
    }
    Ok(OptimizerRun {
        best_trajectory: trajectory,
        witness: None,
        steps,
    })
}

fn per_dimension<T: Send>(dims: &[usize], f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        dims.par_iter().map(|&n| f(n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        dims.iter().map(|&n| f(n)).collect()
    }
}

/// Runs the three phases. Fails only if the ledger does not reach the
/// largest dimension in `cfg.n_range`; finding no witness is a normal
/// outcome.
pub fn falsify(p: &CandidateDistribution, cfg: &FalsifierConfig, ledger: &ConstraintLedger) -> Result<FalsifyOutcome> {
    let dims = cfg.dims();
    if let Some(&max) = dims.last() {
        if max as u64 > ledger.n_max() {
            return Err(Error::Parameter(format!(
                "ledger covers N <= {} but the search needs N = {max}",
                ledger.n_max()
            )));
        }
    }
    let mut probes = ProbeCounts::default();
    let done = |w: Witness, probes, phase| FalsifyOutcome {
        candidate: p.name().to_string(),
        witness: Some(w),
        probes,
        phase: Some(phase),
    };

    for &n in &dims {
        let (w, count) = ledger_probes_at(p, n, ledger, cfg.violation_threshold)?;
        probes.ledger += count;
        if let Some(w) = w {
            return Ok(done(w, probes, 1));
        }
    }

    let found = per_dimension(&dims, |n| random_phase_at(p, n, cfg))?;
    probes.random += found.iter().map(|(_, c)| c).sum::<usize>();
    if let Some(w) = found.into_iter().find_map(|(w, _)| w) {
        return Ok(done(w, probes, 2));
    }

    let runs = per_dimension(&dims, |n| optimize(p, n, cfg))?;
    probes.optimizer += runs.iter().map(|r| r.steps + 1).sum::<usize>();
    if let Some(w) = runs.into_iter().find_map(|r| r.witness) {
        return Ok(done(w, probes, 3));
    }

    Ok(FalsifyOutcome {
        candidate: p.name().to_string(),
        witness: None,
        probes,
        phase: None,
    })
}

/// The ledger-certificate witness in the smallest dimension that still
/// violates, or `w` itself if no smaller or equal dimension does.
pub fn shrink_witness(
    w: &Witness,
    p: &CandidateDistribution,
    ledger: &ConstraintLedger,
    threshold: f64,
) -> Result<Witness> {
    let top = (w.dimension as u64).min(ledger.n_max()) as usize;
    for n in 1..=top {
        if let (Some(found), _) = ledger_probes_at(p, n, ledger, threshold)? {
            if found.dimension < w.dimension || w.construction_tag != ConstructionTag::LedgerCertificate {
                return Ok(found);
            }
            break;
        }
    }
    Ok(w.clone())
}
