//! Sampling measurement outcomes and checking frequencies against exact
//! probabilities.
//!
//! Samples are drawn in fixed chunks, each from its own ChaCha stream, so the
//! counts depend only on `(state, basis, n, seed)` and not on how many
//! threads did the work.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::derivation::RationalProbability;
use crate::error::{Error, Result};
use crate::hilbert::{OrthonormalBasis, StateVector};
use crate::rng;
use crate::serde_util::real;
use crate::stats;

pub const CHUNK: u64 = 1 << 16;
/// Cells whose expected count is below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;
pub const Z_LIMIT: f64 = 4.0;
pub const CHI_SQUARE_TAIL: f64 = 1e-4;

const SAMPLE_STREAM: u64 = 0x4d43_5341;

/// Cumulative distribution of `|⟨v_i|Ψ⟩|²`. The last cell is open-ended so
/// it absorbs the rounding slack of the sum.
fn cumulative(state: &StateVector, basis: &OrthonormalBasis) -> Result<Vec<f64>> {
    let overlaps = basis.overlaps(state)?;
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = overlaps
        .iter()
        .map(|z| {
            acc += z.norm_sqr();
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = f64::INFINITY;
    }
    Ok(cdf)
}

fn sample_chunk(cdf: &[f64], count: u64, seed: u64, chunk: u64) -> Vec<u64> {
    let mut counts = vec![0u64; cdf.len()];
    let mut s = rng::stream(seed, rng::tag(&[SAMPLE_STREAM, chunk]));
    for _ in 0..count {
        let u = rng::uniform(&mut s);
        let idx = cdf.partition_point(|&c| c <= u);
        counts[idx.min(cdf.len() - 1)] += 1;
    }
    counts
}

/// Outcome counts of `n` measurements of `state` in `basis`.
pub fn sample_outcomes(state: &StateVector, basis: &OrthonormalBasis, n: u64, seed: u64) -> Result<Vec<u64>> {
    let cdf = cumulative(state, basis)?;
    let chunks = n.div_ceil(CHUNK);
    let job = |c: u64| sample_chunk(&cdf, CHUNK.min(n - c * CHUNK), seed, c);
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<u64>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<u64>> = (0..chunks).map(job).collect();
    let mut counts = vec![0u64; cdf.len()];
    for p in parts {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub count: u64,
    pub expected_probability: RationalProbability,
    pub frequency: f64,
    #[serde(with = "real")]
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub expected: Vec<RationalProbability>,
    pub counts: Vec<u64>,
    pub n_samples: u64,
    #[serde(with = "real")]
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    #[serde(with = "real")]
    pub chi_square_threshold: f64,
    #[serde(with = "real")]
    pub p_value: f64,
    #[serde(with = "real")]
    pub max_z_score: f64,
    pub pooled_cells: usize,
    pub cells: Vec<CellReport>,
    /// Set by callers that sampled the counts.
    pub seed: Option<u64>,
    pub passed: bool,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,count,expected,frequency,z_score\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.index,
                c.count,
                c.expected_probability.reduced(),
                c.frequency,
                c.z_score
            );
        }
        out
    }
}

/// Pearson χ² and per-cell z-scores of `counts` against exact `expected`
/// probabilities. Cells with expected count below [`MIN_EXPECTED`] are pooled
/// into one; passes when every `|z| ≤ 4` and `p ≥ 1e-4`.
pub fn frequentist_report(counts: &[u64], expected: &[RationalProbability], n: u64) -> Result<SimulationReport> {
    if counts.len() != expected.len() {
        return Err(Error::dim_mismatch(expected.len(), counts.len()));
    }
    let total: BigRational = expected.iter().map(|p| p.value()).sum();
    if !total.is_one() {
        return Err(Error::Parameter(format!("expected probabilities sum to {total}, not 1")));
    }
    let sum: u64 = counts.iter().sum();
    if sum != n || n == 0 {
        return Err(Error::Parameter(format!("counts sum to {sum}, expected {n} > 0")));
    }
    let nf = n as f64;
    let mut cells = Vec::with_capacity(counts.len());
    let mut max_z = 0.0_f64;
    for (i, (&c, p)) in counts.iter().zip(expected).enumerate() {
        let q = p.value().to_f64().unwrap_or(f64::NAN);
        let sd = (nf * q * (1.0 - q)).sqrt();
        let dev = c as f64 - nf * q;
        let z = if sd > 0.0 {
            dev / sd
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z.abs());
        cells.push(CellReport {
            index: i,
            count: c,
            expected_probability: p.clone(),
            frequency: c as f64 / nf,
            z_score: z,
        });
    }

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    let mut pooled = 0;
    for cell in &cells {
        let e = nf * cell.expected_probability.to_f64();
        if e < MIN_EXPECTED {
            pool.0 += cell.count as f64;
            pool.1 += e;
            pooled += 1;
        } else {
            bins.push((cell.count as f64, e));
        }
    }
    if pooled > 0 {
        if pool.1 >= MIN_EXPECTED || bins.is_empty() {
            bins.push(pool);
        } else if let Some(smallest) = bins.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)) {
            smallest.0 += pool.0;
            smallest.1 += pool.1;
        }
    }
    let chi: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let (threshold, p_value) = if dof == 0 {
        (f64::INFINITY, if chi == 0.0 { 1.0 } else { 0.0 })
    } else {
        (
            stats::chi_square_upper_quantile(CHI_SQUARE_TAIL, dof),
            stats::chi_square_sf(chi, dof),
        )
    };
    let passed = max_z <= Z_LIMIT && chi < threshold;
    Ok(SimulationReport {
        dimension: counts.len(),
        expected: expected.to_vec(),
        counts: counts.to_vec(),
        n_samples: n,
        chi_square: chi,
        degrees_of_freedom: dof,
        chi_square_threshold: threshold,
        p_value,
        max_z_score: max_z,
        pooled_cells: pooled,
        cells,
        seed: None,
        passed,
    })
}

/// `max_i |f_i − p_i|` of sampled frequencies.
pub fn max_frequency_deviation(counts: &[u64], expected: &[RationalProbability]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(expected)
        .map(|(&c, p)| (c as f64 / n as f64 - p.to_f64()).abs())
        .fold(0.0, f64::max)
}

/// Two-cell state `(√(K/N), √(1 − K/N))` in the standard basis, with its
/// exact probabilities. For `K = N` the state is one cell.
pub fn fraction_state(k: u64, n: u64) -> Result<(StateVector, OrthonormalBasis, Vec<RationalProbability>)> {
    let p = RationalProbability::new(k, n)?;
    if k == n {
        let s = StateVector::basis_vector(1, 0)?;
        return Ok((s, OrthonormalBasis::standard(1)?, vec![p]));
    }
    let q = RationalProbability::new(n - k, n)?;
    let a = p.to_f64().sqrt();
    let b = q.to_f64().sqrt();
    let s = StateVector::normalized(vec![a.into(), b.into()])?;
    Ok((s, OrthonormalBasis::standard(2)?, vec![p, q]))
}

/// State with amplitudes `√p_i` for exact probabilities summing to 1.
pub fn probabilities_state(probs: &[RationalProbability]) -> Result<(StateVector, OrthonormalBasis)> {
    let total: BigRational = probs.iter().map(|p| p.value()).sum();
    if !total.is_one() {
        return Err(Error::Parameter(format!("probabilities sum to {total}, not 1")));
    }
    let amps = probs.iter().map(|p| p.to_f64().sqrt().into()).collect();
    Ok((StateVector::normalized(amps)?, OrthonormalBasis::standard(probs.len())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(k: u64, n: u64) -> RationalProbability {
        RationalProbability::new(k, n).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_sums() {
        let (s, b, _) = fraction_state(1, 3).unwrap();
        let a = sample_outcomes(&s, &b, 200_000, 9).unwrap();
        assert_eq!(a, sample_outcomes(&s, &b, 200_000, 9).unwrap());
        assert_eq!(a.iter().sum::<u64>(), 200_000);
        assert_ne!(a, sample_outcomes(&s, &b, 200_000, 10).unwrap());
    }

    #[test]
    fn one_cell_takes_everything() {
        let (s, b, p) = fraction_state(4, 4).unwrap();
        let c = sample_outcomes(&s, &b, 1000, 0).unwrap();
        assert_eq!(c, vec![1000]);
        let r = frequentist_report(&c, &p, 1000).unwrap();
        assert!(r.passed);
        assert_eq!(r.degrees_of_freedom, 0);
    }

    #[test]
    fn zero_probability_cell_is_never_hit() {
        let s = StateVector::basis_vector(3, 1).unwrap();
        let c = sample_outcomes(&s, &OrthonormalBasis::standard(3).unwrap(), 10_000, 4).unwrap();
        assert_eq!(c, vec![0, 10_000, 0]);
    }

    #[test]
    fn report_examples() {
        let p = [frac(1, 2), frac(1, 2)];
        let r = frequentist_report(&[500, 500], &p, 1000).unwrap();
        assert_eq!(r.chi_square, 0.0);
        assert!(r.passed);
        let r = frequentist_report(&[700, 300], &p, 1000).unwrap();
        assert!(!r.passed);
        let r2 = frequentist_report(&[0, 1000], &p, 1000).unwrap();
        assert!((r2.chi_square - 1000.0).abs() < 1e-9);
        assert!(!r2.passed);
        assert!((r.max_z_score - 200.0 / 250f64.sqrt()).abs() < 1e-9);
        assert!(frequentist_report(&[5, 5], &[frac(1, 2), frac(1, 3)], 10).is_err());
        assert!(frequentist_report(&[5, 4], &p, 10).is_err());
    }

    #[test]
    fn pooling_small_cells() {
        let p = [frac(998, 1000), frac(1, 1000), frac(1, 1000)];
        let r = frequentist_report(&[998, 1, 1], &p, 1000).unwrap();
        assert_eq!(r.pooled_cells, 2);
        assert_eq!(r.degrees_of_freedom, 0);
        let csv = r.to_csv();
        assert!(csv.starts_with("index,count"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn sampled_frequencies_pass() {
        let probs = [frac(1, 6), frac(1, 3), frac(1, 2)];
        let (s, b) = probabilities_state(&probs).unwrap();
        let c = sample_outcomes(&s, &b, 300_000, 2).unwrap();
        let r = frequentist_report(&c, &probs, 300_000).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(probabilities_state(&[frac(1, 2)]).is_err());
    }
}
