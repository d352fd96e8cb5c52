//! The equal-weight superposition `|Ψ*⟩ = e^{iθ} N^{-1/2} Σ_i |v_i⟩` and the
//! partial-DFT basis that mixes the first `K` base vectors by `K`-th roots
//! of unity while leaving the remaining `N − K` vectors untouched.
//!
//! Indices in serialized certificates are 1-based; the Rust API is 0-based.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{OrthonormalBasis, StateVector, ORTHO_TOLERANCE};
use crate::serde_util::complex_vec;

/// Maps any real angle into `[0, 2π)`.
pub fn normalize_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// `exp(−2πi · r / k)` for an integer residue `r`. The angle is formed from
/// the exact residue, never by repeated multiplication.
fn root_of_unity(residue: i64, k: usize) -> Complex64 {
    let r = residue.rem_euclid(k as i64);
    Complex64::from_polar(1.0, -TAU * r as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricState {
    base: OrthonormalBasis,
    theta: f64,
    state: StateVector,
}

impl SymmetricState {
    pub fn base(&self) -> &OrthonormalBasis {
        &self.base
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Largest deviation of the stored state from `e^{iθ} N^{-1/2} Σ v_i`
    /// recomputed vector by vector.
    pub fn expansion_error(&self) -> f64 {
        let n = self.base.dim();
        let coeff = Complex64::from_polar(1.0 / (n as f64).sqrt(), self.theta);
        (0..n)
            .map(|k| {
                let expected: Complex64 =
                    self.base.vectors().iter().map(|v| coeff * v.amplitudes()[k]).sum();
                (expected - self.state.amplitudes()[k]).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds `|Ψ*⟩` over `base`. `theta` is reduced modulo `2π`.
pub fn symmetric_state(base: &OrthonormalBasis, theta: f64) -> SymmetricState {
    let theta = normalize_theta(theta);
    let n = base.dim();
    let coeff = Complex64::from_polar(1.0 / (n as f64).sqrt(), theta);
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    for v in base.vectors() {
        for (a, x) in amps.iter_mut().zip(v.amplitudes()) {
            *a += x;
        }
    }
    amps.iter_mut().for_each(|a| *a *= coeff);
    SymmetricState {
        base: base.clone(),
        theta,
        state: StateVector::from_raw(amps),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialDftBasis {
    base: OrthonormalBasis,
    k: usize,
    vectors: OrthonormalBasis,
}

impl PartialDftBasis {
    pub fn base(&self) -> &OrthonormalBasis {
        &self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.vectors
    }

    pub fn defect(&self) -> f64 {
        self.vectors.defect()
    }
}

/// `|ṽ_j⟩ = K^{-1/2} Σ_{l<K} exp(−2πi l j / K) |v_l⟩` for `j < K`, and
/// `|ṽ_j⟩ = |v_j⟩` for `j ≥ K` (0-based).
pub fn partial_dft_basis(base: &OrthonormalBasis, k: usize) -> Result<PartialDftBasis> {
    let n = base.dim();
    if k < 1 || k >= n {
        return Err(Error::Parameter(format!(
            "partial DFT needs 1 <= K < N, got K={k}, N={n}"
        )));
    }
    let scale = 1.0 / (k as f64).sqrt();
    let mut vectors = Vec::with_capacity(n);
    for j in 0..k {
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        for (l, v) in base.vectors()[..k].iter().enumerate() {
            let c = root_of_unity((l * j) as i64, k) * scale;
            for (a, x) in amps.iter_mut().zip(v.amplitudes()) {
                *a += c * x;
            }
        }
        vectors.push(StateVector::from_raw(amps));
    }
    vectors.extend(base.vectors()[k..].iter().cloned());
    let vectors = OrthonormalBasis::from_raw(vectors);
    let defect = vectors.defect();
    if defect > ORTHO_TOLERANCE {
        return Err(Error::Certificate(format!(
            "partial DFT basis (N={n}, K={k}) has defect {defect:e}"
        )));
    }
    Ok(PartialDftBasis {
        base: base.clone(),
        k,
        vectors,
    })
}

/// `(1/K) Σ_{l=1}^{K} exp(−2πi (m−j)/K)^{l−1}` with 1-based `j, m`.
///
/// This is the closed form of `⟨ṽ_j|ṽ_m⟩` for the mixed block, evaluated
/// term by term. It is 1 for `j = m` and 0 otherwise.
///
/// # Panics
/// If `j` or `m` lies outside `1..=k`.
pub fn geometric_series_overlap(j: usize, m: usize, k: usize) -> Complex64 {
    assert!(
        (1..=k).contains(&j) && (1..=k).contains(&m),
        "indices must lie in 1..=K"
    );
    let step = m as i64 - j as i64;
    let sum: Complex64 = (0..k as i64).map(|l| root_of_unity(step * l, k)).sum();
    sum / k as f64
}

/// `⟨ṽ_j|Ψ*⟩` for every vector of the partial-DFT basis.
pub fn overlap_with_symmetric(
    tilde: &PartialDftBasis,
    psi_star: &SymmetricState,
) -> Result<Vec<Complex64>> {
    if tilde.base != psi_star.base {
        return Err(Error::Certificate(
            "partial DFT basis and symmetric state are built over different bases".into(),
        ));
    }
    tilde.vectors.overlaps(&psi_star.state)
}

/// The overlaps the construction guarantees: `e^{iθ}√(K/N)`, then `K − 1`
/// zeros, then `N − K` copies of `e^{iθ}/√N`.
pub fn expected_overlaps(n: usize, k: usize, theta: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    out.push(Complex64::from_polar((k as f64 / n as f64).sqrt(), theta));
    out.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(k.saturating_sub(1)));
    out.extend(std::iter::repeat(Complex64::from_polar(1.0 / (n as f64).sqrt(), theta)).take(n - k));
    out
}

/// Largest deviation of `overlaps` from [`expected_overlaps`].
pub fn contract_error(overlaps: &[Complex64], n: usize, k: usize, theta: f64) -> f64 {
    if overlaps.len() != n {
        return f64::INFINITY;
    }
    overlaps
        .iter()
        .zip(expected_overlaps(n, k, theta))
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// Serializable record of one partial-DFT configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionCertificate {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub theta: f64,
    pub basis: OrthonormalBasis,
    #[serde(with = "complex_vec")]
    pub overlaps: Vec<Complex64>,
    pub defect: f64,
    pub contract_error: f64,
}

pub fn certificate(
    tilde: &PartialDftBasis,
    psi_star: &SymmetricState,
) -> Result<ConstructionCertificate> {
    let overlaps = overlap_with_symmetric(tilde, psi_star)?;
    let (n, k, theta) = (tilde.dim(), tilde.k, psi_star.theta);
    Ok(ConstructionCertificate {
        n,
        k,
        theta,
        basis: tilde.vectors.clone(),
        contract_error: contract_error(&overlaps, n, k, theta),
        overlaps,
        defect: tilde.defect(),
    })
}
