//! Browser bindings. Every export takes plain numbers and strings and
//! returns a JSON string: the result on success, `{"error": "..."}` on
//! failure, so the same functions run natively in tests.

use born_core::axioms::CandidateDistribution;
use born_core::construction::{contract_error, expected_overlaps, partial_dft_basis, symmetric_state};
use born_core::derivation::{build_ledger, DEFAULT_THETAS};
use born_core::falsifier::{falsify, FalsifierConfig};
use born_core::hilbert::{haar_unitary, OrthonormalBasis};
use born_core::Complex64;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest dimension the page may request; keeps the UI responsive.
pub const MAX_DIM: usize = 64;
pub const MAX_FALSIFY_DIM: usize = 12;
pub const MAX_LEDGER_DIM: usize = 24;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn pairs(v: &[Complex64]) -> Value {
    v.iter().map(|z| json!([z.re, z.im])).collect()
}

fn candidate(src: &str) -> Result<CandidateDistribution, String> {
    CandidateDistribution::from_expr(src).map_err(|e| e.to_string())
}

fn overlaps_value(n: usize, k: usize, theta: f64, seed: Option<u64>) -> Result<Value, String> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(format!("N must be between 2 and {MAX_DIM}"));
    }
    let base = match seed {
        Some(s) => OrthonormalBasis::from_unitary(&haar_unitary(n, s).map_err(|e| e.to_string())?),
        None => OrthonormalBasis::standard(n).map_err(|e| e.to_string())?,
    };
    let tilde = partial_dft_basis(&base, k).map_err(|e| e.to_string())?;
    let psi = symmetric_state(&base, theta);
    let ov = tilde.basis().overlaps(psi.state()).map_err(|e| e.to_string())?;
    let err = contract_error(&ov, n, k, psi.theta());
    Ok(json!({
        "N": n,
        "K": k,
        "theta": psi.theta(),
        "overlaps": pairs(&ov),
        "expected": pairs(&expected_overlaps(n, k, psi.theta())),
        "probabilities": ov.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(),
        "contract_error": err,
        "defect": tilde.defect(),
    }))
}

/// Overlaps of the symmetric state with the partial-DFT basis. A `seed` of
/// zero or below uses the standard basis, otherwise a Haar basis.
#[wasm_bindgen]
pub fn construction_overlaps(n: usize, k: usize, theta: f64, seed: f64) -> String {
    let seed = (seed > 0.0).then_some(seed as u64);
    respond(overlaps_value(n, k, theta, seed))
}

fn falsify_value(expr: &str, n_min: usize, n_max: usize, seed: u64) -> Result<Value, String> {
    let p = candidate(expr)?;
    if n_min < 1 || n_min > n_max || n_max > MAX_FALSIFY_DIM {
        return Err(format!("need 1 <= N_min <= N_max <= {MAX_FALSIFY_DIM}"));
    }
    let ledger = build_ledger(n_max as u64, &DEFAULT_THETAS, true, seed).map_err(|e| e.to_string())?;
    let cfg = FalsifierConfig {
        n_range: (n_min..=n_max).collect(),
        random_trials: 16,
        optimizer_steps: 100,
        seed,
        ..FalsifierConfig::default()
    };
    let out = falsify(&p, &cfg, &ledger).map_err(|e| e.to_string())?;
    serde_json::to_value(&out).map_err(|e| e.to_string())
}

/// Falsifier run over `n_min..=n_max`.
#[wasm_bindgen]
pub fn falsify_candidate(expr: &str, n_min: usize, n_max: usize, seed: f64) -> String {
    respond(falsify_value(expr, n_min, n_max, seed.max(0.0) as u64))
}

fn curve_value(expr: &str, n_max: usize, points: usize, phi: f64) -> Result<Value, String> {
    let p = candidate(expr)?;
    if !(1..=MAX_LEDGER_DIM).contains(&n_max) || !(2..=4096).contains(&points) {
        return Err(format!("need 1 <= N_max <= {MAX_LEDGER_DIM} and 2 <= points <= 4096"));
    }
    let mut curve = Vec::with_capacity(points);
    for i in 0..points {
        let r = i as f64 / (points - 1) as f64;
        let v = p.value(Complex64::from_polar(r, phi)).map_err(|e| e.to_string())?;
        curve.push(json!([r, if v.is_finite() { json!(v) } else { Value::Null }]));
    }
    // Ledger moduli √(K/N) and their derived values K/N, without building
    // certificates: the page only plots them.
    let mut ledger = Vec::new();
    for n in 1..=n_max as u64 {
        for k in 0..=n {
            if gcd(k, n) == 1 {
                let q = k as f64 / n as f64;
                let v = p.value(Complex64::from_polar(q.sqrt(), phi)).map_err(|e| e.to_string())?;
                ledger.push(json!({ "K": k, "N": n, "r": q.sqrt(), "value": q, "candidate": v }));
            }
        }
    }
    Ok(json!({ "candidate": p.name(), "phi": phi, "curve": curve, "ledger": ledger }))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `P(r e^{iφ})` on a grid of `points` moduli, plus the ledger points for
/// denominators up to `n_max`.
#[wasm_bindgen]
pub fn compare_curve(expr: &str, n_max: usize, points: usize, phi: f64) -> String {
    respond(curve_value(expr, n_max, points, phi))
}
