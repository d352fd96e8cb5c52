//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p born-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use born_core::axioms::{run_all, CandidateDistribution};
use born_core::construction::{partial_dft_basis, symmetric_state};
use born_core::derivation::{
    compare_to_born, continuity_extension_check, ConstraintLedger, LedgerJson, RationalProbability,
};
use born_core::falsifier::{falsify, FalsifierConfig};
use born_core::hilbert::{haar_unitary, OrthonormalBasis};
use born_core::montecarlo::{frequentist_report, max_frequency_deviation, probabilities_state, sample_outcomes};
use born_core::Complex64;
use serde_json::Value;

type Outcome = Result<String, String>;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_born")
}

fn born(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin())
        .args(args)
        .env_remove("BORN_SEED")
        .output()
        .expect("run born");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).expect("utf-8 output"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// 1 + Σ φ(n): the number of reduced fractions in [0, 1] with denominator ≤ n.
fn farey_length(n: u64) -> usize {
    1 + (1..=n).map(|m| (1..=m).filter(|&k| gcd(k, m) == 1).count()).sum::<usize>()
}

fn load_ledger(path: &Path) -> LedgerJson {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(v["result"].clone()).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::INFINITY)
}

fn criterion_1(dir: &Path) -> Outcome {
    let path = dir.join("ledger64.json");
    let start = Instant::now();
    let (code, _) = born(&["derive", "--n-max", "64", "-o", path.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure(code == 0, || format!("derive exited with {code}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("derive took {elapsed:?}"))?;
    let json = load_ledger(&path);
    ensure(json.entries.len() == farey_length(64), || {
        format!("{} entries, expected {}", json.entries.len(), farey_length(64))
    })?;
    let (mut defect, mut contract) = (0.0_f64, 0.0_f64);
    for e in &json.entries {
        let (k, n) = (e.k, e.n);
        let (p, q) = e.value.fraction.split_once('/').unwrap();
        let (p, q): (u64, u64) = (p.parse().unwrap(), q.parse().unwrap());
        // Exact: p/q == k/n by cross-multiplication.
        ensure(p * n == k * q, || format!("entry {k}/{n} asserts {p}/{q}"))?;
        ensure(e.verified && e.certificate.verified, || format!("entry {k}/{n} unverified"))?;
        defect = defect.max(e.certificate.defect);
        for c in &e.certificate.checks {
            contract = contract.max(c.contract_error);
        }
    }
    ensure(defect <= 1e-10, || format!("max defect {defect:e}"))?;
    ensure(contract <= 1e-11, || format!("max contract error {contract:e}"))?;
    let ledger = ConstraintLedger::from_json(json).map_err(|e| e.to_string())?;
    let gap = compare_to_born(&ledger);
    ensure(gap == Default::default(), || format!("compare_to_born = {gap}"))?;
    Ok(format!(
        "{} entries in {:.1}s, compare_to_born = 0, max defect {defect:.1e}, max contract error {contract:.1e}",
        ledger.len(),
        elapsed.as_secs_f64()
    ))
}

/// Own Gram computation, independent of the library's defect routine.
fn gram_defect(b: &OrthonormalBasis) -> f64 {
    let vs = b.vectors();
    let mut worst = 0.0_f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, c) in vs.iter().enumerate() {
            let g: Complex64 = a.amplitudes().iter().zip(c.amplitudes()).map(|(x, y)| x.conj() * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).norm());
        }
    }
    worst
}

fn criterion_2() -> Outcome {
    let thetas = [0.0, 1.0, std::f64::consts::PI, 5.5];
    let (mut defect, mut first, mut zeros, mut tail) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut configs = 0;
    for n in 2..=128usize {
        let base = OrthonormalBasis::from_unitary(&haar_unitary(n, 1000 + n as u64).map_err(|e| e.to_string())?);
        for k in 1..n {
            let tilde = partial_dft_basis(&base, k).map_err(|e| e.to_string())?;
            defect = defect.max(tilde.defect());
            if n <= 24 {
                defect = defect.max(gram_defect(tilde.basis()));
            }
            for &theta in &thetas {
                let psi = symmetric_state(&base, theta);
                let ov = tilde.basis().overlaps(psi.state()).map_err(|e| e.to_string())?;
                first = first.max((ov[0].norm() - (k as f64 / n as f64).sqrt()).abs());
                for z in &ov[1..k] {
                    zeros = zeros.max(z.norm());
                }
                for z in &ov[k..] {
                    tail = tail.max((z.norm() - 1.0 / (n as f64).sqrt()).abs());
                }
                configs += 1;
            }
        }
    }
    ensure(defect <= 1e-10, || format!("Gram defect {defect:e}"))?;
    ensure(first <= 1e-11 && zeros <= 1e-11 && tail <= 1e-11, || {
        format!("first {first:e}, zeros {zeros:e}, tail {tail:e}")
    })?;
    Ok(format!(
        "{configs} configurations, Gram defect {defect:.1e}, first {first:.1e}, zeros {zeros:.1e}, tail {tail:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let born = CandidateDistribution::from_expr("r^2").map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for n in [2usize, 3, 5, 8, 16, 64] {
        let reports = run_all(&born, n, 1000, 20_240 + n as u64, 1e-9).map_err(|e| e.to_string())?;
        ensure(reports.len() == 5, || "expected five reports".into())?;
        for r in &reports {
            ensure(r.passed && r.max_residual <= 1e-9, || {
                format!("N={n} {}: residual {:e}", r.axiom, r.max_residual)
            })?;
            worst = worst.max(r.max_residual);
        }
    }
    Ok(format!("5 checks x 6 dimensions x 1000 probes, max residual {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let ledger = born_core::derivation::build_ledger(8, &born_core::derivation::DEFAULT_THETAS, true, 0)
        .map_err(|e| e.to_string())?;
    let cfg = FalsifierConfig {
        n_range: (2..=8).collect(),
        ..FalsifierConfig::default()
    };
    let sqrt_half = 0.5_f64.sqrt();
    // Expected residuals at the N=2 symmetric state: |2·P(1/√2) − 1|.
    let fixtures: [(&str, Option<(f64, &str)>); 4] = [
        ("r", Some(((2.0 * sqrt_half - 1.0).abs(), "Normalization"))),
        ("r^4", Some(((2.0 * sqrt_half.powi(4) - 1.0).abs(), "Normalization"))),
        ("r^2 + 0.05", Some((0.05, "Orthogonality"))),
        ("r^2*(1 + 0.1*sin(phi))", None),
    ];
    let mut parts = Vec::new();
    for (src, expected) in fixtures {
        let p = CandidateDistribution::from_expr(src).map_err(|e| e.to_string())?;
        let out = falsify(&p, &cfg, &ledger).map_err(|e| e.to_string())?;
        let w = out.witness.ok_or_else(|| format!("no witness for {src}"))?;
        let replay = w.replay_expression().map_err(|e| e.to_string())?;
        ensure((replay - w.residual).abs() <= 1e-12, || format!("{src}: replay {replay} vs {}", w.residual))?;
        ensure(w.residual > cfg.violation_threshold, || format!("{src}: residual below threshold"))?;
        if let Some((want, axiom)) = expected {
            ensure(w.dimension == 2, || format!("{src}: witness at N={}", w.dimension))?;
            ensure(format!("{:?}", w.axiom) == axiom, || format!("{src}: axiom {:?}", w.axiom))?;
            ensure((w.residual - want).abs() <= 1e-12, || format!("{src}: residual {} vs {want}", w.residual))?;
        }
        parts.push(format!("{src} -> {:.8} ({}, N={})", w.residual, w.axiom, w.dimension));
    }
    Ok(parts.join("; "))
}

fn criterion_5() -> Outcome {
    let third = RationalProbability::new(1u64, 3u64).unwrap();
    let two_thirds = RationalProbability::new(2u64, 3u64).unwrap();
    let probs = vec![third, two_thirds];
    let (state, basis) = probabilities_state(&probs).map_err(|e| e.to_string())?;
    let mut passes = 0;
    for seed in 0..100u64 {
        let counts = sample_outcomes(&state, &basis, 1_000_000, seed).map_err(|e| e.to_string())?;
        if frequentist_report(&counts, &probs, 1_000_000).map_err(|e| e.to_string())?.passed {
            passes += 1;
        }
    }
    ensure(passes >= 99, || format!("{passes}/100 seeds pass"))?;
    let max_dev = |n: u64| -> Result<f64, String> {
        let mut worst = 0.0_f64;
        for seed in 0..20u64 {
            let c = sample_outcomes(&state, &basis, n, 7_000 + seed).map_err(|e| e.to_string())?;
            worst = worst.max(max_frequency_deviation(&c, &probs));
        }
        Ok(worst)
    };
    let (small, large) = (max_dev(10_000)?, max_dev(1_000_000)?);
    ensure(small >= 3.0 * large, || format!("max dev {small:e} at 1e4 vs {large:e} at 1e6"))?;
    Ok(format!(
        "{passes}/100 seeds pass at 1e6 samples; max |f - p| {small:.2e} at 1e4 vs {large:.2e} at 1e6"
    ))
}

/// Agrees with |z|² wherever |z|² is a fraction with denominator ≤ 64 and
/// returns 1 − |z|² everywhere else.
fn discontinuous() -> CandidateDistribution {
    CandidateDistribution::new("ledger-agreeing step", |z| {
        let q = z.norm_sqr();
        let on_ledger = (1..=64u64).any(|n| {
            let k = (q * n as f64).round();
            (q - k / n as f64).abs() <= 1e-12
        });
        if on_ledger {
            q
        } else {
            1.0 - q
        }
    })
}

fn criterion_6(dir: &Path) -> Outcome {
    let path = dir.join("ledger64.json");
    let file = path.to_str().unwrap();
    let (code, out) = born(&["compare", "-p", "r^2", file]);
    let born_report: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let r = &born_report["result"];
    let (rat, grid) = (num(&r["max_rational_residual"]), num(&r["max_grid_deviation_from_born"]));
    ensure(code == 0 && rat <= 1e-12 && grid <= 1e-12, || {
        format!("r^2: exit {code}, rational {rat:e}, grid {grid:e}")
    })?;

    let (code, out) = born(&["compare", "-p", "r", file, "--grid", "512"]);
    let v: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let r_rat = num(&v["result"]["max_rational_residual"]);
    let want = (0.5_f64.sqrt() - 0.5).abs();
    ensure(code == 1 && r_rat >= want - 1e-12, || format!("r: exit {code}, rational {r_rat}"))?;

    let ledger = ConstraintLedger::from_json(load_ledger(&path)).map_err(|e| e.to_string())?;
    let rep = continuity_extension_check(&discontinuous(), &ledger, 512).map_err(|e| e.to_string())?;
    ensure(rep.max_rational_residual <= 1e-12 && rep.max_grid_deviation_from_born >= 0.5, || {
        format!(
            "step: rational {:e}, grid {}",
            rep.max_rational_residual, rep.max_grid_deviation_from_born
        )
    })?;
    Ok(format!(
        "r^2 rational {rat:.1e} grid {grid:.1e}; r rational {r_rat:.4}; step rational {:.1e} grid {:.3}",
        rep.max_rational_residual, rep.max_grid_deviation_from_born
    ))
}

fn strip_timestamp(text: &str) -> Result<String, String> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| format!("{e}: {text}"))?;
    v.as_object_mut().ok_or("report is not an object")?.remove("timestamp");
    Ok(serde_json::to_string(&v).unwrap())
}

fn criterion_7(dir: &Path) -> Outcome {
    let ledger = dir.join("ledger64.json");
    let ledger = ledger.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["derive", "--n-max", "12", "--seed", "5"],
        vec!["derive", "--n-max", "5", "--full-certificates"],
        vec!["certify", ledger],
        vec!["falsify", "-p", "r^2.1", "--n-range", "2..6", "--seed", "3"],
        vec!["falsify", "-p", "r^2", "--n-range", "2..5", "--seed", "3"],
        vec!["simulate", "--fraction", "2/3", "--samples", "200000", "--seed", "9"],
        vec!["simulate", "--probabilities", "1/6,1/3,1/2", "--samples", "50000"],
        vec!["compare", "-p", "r", ledger, "--grid", "64"],
    ];
    for args in &runs {
        let (c1, a) = born(args);
        let (c2, b) = born(args);
        ensure(c1 == c2, || format!("{args:?}: exit codes {c1} vs {c2}"))?;
        ensure(strip_timestamp(&a)? == strip_timestamp(&b)?, || format!("{args:?}: outputs differ"))?;
    }
    let (_, a) = born(&["simulate", "--fraction", "1/3", "--samples", "1000", "--format", "csv"]);
    let (_, b) = born(&["simulate", "--fraction", "1/3", "--samples", "1000", "--format", "csv"]);
    ensure(a == b, || "csv outputs differ".into())?;
    Ok(format!("{} subcommand configurations byte-identical across runs", runs.len() + 1))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let dir: PathBuf = dir.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("ledger exactness", Box::new({
            let d = dir.clone();
            move || criterion_1(&d)
        })),
        ("construction soundness", Box::new(criterion_2)),
        ("Born candidate passes", Box::new(criterion_3)),
        ("falsification completeness", Box::new(criterion_4)),
        ("frequentist check", Box::new(criterion_5)),
        ("continuity probe", Box::new({
            let d = dir.clone();
            move || criterion_6(&d)
        })),
        ("determinism", Box::new({
            let d = dir.clone();
            move || criterion_7(&d)
        })),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
