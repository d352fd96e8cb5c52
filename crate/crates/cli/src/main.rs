//! `born`: derive, certify, falsify, simulate and compare from the shell.
//!
//! Exit codes: 0 success (or a witness was found), 1 no witness / failed
//! comparison / failed statistical gate, 2 verification failure, 64 usage
//! error, 66 unreadable input.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use born_core::axioms::CandidateDistribution;
use born_core::derivation::{
    build_ledger_with, certify_ledger, compare_to_born, continuity_extension_check, ConstraintLedger,
    LedgerJson, LedgerSettings, DEFAULT_THETAS,
};
use born_core::dsl::parse_candidate;
use born_core::falsifier::{falsify, shrink_witness, FalsifierConfig, VIOLATION_THRESHOLD};
use born_core::montecarlo::{fraction_state, frequentist_report, probabilities_state, sample_outcomes};
use born_core::derivation::RationalProbability;
use born_core::{Complex64, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const EXIT_NEGATIVE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 66;

#[derive(Parser, Debug)]
#[command(name = "born", version, about = "Exact Born-rule constraint ledger and candidate falsifier")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "BORN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the constraint ledger for all fractions K/N with N <= n-max.
    Derive(DeriveArgs),
    /// Re-verify every certificate of a ledger file.
    Certify(CertifyArgs),
    /// Search for a witness against a candidate P(z).
    Falsify(FalsifyArgs),
    /// Sample measurement outcomes and test them against exact probabilities.
    Simulate(SimulateArgs),
    /// Compare a candidate with a ledger on rational points and a modulus grid.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Serialize)]
struct DeriveArgs {
    #[arg(long)]
    n_max: u64,
    /// Comma-separated phase samples; constant expressions such as `pi/2`
    /// are accepted.
    #[arg(long, value_parser = parse_thetas)]
    theta: Option<Thetas>,
    /// Certify over the standard basis instead of Haar-rotated bases.
    #[arg(long)]
    no_rotate: bool,
    /// Skip the extra seeded phase per constraint.
    #[arg(long)]
    no_random_theta: bool,
    /// Embed every basis and state in the output.
    #[arg(long)]
    full_certificates: bool,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    file: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FalsifyArgs {
    /// Candidate expression in r, phi, re, im.
    #[arg(short = 'p', long = "candidate")]
    candidate: String,
    /// Dimensions: `a..b` (inclusive) or a list `2,3,5`.
    #[arg(long, default_value = "2..8", value_parser = parse_range)]
    n_range: Dims,
    #[arg(long, default_value_t = 32)]
    random_trials: usize,
    #[arg(long, default_value_t = 200)]
    optimizer_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    step_scale: f64,
    #[arg(long, default_value_t = VIOLATION_THRESHOLD)]
    threshold: f64,
    /// Replace the witness by the smallest-dimension one.
    #[arg(long)]
    shrink: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("spec").required(true).args(["fraction", "probabilities"])))]
struct SimulateArgs {
    /// State with probabilities (K/N, 1 - K/N).
    #[arg(long)]
    fraction: Option<String>,
    /// Comma-separated exact probabilities, e.g. `1/6,1/3,1/2`.
    #[arg(long)]
    probabilities: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(short = 'p', long = "candidate")]
    candidate: String,
    file: PathBuf,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
}

fn parse_constant(s: &str) -> Result<f64, String> {
    let e = parse_candidate(s).map_err(|e| e.to_string())?;
    e.eval(Complex64::new(0.0, 0.0))
        .map_err(|e| e.to_string())
        .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("`{s}` is not finite")) })
}

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Thetas(Vec<f64>);

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Dims(Vec<usize>);

fn parse_thetas(s: &str) -> Result<Thetas, String> {
    s.split(',').map(|t| parse_constant(t.trim())).collect::<Result<_, _>>().map(Thetas)
}

fn parse_range(s: &str) -> Result<Dims, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a dimension"))
            .and_then(|n| if n >= 1 { Ok(n) } else { Err("dimensions start at 1".to_string()) })
    };
    let dims: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if dims.is_empty() {
        return Err("no dimensions given".into());
    }
    Ok(Dims(dims))
}

/// A failed run: exit code plus message for stderr.
struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(EXIT_USAGE, msg.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) => Failure(EXIT_USAGE, e.to_string()),
            _ => Failure(EXIT_VERIFY, e.to_string()),
        }
    }
}

/// What a subcommand produced: the JSON result, an optional CSV view and
/// the exit code.
struct Report {
    result: Value,
    csv: Option<String>,
    code: u8,
}

fn candidate(src: &str) -> Result<CandidateDistribution, Failure> {
    CandidateDistribution::from_expr(src).map_err(|e| {
        let pos = e.position();
        Failure::usage(format!("{e}\n  {src}\n  {}^", " ".repeat(pos)))
    })
}

fn read_ledger(path: &PathBuf) -> Result<LedgerJson, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))?;
    // Accept both a bare ledger and one wrapped in the report envelope.
    let inner = v.get("result").cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| Failure(EXIT_IO, format!("{}: not a ledger: {e}", path.display())))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn derive(args: &DeriveArgs, seed: u64) -> Result<Report, Failure> {
    if args.n_max < 1 {
        return Err(Failure::usage("--n-max must be at least 1"));
    }
    let thetas = args.theta.clone().map(|t| t.0).unwrap_or_else(|| DEFAULT_THETAS.to_vec());
    let mut settings = LedgerSettings::new(args.n_max, &thetas, !args.no_rotate, seed);
    settings.random_theta = !args.no_random_theta;
    let ledger = build_ledger_with(settings).map_err(|e| Failure(EXIT_VERIFY, e.to_string()))?;
    let gap = compare_to_born(&ledger);
    if gap != Default::default() {
        return Err(Failure(EXIT_VERIFY, format!("ledger deviates from |z|^2 by {gap}")));
    }
    let json = ledger.to_json(args.full_certificates)?;
    let mut csv = String::from("K,N,fraction,decimal,representations,certificate_digest,verified\n");
    for e in &json.entries {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.k,
            e.n,
            e.value.fraction,
            e.value.decimal,
            e.representations.len(),
            e.certificate_digest,
            e.verified
        ));
    }
    Ok(Report {
        result: to_value(&json),
        csv: Some(csv),
        code: 0,
    })
}

fn certify(args: &CertifyArgs) -> Result<Report, Failure> {
    let ledger = read_ledger(&args.file)?;
    let report = certify_ledger(&ledger);
    let mut csv = String::from("K,N,reason\n");
    for f in &report.failures {
        csv.push_str(&format!("{},{},{}\n", f.k, f.n, f.reason));
    }
    for f in &report.failures {
        eprintln!("certificate {}/{} failed: {}", f.k, f.n, f.reason);
    }
    Ok(Report {
        code: if report.passed { 0 } else { EXIT_VERIFY },
        result: to_value(&report),
        csv: Some(csv),
    })
}

fn falsify_cmd(args: &FalsifyArgs, seed: u64) -> Result<Report, Failure> {
    let p = candidate(&args.candidate)?;
    if !(args.threshold > 0.0) || !(args.step_scale > 0.0) {
        return Err(Failure::usage("--threshold and --step-scale must be positive"));
    }
    let cfg = FalsifierConfig {
        n_range: args.n_range.0.clone(),
        random_trials: args.random_trials,
        optimizer_steps: args.optimizer_steps,
        step_scale: args.step_scale,
        violation_threshold: args.threshold,
        seed,
    };
    let n_max = *args.n_range.0.iter().max().expect("non-empty range") as u64;
    let ledger: ConstraintLedger = build_ledger_with(LedgerSettings::new(n_max, &DEFAULT_THETAS, true, seed))
        .map_err(|e| Failure(EXIT_VERIFY, e.to_string()))?;
    let mut outcome = falsify(&p, &cfg, &ledger)?;
    if args.shrink {
        if let Some(w) = &outcome.witness {
            outcome.witness = Some(shrink_witness(w, &p, &ledger, args.threshold)?);
        }
    }
    let replay = match &outcome.witness {
        Some(w) => {
            let r = w.replay(&p)?;
            if (r - w.residual).abs() > 1e-12 || r < args.threshold {
                return Err(Failure(EXIT_VERIFY, format!("witness replays to {r}, recorded {}", w.residual)));
            }
            Some(r)
        }
        None => None,
    };
    let mut csv = String::from("candidate,falsified,axiom,N,residual,construction_tag,probes\n");
    match &outcome.witness {
        Some(w) => csv.push_str(&format!(
            "{},true,{},{},{},{:?},{}\n",
            csv_field(&outcome.candidate),
            w.axiom,
            w.dimension,
            w.residual,
            w.construction_tag,
            outcome.probes.total()
        )),
        None => csv.push_str(&format!("{},false,,,,,{}\n", csv_field(&outcome.candidate), outcome.probes.total())),
    }
    let code = if outcome.witness.is_some() { 0 } else { EXIT_NEGATIVE };
    let mut result = to_value(&outcome);
    result["falsified"] = json!(outcome.witness.is_some());
    result["replay_residual"] = json!(replay);
    Ok(Report {
        result,
        csv: Some(csv),
        code,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_fraction(s: &str) -> Result<RationalProbability, Failure> {
    RationalProbability::try_from(s.trim().to_string()).map_err(|e| Failure::usage(e.to_string()))
}

fn simulate(args: &SimulateArgs, seed: u64) -> Result<Report, Failure> {
    if args.samples < 1 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    let (state, basis, expected) = match (&args.fraction, &args.probabilities) {
        (Some(f), None) => {
            let r = parse_fraction(f)?;
            let (k, n) = (r.numer().to_string(), r.denom().to_string());
            let k: u64 = k.parse().map_err(|_| Failure::usage("fraction too large"))?;
            let n: u64 = n.parse().map_err(|_| Failure::usage("fraction too large"))?;
            fraction_state(k, n).map_err(|e| Failure::usage(e.to_string()))?
        }
        (None, Some(list)) => {
            let probs = list.split(',').map(parse_fraction).collect::<Result<Vec<_>, _>>()?;
            let (s, b) = probabilities_state(&probs).map_err(|e| Failure::usage(e.to_string()))?;
            (s, b, probs)
        }
        _ => return Err(Failure::usage("give exactly one of --fraction or --probabilities")),
    };
    let counts = sample_outcomes(&state, &basis, args.samples, seed)?;
    let mut report = frequentist_report(&counts, &expected, args.samples)?;
    report.seed = Some(seed);
    Ok(Report {
        code: if report.passed { 0 } else { EXIT_NEGATIVE },
        csv: Some(report.to_csv()),
        result: to_value(&report),
    })
}

fn compare(args: &CompareArgs) -> Result<Report, Failure> {
    let p = candidate(&args.candidate)?;
    if args.grid < 2 {
        return Err(Failure::usage("--grid must be at least 2"));
    }
    let json = read_ledger(&args.file)?;
    let ledger = ConstraintLedger::from_json(json).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    let report = continuity_extension_check(&p, &ledger, args.grid)?;
    let passed = report.max_rational_residual <= args.tolerance && report.max_grid_deviation_from_born <= args.tolerance;
    let csv = format!(
        "candidate,max_rational_residual,max_grid_deviation_from_born,grid_size,ledger_size,passed\n{},{},{},{},{},{}\n",
        csv_field(&report.candidate),
        report.max_rational_residual,
        report.max_grid_deviation_from_born,
        report.grid_size,
        report.ledger_size,
        passed
    );
    let mut result = to_value(&report);
    result["tolerance"] = json!(args.tolerance);
    result["passed"] = json!(passed);
    Ok(Report {
        result,
        csv: Some(csv),
        code: if passed { 0 } else { EXIT_NEGATIVE },
    })
}

fn run(cli: &Cli) -> Result<(Report, Value), Failure> {
    let seed = cli.seed;
    let (name, args, report) = match &cli.command {
        Command::Derive(a) => ("derive", to_value(a), derive(a, seed)?),
        Command::Certify(a) => ("certify", to_value(a), certify(a)?),
        Command::Falsify(a) => ("falsify", to_value(a), falsify_cmd(a, seed)?),
        Command::Simulate(a) => ("simulate", to_value(a), simulate(a, seed)?),
        Command::Compare(a) => ("compare", to_value(a), compare(a)?),
    };
    let config = json!({
        "subcommand": name,
        "seed": seed,
        "format": cli.format,
        "args": args,
    });
    Ok((report, config))
}

fn emit(cli: &Cli, report: &Report, config: Value) -> Result<(), Failure> {
    let text = match cli.format {
        Format::Json => {
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let envelope = json!({
                "tool": "born",
                "version": born_core::VERSION,
                "timestamp": timestamp,
                "config": config,
                "exit_code": report.code,
                "result": report.result,
            });
            let mut s = serde_json::to_string_pretty(&envelope).expect("JSON values serialize");
            s.push('\n');
            s
        }
        Format::Csv => report.csv.clone().unwrap_or_default(),
    };
    match &cli.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure(EXIT_IO, format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = run(&cli).and_then(|(report, config)| emit(&cli, &report, config).map(|_| report.code));
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("born: {msg}");
            ExitCode::from(code)
        }
    }
}
