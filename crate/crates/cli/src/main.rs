//! `orlicz-check`: command-line front end.
//!
//! Exit status: 0 when every check passes, 1 on a check failure, 2 on a
//! usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use orlicz_bellman::bellman::{
    verify_gradient_bounds, verify_hessian_lower, verify_mollified, verify_upper_bound, BellmanContext, SampleOptions,
};
use orlicz_bellman::ellipticity::{cm_dissipativity_check, EllipticityReport, MatrixSpec};
use orlicz_bellman::harness::{self, criteria, oracles, Criterion, RunConfig};
use orlicz_bellman::report::MarginReport;
use orlicz_bellman::sampling::log_grid;
use orlicz_bellman::semigroup::{verify_embedding, EmbeddingConfig};
use orlicz_bellman::young::{doubling_constants, verify_dual_quantities, ConjugatePair, FamilySpec};
use orlicz_bellman::Error;

#[derive(Parser)]
#[command(name = "orlicz-check", version, about = "Checks of Orlicz-space bilinear embeddings for complex heat semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Sample budget for pointwise checks
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory (overridden by ORLICZ_OUT_DIR)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the numerical conjugate against brute-force Legendre suprema
    Conjugate {
        #[arg(long, default_value = "power-sum:3,2.5,1")]
        family: String,
        #[arg(long, default_value_t = 1e-3)]
        lo: f64,
        #[arg(long, default_value_t = 1e3)]
        hi: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Characteristic quantities, p and D of a family
    Quantities {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        common: Common,
    },
    /// Size, gradient and convexity bounds of the Bellman function
    CheckBellman {
        #[arg(long, default_value = "power:4")]
        family: String,
        /// JSON file with `A`, `B` and optionally `young`
        #[arg(long)]
        config: Option<PathBuf>,
        /// Budget for the mollified checks; 0 skips them
        #[arg(long, default_value_t = 100)]
        mollified_samples: usize,
        #[arg(long, default_value_t = 0.05)]
        nu: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Hessian assembly against closed forms and finite differences
    CheckHessian {
        #[arg(long, default_value = "power:4")]
        family: String,
        #[command(flatten)]
        common: Common,
    },
    /// Ellipticity constants of a matrix pair and the dissipativity check
    CheckEllipticity {
        #[arg(long, default_value = "power:4")]
        family: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evolve both semigroups and write the integrand time series
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full embedding run with both right-hand sides and the heat-flow checks
    VerifyEmbedding {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// The acceptance matrix and module invariants
    Suite {
        /// Run config JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to criteria (1..9, c1..c9, invariants); repeatable
        #[arg(long)]
        criterion: Vec<String>,
        #[arg(long)]
        mollified_samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Usage-level failure (exit 2) or check-level failure (exit 1).
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::ExponentBelowTwo(_) | Error::GridMismatch(_) => {
                Failure::Usage(e.to_string())
            }
            Error::Stage { stage: "grid" | "young" | "data" | "matrix A" | "matrix B", .. } => Failure::Usage(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn parse_family(text: &str) -> Result<FamilySpec, Failure> {
    FamilySpec::parse(text).map_err(|e| Failure::Usage(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(common: &Common, stem: &str, json: &str, csv: &str) -> Result<(), Failure> {
    let dir = harness::out_dir(common.out.as_deref(), Path::new("orlicz-out"));
    let (j, c) = harness::write_pair(&dir, stem, json, csv).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("wrote {} and {}", j.display(), c.display());
    Ok(())
}

fn emit_reports(common: &Common, stem: &str, reports: Vec<MarginReport>) -> Outcome {
    let (json, csv, pass) = harness::reports_json_csv(reports);
    for line in csv.lines().skip(1) {
        println!("{line}");
    }
    emit(common, stem, &json, &csv)?;
    Ok(pass)
}

fn trim(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Matrix pair (and optionally the family) for the pointwise checks.
#[derive(Deserialize, Serialize)]
struct PairConfig {
    #[serde(default)]
    young: Option<FamilySpec>,
    #[serde(rename = "A")]
    a: MatrixSpec,
    #[serde(rename = "B")]
    b: MatrixSpec,
}

fn pair_config(family: &str, config: Option<&Path>) -> Result<(FamilySpec, MatrixSpec, MatrixSpec), Failure> {
    match config {
        Some(path) => {
            let c: PairConfig = read_json(path)?;
            let young = match c.young {
                Some(y) => y,
                None => parse_family(family)?,
            };
            Ok((young, c.a, c.b))
        }
        None => Ok((parse_family(family)?, MatrixSpec::identity(2), MatrixSpec::identity(2))),
    }
}

fn conjugate(family: &str, lo: f64, hi: f64, points: usize, common: &Common) -> Outcome {
    if !(lo > 0.0 && hi > lo && points >= 2) {
        return Err(Failure::Usage("need 0 < lo < hi and points >= 2".into()));
    }
    let pair = ConjugatePair::from_spec(parse_family(family)?)?;
    let mut csv = String::from("t,psi,psi_d1,legendre_sup,relative_deviation\n");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for t in log_grid(lo, hi, points) {
        let psi = pair.psi.try_eval(t)?;
        let sup = oracles::legendre_sup(|s| pair.phi.eval(s), t);
        let dev = (psi - sup).abs() / sup;
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
        csv.push_str(&format!("{t:e},{psi:e},{:e},{sup:e},{dev:e}\n", pair.psi.try_d1(t)?));
        rows.push(serde_json::json!({"t": t, "psi": psi, "legendre_sup": sup, "relative_deviation": dev}));
    }
    let report = MarginReport::new("conjugate.legendre_oracle", points, -worst, vec![], 1e-5);
    let json = serde_json::json!({"family": pair.describe(), "rows": rows, "report": report});
    println!("{}: max relative deviation from Legendre suprema {worst:e}", pair.describe());
    emit(common, "conjugate", &(serde_json::to_string_pretty(&json).unwrap() + "\n"), &csv)?;
    Ok(report.pass)
}

fn quantities(family: &str, common: &Common) -> Outcome {
    let spec = parse_family(family)?;
    let pair = ConjugatePair::from_spec(spec)?;
    let q = pair.quantities;
    println!(
        "(m, M, m~, M~) = ({}, {}, {}, {}), p = {}, D = {}",
        trim(q.m),
        trim(q.big_m),
        trim(q.m_tilde),
        trim(q.big_m_tilde),
        trim(q.p),
        trim(q.d)
    );
    let dual = verify_dual_quantities(&pair);
    let doubling = doubling_constants(&pair);
    let worst = dual.iter().map(|r| r.discrepancy.abs()).fold(0.0, f64::max);
    let report = MarginReport::new("quantities.dual_consistency", dual.len(), -worst, vec![], harness::scan_tolerance(&spec));
    let mut csv = String::from("quantity,computed,expected,discrepancy\n");
    for (name, v) in [("m", q.m), ("M", q.big_m), ("m_tilde", q.m_tilde), ("M_tilde", q.big_m_tilde), ("p", q.p), ("D", q.d)] {
        csv.push_str(&format!("{name},{v:e},,\n"));
    }
    for r in &dual {
        csv.push_str(&format!("{},{:e},{:e},{:e}\n", r.quantity, r.computed, r.expected, r.discrepancy));
    }
    let json = serde_json::json!({
        "family": pair.describe(),
        "quantities": q,
        "dual": dual,
        "doubling": doubling,
        "report": report,
    });
    emit(common, "quantities", &(serde_json::to_string_pretty(&json).unwrap() + "\n"), &csv)?;
    Ok(report.pass)
}

fn check_bellman(family: &str, config: Option<&Path>, mollified: usize, nu: f64, common: &Common) -> Outcome {
    let (young, a, b) = pair_config(family, config)?;
    let pair = ConjugatePair::from_spec(young)?;
    let ctx = BellmanContext::new(pair, a.build()?, b.build()?)?;
    let tctx = ctx.with_tables(1e-4, 1e4)?;
    let o = SampleOptions { samples: common.samples.unwrap_or(100_000), seed: common.seed.unwrap_or(0), ..Default::default() };
    let mut reports = vec![verify_upper_bound(&tctx, &o)];
    reports.extend(verify_gradient_bounds(&tctx, &o));
    reports.extend(verify_hessian_lower(&tctx, &o));
    if mollified > 0 {
        reports.extend(verify_mollified(&ctx, nu, mollified, o.seed ^ 0x66));
    }
    emit_reports(common, "check-bellman", reports)
}

fn check_ellipticity(family: &str, config: Option<&Path>, common: &Common) -> Outcome {
    let (young, a, b) = pair_config(family, config)?;
    let pair = ConjugatePair::from_spec(young)?;
    let (a, b) = (a.build()?, b.build()?);
    let seed = common.seed.unwrap_or(0);
    let samples = common.samples.unwrap_or(2000);
    let mut reports = Vec::new();
    let mut csv = String::from("constant,value\n");
    let constants = match EllipticityReport::compute(&a, &b, &pair) {
        Ok(r) => {
            for (k, v) in r.rows() {
                csv.push_str(&format!("{k},{v:e}\n"));
                println!("{k} = {v:e}");
            }
            Some(r)
        }
        Err(e) => {
            println!("{e}");
            reports.push(MarginReport::failed("ellipticity.p_elliptic", e.to_string()));
            None
        }
    };
    for (tag, m) in [("A", &a), ("B", &b)] {
        let r = cm_dissipativity_check(m, &pair, samples, seed)?;
        let mut margin = r.margin;
        margin.check = format!("ellipticity.dissipativity.{tag}");
        println!("{}", margin.csv_row());
        reports.push(margin);
    }
    let pass = reports.iter().all(|r| r.pass);
    let json = serde_json::json!({"constants": constants, "reports": reports});
    emit(common, "check-ellipticity", &(serde_json::to_string_pretty(&json).unwrap() + "\n"), &csv)?;
    Ok(pass)
}

fn embedding(config: &Path, common: &Common, full: bool) -> Outcome {
    let cfg: EmbeddingConfig = read_json(config)?;
    let run = verify_embedding(&cfg)?;
    println!("{}: {} on {}x{} grid", run.label, run.family, run.grid.n, run.grid.d);
    println!("lhs = {:e}, tail bound = {:e}, T_max = {:e}", run.lhs, run.tail_bound, run.t_max);
    if !full {
        let json = serde_json::json!({
            "label": run.label,
            "lhs": run.lhs,
            "tail_bound": run.tail_bound,
            "t_max": run.t_max,
            "grid": run.grid,
            "timings": run.timings,
        });
        emit(common, "simulate", &(serde_json::to_string_pretty(&json).unwrap() + "\n"), &run.time_series_csv())?;
        return Ok(true);
    }
    println!(
        "rhs homogeneous = {:e} (margin {:e}), rhs dehomogenized = {:e} (margin {:e})",
        run.rhs_homogeneous, run.margins.homogeneous, run.rhs_dehomogenized, run.margins.dehomogenized
    );
    for r in &run.heat_flow {
        println!("{}", r.csv_row());
    }
    let json = serde_json::to_string_pretty(&run).unwrap() + "\n";
    emit(common, "verify-embedding", &json, &run.time_series_csv())?;
    println!("{}", if run.pass { "PASS" } else { "FAIL" });
    Ok(run.pass)
}

fn suite(config: Option<&Path>, criterion: &[String], mollified: Option<usize>, common: &Common) -> Outcome {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(s) = common.samples {
        cfg.samples = s;
    }
    if let Some(s) = mollified {
        cfg.mollified_samples = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if !criterion.is_empty() {
        cfg.criteria = criterion.iter().map(|c| c.parse::<Criterion>()).collect::<Result<_, _>>()?;
    }
    let report = harness::run_suite(&cfg);
    for c in &report.criteria {
        println!(
            "{} {:<11} {:<28} {}/{} checks passed",
            if c.pass { "PASS" } else { "FAIL" },
            c.criterion.to_string(),
            c.title,
            c.checks - c.failed,
            c.checks
        );
    }
    for f in &report.failures {
        println!("failed: {f}");
    }
    let dir = cfg.out_dir(Path::new("orlicz-out"));
    let common = Common { out: Some(dir), ..common.clone() };
    emit(&common, "suite", &report.to_json(), &report.to_csv())?;
    Ok(report.pass)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Conjugate { family, lo, hi, points, common } => conjugate(&family, lo, hi, points, &common),
        Command::Quantities { family, common } => quantities(&family, &common),
        Command::CheckBellman { family, config, mollified_samples, nu, common } => {
            check_bellman(&family, config.as_deref(), mollified_samples, nu, &common)
        }
        Command::CheckHessian { family, common } => {
            let cfg = RunConfig {
                seed: common.seed.unwrap_or(0),
                families: vec![parse_family(&family)?],
                ..RunConfig::default()
            };
            emit_reports(&common, "check-hessian", criteria::c5_hessian(&cfg))
        }
        Command::CheckEllipticity { family, config, common } => check_ellipticity(&family, config.as_deref(), &common),
        Command::Simulate { config, common } => embedding(&config, &common, false),
        Command::VerifyEmbedding { config, common } => embedding(&config, &common, true),
        Command::Suite { config, criterion, mollified_samples, common } => {
            suite(config.as_deref(), &criterion, mollified_samples, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
