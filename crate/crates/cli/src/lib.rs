//! `sls` command-line tool: expected gain, feasible `K` region, critical
//! uncertainty, sample paths, ensembles and the theorem-vs-grid check.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sls_core::analytic::{expected_gain_recursion, expected_gain_two};
use sls_core::ensemble::run_ensemble;
use sls_core::rpe::{
    admissible_k_region, critical_uncertainty, critical_uncertainty_derivative, default_scan, ExtReal,
};
use sls_core::sim::run_path;
use sls_core::verify::{verify_theorem, VerifyConfig};
use sls_core::Horizon;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_EMPTY_REGION: i32 = 3;
pub const EXIT_OVERFLOW: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(sls_core::Error),
    Missing(&'static str),
    Config(String),
    Io(String),
}

impl From<sls_core::Error> for CliError {
    fn from(e: sls_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_overflow() => EXIT_OVERFLOW,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Missing(_) => "missing_parameter",
            CliError::Config(_) => "invalid_config",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Core(e) => e.to_string(),
            CliError::Missing(name) => format!("missing parameter `{name}`"),
            CliError::Config(m) | CliError::Io(m) => m.clone(),
        };
        serde_json::json!({ "error": self.kind(), "message": message }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sls",
    version,
    about = "Two-stock simultaneous long-short controller toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form expected gain against the stage recursion.
    Expect,
    /// Feasible feedback parameters K for the uncertainty set.
    Region,
    /// Critical uncertainty bound at (theta, n).
    Epsc,
    /// One sample path, written as CSV.
    Simulate,
    /// Monte Carlo statistics over the admissible market family.
    Ensemble,
    /// Randomized check of the feasibility test against a grid search.
    Verify,
}

/// Flags override values from `--config`.
#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub k: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu1: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Worker threads for parallel subcommands; defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl Flags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = Some(v); } )* };
        }
        set!(seed, paths, k, mu1, eps, theta, n);
    }
}

/// What a subcommand produced: the stdout document, files for `--out` and the exit code.
#[derive(Debug)]
pub struct Report {
    pub stdout: String,
    pub files: Vec<(&'static str, String)>,
    pub code: i32,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report {
            stdout,
            files: Vec::new(),
            code: EXIT_OK,
        }
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[derive(Serialize)]
struct ExpectOut {
    closed_form: f64,
    recursion: f64,
    abs_diff: f64,
}

pub fn cmd_expect(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = cfg.controller()?;
    let n = cfg.horizon()?;
    let (mu_1, eps) = (cfg.mu1()?, cfg.eps()?);
    if !(eps >= 0.0) {
        return Err(sls_core::Error::NegativeEpsMax(eps).into());
    }
    let closed_form = expected_gain_two(&params, mu_1, eps, n)?;
    let mu_2 = (1.0 + eps) * params.beta_0() * mu_1;
    let recursion = expected_gain_recursion(&params, mu_1, mu_2, n.n())?;
    let doc = output::to_json(&ExpectOut {
        closed_form,
        recursion,
        abs_diff: (closed_form - recursion).abs(),
    });
    let mut r = Report::ok(doc.clone());
    r.files.push(("expect.json", doc));
    Ok(r)
}

#[derive(Serialize)]
struct RegionOut<'a> {
    empty: bool,
    #[serde(flatten)]
    region: &'a sls_core::rpe::KRegion,
}

pub fn cmd_region(cfg: &RunConfig, workers: Option<usize>) -> Result<Report, CliError> {
    let set = cfg.uncertainty()?;
    let n = cfg.horizon()?;
    let i0 = cfg.i0.unwrap_or(1.0);
    let (default_max, default_step) = default_scan(&set);
    let k_max = cfg.k_max_scan.unwrap_or(default_max);
    let step = cfg.k_step.unwrap_or(if cfg.k_max_scan.is_some() {
        k_max / 1e4
    } else {
        default_step
    });
    let region = with_workers(workers, || admissible_k_region(&set, i0, n, k_max, step))?;
    let doc = output::to_json(&RegionOut {
        empty: region.is_empty(),
        region: &region,
    });
    Ok(Report {
        stdout: doc.clone(),
        files: vec![("region.json", doc), ("region.csv", output::region_csv(&region))],
        code: if region.is_empty() { EXIT_EMPTY_REGION } else { EXIT_OK },
    })
}

#[derive(Serialize)]
struct EpscOut {
    theta: f64,
    n: u32,
    eps_c: ExtReal,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_c_prime: Option<f64>,
}

pub fn cmd_epsc(cfg: &RunConfig) -> Result<Report, CliError> {
    let theta = cfg.theta()?;
    if !theta.is_finite() {
        return Err(CliError::Config(format!("theta must be finite, got {theta}")));
    }
    let n = cfg.horizon()?;
    let eps_c = critical_uncertainty(theta, n);
    let eps_c_prime = if eps_c.is_infinite() {
        None
    } else {
        critical_uncertainty_derivative(theta, n).ok()
    };
    let doc = output::to_json(&EpscOut {
        theta,
        n: n.n(),
        eps_c,
        eps_c_prime,
    });
    let mut r = Report::ok(doc.clone());
    r.files.push(("epsc.json", doc));
    Ok(r)
}

#[derive(Serialize)]
struct SimulateOut {
    seed: u64,
    rows: usize,
    final_gain: f64,
    final_return: f64,
    price_floor_hit: bool,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.seed()?;
    let gbm = cfg.gbm()?;
    let path = run_path(&gbm, &cfg.controller()?, &cfg.leverage()?, cfg.horizon()?, seed)?;
    let doc = output::to_json(&SimulateOut {
        seed,
        rows: path.records.len(),
        final_gain: path.final_gain(),
        final_return: path.final_return,
        price_floor_hit: path.price_floor_hit,
    });
    Ok(Report {
        stdout: doc.clone(),
        files: vec![
            ("path_summary.json", doc),
            ("path.csv", output::path_csv(&path.records)),
        ],
        code: EXIT_OK,
    })
}

pub fn cmd_ensemble(cfg: &RunConfig, workers: Option<usize>) -> Result<Report, CliError> {
    let config = cfg.ensemble()?;
    let out = run_ensemble(&config, workers)?;
    let doc = output::to_json(&out.stats);
    Ok(Report {
        stdout: doc.clone(),
        files: vec![
            ("stats.json", doc),
            ("histogram.csv", output::histogram_csv(&out.histogram)),
        ],
        code: EXIT_OK,
    })
}

pub fn cmd_verify(cfg: &RunConfig, workers: Option<usize>) -> Result<Report, CliError> {
    let horizons = match (cfg.n, &cfg.verify_horizons) {
        (Some(n), _) => vec![n],
        (None, Some(h)) => h.clone(),
        (None, None) => (2..=10).collect(),
    };
    let config = VerifyConfig::new(
        horizons,
        cfg.verify_sets.unwrap_or(20),
        cfg.verify_ks.unwrap_or(50),
        cfg.seed.unwrap_or(0),
    )?;
    let report = with_workers(workers, || verify_theorem(&config))?;
    let doc = output::to_json(&report);
    Ok(Report {
        stdout: doc.clone(),
        files: vec![("verify.json", doc)],
        code: if report.passed() { EXIT_OK } else { EXIT_FAILED_CHECK },
    })
}

/// Resolves the configuration, runs the subcommand and writes any files.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let mut cfg = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.flags.apply(&mut cfg);
    if let Some(n) = cfg.n {
        Horizon::new(n)?;
    }
    let workers = cli.flags.workers;
    let report = match cli.command {
        Command::Expect => cmd_expect(&cfg),
        Command::Region => cmd_region(&cfg, workers),
        Command::Epsc => cmd_epsc(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Ensemble => cmd_ensemble(&cfg, workers),
        Command::Verify => cmd_verify(&cfg, workers),
    }?;
    if let Some(dir) = &cli.flags.out {
        output::write_file(dir, "effective_config.json", &cfg.to_json())?;
        for (name, contents) in &report.files {
            output::write_file(dir, name, contents)?;
        }
    }
    Ok(report)
}

/// Runs the tool on already-parsed arguments and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(report) => {
            println!("{}", report.stdout);
            report.code
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
