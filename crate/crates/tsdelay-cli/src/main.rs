//! Command-line front end: simulate trajectories, search for stability
//! certificates, verify shift axioms, and compare literature conditions.
//!
//! Exit codes: 0 success (or certificate found), 1 certificate not found or
//! axiom failure (reports are still written), 2 invalid configuration or
//! expression syntax, with a one-line diagnostic on standard error.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};
use tsdelay::shift::verify::{verify_axioms, SampleSpec};
use tsdelay::solver::{residual, solve};
use tsdelay::stability::{certify, check_literature_conditions};

#[derive(Parser)]
#[command(name = "tsdelay", version, about = "delay dynamic equations on time scales")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the delay problem and write the trajectory CSV.
    Simulate(CommonArgs),
    /// Search for a stability/instability certificate; write text + CSV.
    Certify(CommonArgs),
    /// Verify the shift-operator axioms by randomized sampling.
    Axioms(CommonArgs),
    /// Evaluate the literature comparison conditions.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (flat INI).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV and report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the certificate search (results are identical for
    /// any value).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the dense-regime solver step.
    #[arg(long)]
    real_step: Option<f64>,
    /// Override the axiom-sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(run(&argv));
}

/// Parses `argv` and executes one subcommand; returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Certify(a) => run_certify(a),
        Cmd::Axioms(a) => axioms(a),
        Cmd::Compare(a) => compare(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(String),
    #[error("{path}: {err}")]
    Write { path: String, err: String },
}

fn configure_jobs(args: &CommonArgs) {
    if let Some(n) = args.jobs {
        // ignore the error if a global pool already exists; results do not
        // depend on the worker count
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn write_out(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Write {
                path: path.display().to_string(),
                err: e.to_string(),
            })?;
        }
    }
    std::fs::write(path, content).map_err(|e| CliError::Write {
        path: path.display().to_string(),
        err: e.to_string(),
    })
}

fn simulate(args: &CommonArgs) -> Result<i32, CliError> {
    configure_jobs(args);
    let cfg = RunConfig::load(&args.config)?;
    let p = cfg.problem(args.real_step)?;
    let tr = solve(&p).map_err(|e| CliError::Solver(e.to_string()))?;
    let res = residual(&p, &tr).map_err(|e| CliError::Solver(e.to_string()))?;
    let path = cfg.out_path(&args.out, &cfg.output.trajectory);
    write_out(&path, &tr.to_csv())?;
    println!("trajectory: {} ({} points)", path.display(), tr.len());
    println!("residual: {res:?}");
    Ok(0)
}

fn run_certify(args: &CommonArgs) -> Result<i32, CliError> {
    configure_jobs(args);
    let cfg = RunConfig::load(&args.config)?;
    let p = cfg.problem(args.real_step)?;
    let tr = solve(&p).map_err(|e| CliError::Solver(e.to_string()))?;
    let cert = certify(&p, &tr, cfg.search.clone()).map_err(|e| CliError::Solver(e.to_string()))?;
    let text = cert.render();
    let csv = cert
        .to_csv(&p, &tr)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let text_path = cfg.out_path(&args.out, &cfg.output.certificate);
    let csv_path = cfg.out_path(&args.out, &cfg.output.certificate_csv);
    write_out(&text_path, &text)?;
    write_out(&csv_path, &csv)?;
    print!("{text}");
    println!("certificate: {}", text_path.display());
    println!("certificate csv: {}", csv_path.display());
    Ok(if cert.is_certified() { 0 } else { 1 })
}

fn axioms(args: &CommonArgs) -> Result<i32, CliError> {
    configure_jobs(args);
    let cfg = RunConfig::load(&args.config)?;
    let sampling = {
        let mut s = SampleSpec::new(cfg.axioms.horizon)
            .with_count(cfg.axioms.samples)
            .with_seed(args.seed.unwrap_or(cfg.axioms.seed));
        if let Some(h) = cfg.axioms.delay {
            s = s.with_delay(h);
        }
        s
    };
    let mut all_pass = true;
    let mut out = String::new();
    for name in &cfg.axioms.systems {
        let base = cfg.shift_system(name)?;
        let mut systems = vec![base.clone()];
        for &lam in &cfg.axioms.rebase {
            systems.push(
                base.rebase_initial_point(lam)
                    .map_err(|e| ConfigError::Build(e.to_string()))?,
            );
        }
        for sys in systems {
            let report = verify_axioms(&sys, &sampling).map_err(|e| CliError::Solver(e.to_string()))?;
            all_pass &= report.all_pass();
            let _ = write!(out, "{}", report.render());
        }
    }
    let path = cfg.out_path(&args.out, &cfg.output.report);
    write_out(&path, &out)?;
    print!("{out}");
    println!("report: {}", path.display());
    Ok(if all_pass { 0 } else { 1 })
}

fn compare(args: &CommonArgs) -> Result<i32, CliError> {
    configure_jobs(args);
    let cfg = RunConfig::load(&args.config)?;
    let p = cfg.problem(args.real_step)?;
    let step = cfg
        .compare_step
        .unwrap_or((p.horizon() - p.t0()) / 512.0);
    let grid = p
        .scale()
        .grid(p.t0(), p.horizon(), step)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let report = check_literature_conditions(&p, &cfg.literature, &grid)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let out = report.render();
    let path = cfg.out_path(&args.out, &cfg.output.report);
    write_out(&path, &out)?;
    print!("{out}");
    println!("report: {}", path.display());
    Ok(0)
}
