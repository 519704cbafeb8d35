//! Command-line runner for the coupling experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use tfsi_core::harness::config::ExperimentConfig;
use tfsi_core::harness::experiments::{self, MatrixRow};
use tfsi_core::harness::{output, validate};
use tfsi_core::FsiError;

const EXIT_CONFIG: u8 = 1;
const EXIT_DNF: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "tfsi", version, about = "Partitioned thermal coupling experiments")]
struct Cli {
    /// Experiment configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Residual decay within the first stage, one curve per accelerator.
    StageStudy,
    /// Total fixed-point iterations per tolerance and method.
    Matrix,
    /// Adaptive steps against accuracy-matched fixed steps.
    FixedVsAdaptive,
    /// Analytic-oracle checks of the numerical building blocks.
    Validate,
    /// Stage study, matrix and (if enabled in the configuration) the fixed
    /// versus adaptive comparison.
    All,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl From<FsiError> for Failure {
    fn from(e: FsiError) -> Self {
        let code = match e {
            FsiError::Config(_) | FsiError::Parse { .. } => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Outcome {
    output::write_file(dir, name, contents)?;
    eprintln!("wrote {}", dir.join(name).display());
    Ok(())
}

fn stage_study(cfg: &ExperimentConfig) -> Outcome {
    let curves = experiments::run_stage_study(cfg)?;
    // one table per step size, each with the plain (method, iteration,
    // residual_norm) columns
    for &dt in &cfg.stage_study.dts {
        let of_dt: Vec<_> = curves.iter().filter(|c| c.dt == dt).cloned().collect();
        let mut csv = Vec::new();
        output::write_stage_csv(&of_dt, &mut csv)?;
        write(&cfg.output, &format!("stage_study_dt{dt}.csv"), &csv)?;
    }
    write(&cfg.output, "stage_study.dat", output::stage_gnuplot(&curves).as_bytes())?;
    for c in &curves {
        let state = if c.converged { "converged" } else { "not converged" };
        println!("dt={} {:<7} {:>4} iterations, {state}", c.dt, c.method.to_string(), c.residual_norms.len());
    }
    Ok(())
}

fn matrix(cfg: &ExperimentConfig) -> Outcome {
    let reference = experiments::optional_reference(cfg)?;
    if reference.is_none() {
        eprintln!("warning: reference run did not finish; end errors are left empty");
    }
    let rows: Vec<MatrixRow> = experiments::matrix_cells(cfg)
        .into_par_iter()
        .map(|cell| experiments::run_cell(cfg, cell, reference.as_deref()).map(|r| r.0))
        .collect::<Result<_, _>>()?;
    write(&cfg.output, "matrix.csv", output::matrix_csv_string(&rows)?.as_bytes())?;
    let summary = output::matrix_summary(&rows);
    write(&cfg.output, "matrix.txt", summary.as_bytes())?;
    print!("{summary}");
    let dnf = rows.iter().filter(|r| r.is_dnf()).count();
    if dnf > 0 {
        return Err(Failure { code: EXIT_DNF, msg: format!("{dnf} run(s) did not finish") });
    }
    Ok(())
}

fn fixed_vs_adaptive(cfg: &ExperimentConfig) -> Outcome {
    let rows = experiments::run_fixed_vs_adaptive(cfg)?;
    let mut csv = Vec::new();
    output::write_fixed_csv(&rows, &mut csv)?;
    write(&cfg.output, "fixed_vs_adaptive.csv", &csv)?;
    let summary = output::fixed_summary(&rows);
    write(&cfg.output, "fixed_vs_adaptive.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn run_validate(cfg: &ExperimentConfig) -> Outcome {
    let checks = validate::run_all(cfg.seed)?;
    let mut text = String::new();
    for c in &checks {
        let line = format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        print!("{line}");
        text.push_str(&line);
    }
    write(&cfg.output, "validate.txt", text.as_bytes())?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure { code: EXIT_CHECK_FAILED, msg: format!("{failed} check(s) failed") });
    }
    Ok(())
}

fn run_all(cfg: &ExperimentConfig) -> Outcome {
    stage_study(cfg)?;
    // a DNF cell should not stop the remaining study
    let matrix_outcome = matrix(cfg);
    if cfg.fixed_vs_adaptive {
        fixed_vs_adaptive(cfg)?;
    }
    matrix_outcome
}

fn dispatch(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure { code: EXIT_RUNTIME, msg: e.to_string() })?;
    }
    match cli.command {
        Command::StageStudy => stage_study(&cfg),
        Command::Matrix => matrix(&cfg),
        Command::FixedVsAdaptive => fixed_vs_adaptive(&cfg),
        Command::Validate => run_validate(&cfg),
        Command::All => run_all(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
