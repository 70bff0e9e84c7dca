use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adp_lqr_cli::config::{AlgorithmChoice, MatrixSpec};
use adp_lqr_cli::{output_root, run, sweep, verify, CliResult, ExperimentConfig, RunReport};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adp-lqr",
    version,
    about = "Data-driven output-feedback LQR experiments"
)]
struct Cli {
    /// Output root; defaults to $ADP_LQR_OUT or ./adp-lqr-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Check oracle and parameterization properties for a config.
    Verify { config: PathBuf },
    /// Run every *.toml config in a directory.
    Sweep {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn print_matrix(label: &str, spec: &Option<MatrixSpec>) {
    let Some(spec) = spec else { return };
    println!("{label} ({}x{}):", spec.rows, spec.cols);
    for row in spec.data.chunks(spec.cols.max(1)) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn print_report(report: &RunReport, dir: &Path) {
    println!(
        "{} [{}] status: {:?}",
        report.name, report.command, report.status
    );
    if let Some(err) = &report.error {
        println!("  error: {err}");
    }
    if report.config.algorithm == AlgorithmChoice::OracleOnly {
        if let Some(o) = &report.oracle {
            print_matrix("P*", &o.p);
            print_matrix("K*", &o.k);
            print_matrix("L", &o.l);
            print_matrix("M", &o.m);
        }
    }
    if let Some(w) = &report.window {
        println!(
            "  window: t0 = {}, spacing = {}, intervals = {}",
            w.t0, w.spacing, w.used_intervals
        );
    }
    if let Some(rank) = &report.rank {
        for e in &rank.entries {
            let mark = if e.satisfied { "ok" } else { "deficient" };
            println!(
                "  rank {:<12} {:>4} / {:<4} {mark}",
                e.condition, e.achieved, e.required
            );
        }
    }
    if let Some(it) = &report.iteration {
        println!(
            "  {}: {} iterations, converged = {}, resets = {}",
            it.algorithm, it.iterations, it.converged, it.resets
        );
        if let (Some(v), Some(g)) = (it.final_value_error, it.final_gain_error) {
            println!("  final normalized errors: value {v:.3e}, gain {g:.3e}");
        }
    }
    for w in &report.warnings {
        println!("  warning: {w}");
    }
    for c in &report.checks {
        println!(
            "  [{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("  artifacts: {}", dir.display());
}

fn single(config: &Path, out: &Path, verify_only: bool) -> CliResult<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let report = if verify_only {
        verify(&cfg, out)?
    } else {
        run(&cfg, out)?
    };
    print_report(&report, &out.join(cfg.output_subdir()));
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = output_root(cli.out);
    let outcome = match cli.command {
        Command::Run { config } => single(&config, &out, false),
        Command::Verify { config } => single(&config, &out, true),
        Command::Sweep { dir, jobs } => sweep(&dir, &out, jobs.max(1)).map(|results| {
            let mut all = true;
            for (path, result) in results {
                match result {
                    Ok(report) => {
                        let stem = path.file_stem().unwrap_or_default();
                        print_report(&report, &out.join(stem));
                        all &= report.passed;
                    }
                    Err(e) => {
                        println!("{}: {e}", path.display());
                        all = false;
                    }
                }
            }
            all
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
