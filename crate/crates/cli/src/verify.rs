//! `verify`: model-side properties of the oracle and the parameterization,
//! repeated over seeded draws when the plant is random.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use adp_lqr::adp::Algorithm;
use adp_lqr::linalg::{norm2, normalized_error};
use adp_lqr::observer::has_full_row_rank;
use adp_lqr::riccati::solve_are_sign;
use adp_lqr::Error;

use crate::artifacts::ArtifactDir;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, PhaseContext};
use crate::pipeline::{ancillary_problem, write_report_files, Oracle};
use crate::report::{Check, RunReport, Status};
use crate::setup::resolve;

/// Residual bound for the parameterization identities.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Bound on the oracle's residual relative to the size of the Riccati terms.
pub const ORACLE_TOL: f64 = 1e-8;
/// Relative residual bound for `M' P* M` in the ancillary equation.
pub const ANCILLARY_TOL: f64 = 1e-6;
/// Relative tolerance for `rank M = n`.
pub const M_RANK_TOL: f64 = 1e-10;

/// Worst value of each metric across trials.
#[derive(Default)]
struct Worst {
    oracle: f64,
    identities: [f64; 3],
    m_rank_failures: usize,
    not_stabilizable: usize,
    not_detectable: usize,
    ancillary: f64,
    gain_identity: f64,
    reduction_mismatch: usize,
    errors: Vec<String>,
}

impl Worst {
    fn bump(slot: &mut f64, v: f64) {
        // NaN must stick
        if v.is_nan() || v > *slot {
            *slot = v;
        }
    }
}

pub fn verify(cfg: &ExperimentConfig, out_root: &Path) -> CliResult<RunReport> {
    cfg.validate()?;
    let mut dir = ArtifactDir::create(&out_root.join(cfg.output_subdir()))?;
    let mut report = RunReport::new("verify", cfg);
    let echo = cfg.to_toml()?;
    dir.write("config.toml", |w| w.write_all(echo.as_bytes()))?;
    let start = Instant::now();
    let trials = cfg.suite.as_ref().map_or(1, |s| s.trials);
    let mut worst = Worst::default();
    let mut has_observer = false;
    for trial in 0..trials as u64 {
        match verify_one(cfg, trial, &mut worst, &mut report) {
            Ok(observer) => has_observer |= observer,
            Err(e @ CliError::Config(_)) => return Err(e),
            Err(e) => worst.errors.push(format!("trial {trial}: {e}")),
        }
    }
    report
        .timings
        .insert("total".into(), start.elapsed().as_secs_f64());
    let label = |name: &str| {
        format!(
            "{name} ({trials} trial{})",
            if trials == 1 { "" } else { "s" }
        )
    };
    if !worst.errors.is_empty() {
        report.status = Status::Failed;
        report.error = Some(worst.errors.join("; "));
        report
            .checks
            .push(Check::new("pipeline", false, worst.errors.join("; ")));
    }
    report.checks.push(Check::at_most(
        label("oracle_are_residual"),
        worst.oracle,
        ORACLE_TOL,
    ));
    if has_observer {
        let [sim, inp, out] = worst.identities;
        report.checks.push(Check::at_most(
            label("identity_similarity"),
            sim,
            IDENTITY_TOL,
        ));
        report
            .checks
            .push(Check::at_most(label("identity_input"), inp, IDENTITY_TOL));
        report
            .checks
            .push(Check::at_most(label("identity_output"), out, IDENTITY_TOL));
        report.checks.push(Check::new(
            label("m_full_row_rank"),
            worst.m_rank_failures == 0,
            format!("{} failures", worst.m_rank_failures),
        ));
        report.checks.push(Check::new(
            label("ancillary_stabilizable"),
            worst.not_stabilizable == 0,
            format!("{} failures", worst.not_stabilizable),
        ));
        report.checks.push(Check::new(
            label("ancillary_detectable"),
            worst.not_detectable == 0,
            format!("{} failures", worst.not_detectable),
        ));
        report.checks.push(Check::at_most(
            label("ancillary_are_residual"),
            worst.ancillary,
            ANCILLARY_TOL,
        ));
        report.checks.push(Check::at_most(
            label("ancillary_gain_identity"),
            worst.gain_identity,
            ANCILLARY_TOL,
        ));
        report.checks.push(Check::new(
            label("unknown_reduction"),
            worst.reduction_mismatch == 0,
            format!("{} mismatches", worst.reduction_mismatch),
        ));
    }
    report.finish();
    write_report_files(&mut dir, &mut report)?;
    Ok(report)
}

/// Returns whether this trial had an observer to check.
fn verify_one(
    cfg: &ExperimentConfig,
    trial: u64,
    worst: &mut Worst,
    report: &mut RunReport,
) -> CliResult<bool> {
    let res = resolve(cfg, trial)?;
    let problem = res.are_problem()?;
    let sol = solve_are_sign(&problem).phase("oracle")?;
    Worst::bump(&mut worst.oracle, problem.relative_residual(&sol.p));
    // the report describes the first draw only
    let mut scratch = RunReport::new("verify", cfg);
    let target = if trial == 0 { report } else { &mut scratch };
    if res.poly.is_none() {
        Oracle::build(&res, target)?;
        return Ok(false);
    }
    let oracle = match Oracle::build(&res, target) {
        Ok(o) => o,
        Err(CliError::Phase {
            source: Error::PolynomialGainMismatch { residual },
            ..
        }) => {
            // an inconsistent L shows up as an identity failure
            Worst::bump(&mut worst.identities[2], residual);
            return Ok(true);
        }
        Err(e) => return Err(e),
    };
    let par = oracle.par.as_ref().expect("observer configured");
    let ids = par.identities(&res.plant);
    Worst::bump(&mut worst.identities[0], ids.similarity);
    Worst::bump(&mut worst.identities[1], ids.input);
    Worst::bump(&mut worst.identities[2], ids.output);
    if !has_full_row_rank(&par.m, M_RANK_TOL) {
        worst.m_rank_failures += 1;
    }
    worst.not_stabilizable += usize::from(!par.ancillary.stabilizable);
    worst.not_detectable += usize::from(!par.ancillary.detectable);
    let (p_zeta, k_zeta) = oracle.zeta.as_ref().expect("observer configured");
    let anc = ancillary_problem(par, &res)?;
    Worst::bump(
        &mut worst.ancillary,
        anc.residual_norm(p_zeta) / (1.0 + norm2(p_zeta)),
    );
    Worst::bump(
        &mut worst.gain_identity,
        normalized_error(&anc.gain(p_zeta), k_zeta),
    );
    let (m, n_zeta) = (res.plant.m(), par.n_zeta());
    let original = Algorithm::OutputPi.layout(n_zeta, m).unknowns();
    let improved = Algorithm::ImprovedPi.layout(n_zeta, m).unknowns();
    if original - improved != m * n_zeta {
        worst.reduction_mismatch += 1;
    }
    Ok(true)
}
