//! `run`: simulate, stack, gate on rank, iterate, compare with the oracle
//! and write artifacts.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use adp_lqr::adp::{
    output_pi_improved, output_pi_original, output_vi_improved, output_vi_original, state_pi,
    state_vi, AdpResult, PiOptions, ViOptions,
};
use adp_lqr::linalg::normalized_error;
use adp_lqr::observer::Parameterization;
use adp_lqr::riccati::{
    kleinman_pi, model_vi, solve_are_sign, AreProblem, BoundSchedule, IterateHistory, StepSize,
    ViSchedule,
};
use adp_lqr::sim::{simulate, Trajectory};
use adp_lqr::stacks::{DataStacks, RankCondition, SampleGrid, StackKind, DEFAULT_RANK_TOL};
use adp_lqr::Error;
use nalgebra::{DMatrix, DVector};

use crate::artifacts::{self, ArtifactDir};
use crate::config::{
    vector, AlgorithmChoice, Expectation, ExperimentConfig, MatrixSpec, ModelSystem,
};
use crate::error::{CliError, CliResult, PhaseContext};
use crate::report::{
    Check, IterationSummary, OracleSummary, RankSummary, RunReport, Status, WindowSummary,
    RUNTIME_CHECK,
};
use crate::setup::{exploration_signal, resolve, Resolved};

/// Oracle quantities shared by every algorithm.
pub struct Oracle {
    pub problem: AreProblem,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub par: Option<Parameterization>,
    /// `(M' P* M, K* M)` when an observer is configured.
    pub zeta: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Oracle {
    pub fn build(res: &Resolved, report: &mut RunReport) -> CliResult<Self> {
        let problem = res.are_problem()?;
        let sol = solve_are_sign(&problem).phase("oracle")?;
        let mut summary = OracleSummary {
            p: Some(MatrixSpec::from_matrix(&sol.p)),
            k: Some(MatrixSpec::from_matrix(&sol.k)),
            are_residual: Some(problem.residual_norm(&sol.p)),
            ..Default::default()
        };
        let par = match &res.poly {
            Some(poly) => Some(
                Parameterization::build(&res.plant, &res.cost, poly, res.explicit_l.clone())
                    .phase("parameterization")?,
            ),
            None => None,
        };
        let zeta = match &par {
            Some(par) => {
                let p_zeta = par.m.transpose() * &sol.p * &par.m;
                let p_zeta = (&p_zeta + p_zeta.transpose()) * 0.5;
                let k_zeta = &sol.k * &par.m;
                summary.l = Some(MatrixSpec::from_matrix(&par.l));
                summary.m = Some(MatrixSpec::from_matrix(&par.m));
                summary.p_zeta = Some(MatrixSpec::from_matrix(&p_zeta));
                summary.k_zeta = Some(MatrixSpec::from_matrix(&k_zeta));
                summary.ancillary_residual =
                    Some(ancillary_problem(par, res)?.residual_norm(&p_zeta));
                report.warnings.extend(par.warnings.iter().cloned());
                Some((p_zeta, k_zeta))
            }
            None => None,
        };
        report.oracle = Some(summary);
        Ok(Self {
            problem,
            p: sol.p,
            k: sol.k,
            par,
            zeta,
        })
    }

    fn par(&self) -> CliResult<&Parameterization> {
        self.par
            .as_ref()
            .ok_or_else(|| CliError::Config("this algorithm needs an [observer] section".into()))
    }

    fn zeta_reference(&self) -> CliResult<(&DMatrix<f64>, &DMatrix<f64>)> {
        let (p, k) = self
            .zeta
            .as_ref()
            .ok_or_else(|| CliError::Config("this algorithm needs an [observer] section".into()))?;
        Ok((p, k))
    }
}

pub fn ancillary_problem(par: &Parameterization, res: &Resolved) -> CliResult<AreProblem> {
    let anc = &par.ancillary;
    AreProblem::new(
        anc.a_zeta.clone(),
        anc.b_zeta.clone(),
        anc.q_zeta.clone(),
        res.cost.r.clone(),
    )
    .phase("parameterization")
}

fn vi_schedule(cfg: &ExperimentConfig) -> ViSchedule {
    let s = &cfg.vi.step;
    let step = if s.exponent == 1.0 {
        StepSize::Harmonic {
            scale: s.scale,
            offset: s.offset,
        }
    } else {
        StepSize::Power {
            scale: s.scale,
            offset: s.offset,
            exponent: s.exponent,
        }
    };
    ViSchedule::new(
        step,
        BoundSchedule::Linear {
            base: cfg.vi.bound_base,
        },
        cfg.vi.tol,
        cfg.vi.max_iters,
    )
    .with_required_hits(cfg.vi.required_hits)
}

fn initial_gain(cfg: &ExperimentConfig, m: usize, dim: usize) -> CliResult<DMatrix<f64>> {
    match &cfg.pi.k0 {
        Some(spec) => {
            let k0 = spec.to_matrix("pi.k0")?;
            if k0.shape() != (m, dim) {
                return Err(CliError::Config(format!("pi.k0 must be {m}x{dim}")));
            }
            Ok(k0)
        }
        None => Ok(DMatrix::zeros(m, dim)),
    }
}

fn initial_value(cfg: &ExperimentConfig, dim: usize) -> CliResult<DMatrix<f64>> {
    match &cfg.vi.p0 {
        Some(spec) => {
            let p0 = spec.to_matrix("vi.p0")?;
            if p0.shape() != (dim, dim) {
                return Err(CliError::Config(format!("vi.p0 must be {dim}x{dim}")));
            }
            Ok(p0)
        }
        None => Ok(DMatrix::identity(dim, dim)),
    }
}

/// Times `f` and records the phase.
fn timed<T>(report: &mut RunReport, phase: &str, f: impl FnOnce(&mut RunReport) -> T) -> T {
    let start = Instant::now();
    let out = f(report);
    *report.timings.entry(phase.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
    out
}

/// Iterates and their errors, whatever produced them.
struct Outcome {
    history: IterateHistory,
    unknowns: Option<usize>,
    reference: (DMatrix<f64>, DMatrix<f64>),
}

/// Executes `run` for one config and writes artifacts under
/// `out_root/<output_subdir>`. Numerical failures end up in the report;
/// only configuration and I/O problems are returned as errors.
pub fn run(cfg: &ExperimentConfig, out_root: &Path) -> CliResult<RunReport> {
    cfg.validate()?;
    let mut dir = ArtifactDir::create(&out_root.join(cfg.output_subdir()))?;
    let mut report = RunReport::new("run", cfg);
    let echo = cfg.to_toml()?;
    dir.write("config.toml", |w| w.write_all(echo.as_bytes()))?;
    let start = Instant::now();
    let outcome = execute(cfg, &mut report, &mut dir);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e @ (CliError::Io { .. } | CliError::Config(_))) => return Err(e),
        Err(e) => {
            report.status = Status::Failed;
            report.error = Some(e.to_string());
            None
        }
    };
    if let Some(o) = &outcome {
        let errors = artifacts::iterate_errors(&o.history, Some((&o.reference.0, &o.reference.1)));
        dir.write("history.csv", |w| {
            artifacts::write_history(w, &o.history, &errors)
        })?;
        if !errors.is_empty() {
            let title = format!("{} ({})", cfg.name, cfg.algorithm);
            artifacts::plot_errors(&dir.path().join("errors.svg"), &title, &errors)?;
            dir.note("errors.svg");
        }
        let final_p = o.history.final_p.clone();
        let final_gain = o.history.final_gain.clone();
        report.iteration = Some(IterationSummary {
            algorithm: cfg.algorithm.name().to_string(),
            unknowns: o.unknowns,
            iterations: o.history.iterations(),
            converged: o.history.converged,
            resets: o.history.resets,
            final_value_error: Some(normalized_error(&final_p, &o.reference.0)),
            final_gain_error: Some(normalized_error(&final_gain, &o.reference.1)),
            final_p: MatrixSpec::from_matrix(&final_p),
            final_gain: MatrixSpec::from_matrix(&final_gain),
        });
    }
    report
        .timings
        .insert("total".into(), start.elapsed().as_secs_f64());
    add_outcome_checks(cfg, &mut report);
    report.finish();
    write_report_files(&mut dir, &mut report)?;
    Ok(report)
}

pub(crate) fn write_report_files(dir: &mut ArtifactDir, report: &mut RunReport) -> CliResult<()> {
    let mut matrices: Vec<(String, DMatrix<f64>)> = Vec::new();
    if let Some(o) = &report.oracle {
        let named = [
            ("p_star", &o.p),
            ("k_star", &o.k),
            ("l", &o.l),
            ("m", &o.m),
            ("p_zeta", &o.p_zeta),
            ("k_zeta", &o.k_zeta),
        ];
        for (name, spec) in named {
            if let Some(spec) = spec {
                matrices.push((name.to_string(), spec.to_matrix(name)?));
            }
        }
    }
    if let Some(it) = &report.iteration {
        matrices.push(("final_p".into(), it.final_p.to_matrix("final_p")?));
        matrices.push(("final_gain".into(), it.final_gain.to_matrix("final_gain")?));
    }
    if !matrices.is_empty() {
        let named: Vec<(&str, &DMatrix<f64>)> =
            matrices.iter().map(|(n, m)| (n.as_str(), m)).collect();
        dir.write("matrices.csv", |w| artifacts::write_matrices(w, &named))?;
    }
    dir.note("summary.csv");
    dir.note("report.json");
    report.artifacts = dir.manifest();
    let snapshot = report.clone();
    dir.write("summary.csv", |w| artifacts::write_summary(w, &snapshot))?;
    let json = serde_json::to_string_pretty(&snapshot)?;
    dir.write("report.json", |w| w.write_all(json.as_bytes()))?;
    Ok(())
}

fn execute(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    dir: &mut ArtifactDir,
) -> CliResult<Option<Outcome>> {
    let res = resolve(cfg, 0)?;
    let oracle = timed(report, "oracle", |r| Oracle::build(&res, r))?;
    oracle_checks(cfg, &oracle, report)?;
    match cfg.algorithm {
        AlgorithmChoice::OracleOnly => Ok(None),
        AlgorithmChoice::ModelKleinman | AlgorithmChoice::ModelVi => {
            let (prob, reference) = match cfg.model_system {
                ModelSystem::Plant => {
                    (oracle.problem.clone(), (oracle.p.clone(), oracle.k.clone()))
                }
                ModelSystem::Ancillary => {
                    let (p, k) = oracle.zeta_reference()?;
                    (
                        ancillary_problem(oracle.par()?, &res)?,
                        (p.clone(), k.clone()),
                    )
                }
            };
            let history = timed(report, "iteration", |_| {
                if cfg.algorithm == AlgorithmChoice::ModelKleinman {
                    let k0 = initial_gain(cfg, prob.m(), prob.n())?;
                    kleinman_pi(&prob, &k0, cfg.pi.tol, cfg.pi.max_iters).phase("iteration")
                } else {
                    let p0 = initial_value(cfg, prob.n())?;
                    model_vi(&prob, &p0, &vi_schedule(cfg)).phase("iteration")
                }
            })?;
            Ok(Some(Outcome {
                history,
                unknowns: None,
                reference,
            }))
        }
        _ => data_driven(cfg, &res, &oracle, report, dir),
    }
}

fn data_driven(
    cfg: &ExperimentConfig,
    res: &Resolved,
    oracle: &Oracle,
    report: &mut RunReport,
    dir: &mut ArtifactDir,
) -> CliResult<Option<Outcome>> {
    let sim = cfg.simulation.as_ref().expect("validated");
    let win = cfg.window.as_ref().expect("validated");
    let plant = &res.plant;
    let (n, m) = (plant.n(), plant.m());
    let state_based = cfg.algorithm.is_state_based();
    let par = if state_based {
        None
    } else {
        Some(oracle.par()?)
    };
    let n_zeta = par.map_or(0, |p| p.n_zeta());
    let signal = exploration_signal(&cfg.signal, m, n, n_zeta)?;
    let zeta0 = match &sim.zeta0 {
        Some(z) => vector(z, n_zeta, "simulation.zeta0")?,
        None => DVector::zeros(n_zeta),
    };
    let x0 = match (&sim.x0, sim.start_on_manifold) {
        (_, true) => {
            let par = par.ok_or_else(|| {
                CliError::Config("start_on_manifold needs an output algorithm".into())
            })?;
            &par.m * &zeta0
        }
        (Some(x), false) => vector(x, n, "simulation.x0")?,
        (None, false) => DVector::from_element(n, 1.0),
    };
    let t_end = win.t0 + win.spacing * win.cap() as f64;
    let traj = timed(report, "simulation", |_| {
        simulate(
            plant,
            par.map(|p| &p.compensator),
            &signal,
            &x0,
            &zeta0,
            sim.t_start,
            t_end,
            sim.dt,
        )
    });
    let traj = match traj {
        Ok(t) => t,
        Err(Error::Divergence {
            time,
            norm,
            partial,
        }) => {
            dir.write("trajectory.csv", |w| partial.write_csv(w))?;
            return Err(CliError::Phase {
                phase: "simulation",
                source: Error::Divergence {
                    time,
                    norm,
                    partial,
                },
            });
        }
        Err(e) => {
            return Err(CliError::Phase {
                phase: "simulation",
                source: e,
            })
        }
    };
    dir.write("trajectory.csv", |w| traj.write_csv(w))?;

    let kind = if state_based {
        StackKind::State
    } else {
        StackKind::Output
    };
    let condition = rank_condition(cfg.algorithm);
    let (stacks, used) = timed(report, "stacks", |_| {
        collect_window(cfg, &traj, &res.cost.r, kind, condition)
    })?;
    let rank = stacks.rank_report(DEFAULT_RANK_TOL);
    let summary = RankSummary::from(&rank);
    dir.write("rank.csv", |w| artifacts::write_rank(w, &summary))?;
    report.rank = Some(summary);
    report.window = Some(WindowSummary {
        t0: win.t0,
        spacing: win.spacing,
        configured_intervals: win.intervals,
        used_intervals: used,
    });
    let entry = stacks.check(condition, DEFAULT_RANK_TOL);
    if !entry.satisfied {
        report.status = Status::RankDeficient;
        report.error = Some(format!(
            "rank condition '{}' not satisfied: rank {} < {}",
            condition.name(),
            entry.achieved,
            entry.required
        ));
        return Ok(None);
    }

    let r = &res.cost.r;
    let q_y = &res.cost.q_y;
    let dim = if state_based { n } else { n_zeta };
    let pi_opts = PiOptions::new(cfg.pi.tol, cfg.pi.max_iters);
    let vi_opts = ViOptions::new(vi_schedule(cfg));
    let result: AdpResult = timed(report, "iteration", |_| -> CliResult<AdpResult> {
        let out = match cfg.algorithm {
            AlgorithmChoice::StatePi => state_pi(
                &stacks,
                &res.state_q,
                r,
                &initial_gain(cfg, m, dim)?,
                &pi_opts,
            ),
            AlgorithmChoice::StateVi => state_vi(
                &stacks,
                &res.state_q,
                r,
                &initial_value(cfg, dim)?,
                &vi_opts,
            ),
            AlgorithmChoice::OutputPi => {
                output_pi_original(&stacks, q_y, r, &initial_gain(cfg, m, dim)?, &pi_opts)
            }
            AlgorithmChoice::OutputVi => {
                output_vi_original(&stacks, q_y, r, &initial_value(cfg, dim)?, &vi_opts)
            }
            AlgorithmChoice::ImprovedPi => {
                let b_zeta = &par.expect("output algorithm").ancillary.b_zeta;
                output_pi_improved(
                    &stacks,
                    q_y,
                    r,
                    b_zeta,
                    &initial_gain(cfg, m, dim)?,
                    &pi_opts,
                )
            }
            AlgorithmChoice::ImprovedVi => {
                let b_zeta = &par.expect("output algorithm").ancillary.b_zeta;
                output_vi_improved(&stacks, q_y, r, b_zeta, &initial_value(cfg, dim)?, &vi_opts)
            }
            _ => unreachable!("model algorithms do not use data"),
        };
        out.phase("iteration")
    })?;
    let reference = if state_based {
        (oracle.p.clone(), oracle.k.clone())
    } else {
        let (p, k) = oracle.zeta_reference()?;
        (p.clone(), k.clone())
    };
    if let Some(tol) = cfg.checks.model_match_tol {
        let check = timed(report, "model_match", |_| {
            model_match(cfg, res, oracle, &result.history, tol)
        })?;
        report.checks.push(check);
    }
    Ok(Some(Outcome {
        unknowns: Some(result.layout.unknowns()),
        history: result.history,
        reference,
    }))
}

fn rank_condition(alg: AlgorithmChoice) -> RankCondition {
    match alg {
        AlgorithmChoice::StatePi => RankCondition::StatePi,
        AlgorithmChoice::StateVi => RankCondition::StateVi,
        AlgorithmChoice::OutputPi => RankCondition::OutputPi,
        AlgorithmChoice::OutputVi => RankCondition::OutputVi,
        AlgorithmChoice::ImprovedPi => RankCondition::ImprovedPi,
        AlgorithmChoice::ImprovedVi => RankCondition::ImprovedVi,
        _ => unreachable!("model algorithms have no rank condition"),
    }
}

/// Builds stacks on the configured window. In auto mode, knots are appended
/// one at a time until `condition` holds or the cap is reached.
fn collect_window(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    r: &DMatrix<f64>,
    kind: StackKind,
    condition: RankCondition,
) -> CliResult<(DataStacks, usize)> {
    let win = cfg.window.as_ref().expect("validated");
    let mut intervals = win.intervals;
    loop {
        let grid = SampleGrid::uniform(win.t0, win.spacing, intervals).phase("stacks")?;
        let stacks = DataStacks::build(traj, &grid, r, kind).phase("stacks")?;
        if intervals >= win.cap() || stacks.check(condition, DEFAULT_RANK_TOL).satisfied {
            return Ok((stacks, intervals));
        }
        intervals += 1;
    }
}

/// Largest normalized gap between data-driven iterates and the model-based
/// iteration started from the same point, over the first steps.
fn model_match(
    cfg: &ExperimentConfig,
    res: &Resolved,
    oracle: &Oracle,
    data: &IterateHistory,
    tol: f64,
) -> CliResult<Check> {
    let steps = cfg.checks.model_match_steps.unwrap_or(5);
    let prob = if cfg.algorithm.is_state_based() {
        oracle.problem.clone()
    } else {
        ancillary_problem(oracle.par()?, res)?
    };
    let model = if cfg.algorithm.is_pi() {
        let k0 = initial_gain(cfg, prob.m(), prob.n())?;
        kleinman_pi(&prob, &k0, cfg.pi.tol, cfg.pi.max_iters).phase("model_match")?
    } else {
        let p0 = initial_value(cfg, prob.n())?;
        model_vi(&prob, &p0, &vi_schedule(cfg)).phase("model_match")?
    };
    let compared = steps.min(data.records.len()).min(model.records.len());
    if compared == 0 {
        return Ok(Check::new("model_match", false, "no iterates to compare"));
    }
    let worst = data.records[..compared]
        .iter()
        .zip(&model.records[..compared])
        .map(|(d, m)| normalized_error(&d.p, &m.p).max(normalized_error(&d.gain, &m.gain)))
        .fold(0.0, f64::max);
    let mut check = Check::at_most("model_match", worst, tol);
    check.detail = format!("first {compared} iterates: {}", check.detail);
    Ok(check)
}

fn oracle_checks(cfg: &ExperimentConfig, oracle: &Oracle, report: &mut RunReport) -> CliResult<()> {
    let tol = cfg.checks.expected_tol.unwrap_or(5e-4);
    let expected = [
        ("expected_p", &cfg.checks.expected_p, Some(&oracle.p)),
        ("expected_k", &cfg.checks.expected_k, Some(&oracle.k)),
        (
            "expected_l",
            &cfg.checks.expected_l,
            oracle.par.as_ref().map(|p| &p.l),
        ),
    ];
    for (name, spec, actual) in expected {
        let Some(spec) = spec else { continue };
        let want = spec.to_matrix(name)?;
        let check = match actual {
            Some(got) if got.shape() == want.shape() => {
                Check::at_most(name, (got - &want).amax(), tol)
            }
            Some(got) => Check::new(
                name,
                false,
                format!("shape {:?} vs expected {:?}", got.shape(), want.shape()),
            ),
            None => Check::new(name, false, "no observer configured"),
        };
        report.checks.push(check);
    }
    if cfg.algorithm == AlgorithmChoice::OracleOnly {
        report.checks.push(Check::at_most(
            "oracle_are_residual",
            oracle.problem.relative_residual(&oracle.p),
            1e-8,
        ));
    }
    Ok(())
}

fn add_outcome_checks(cfg: &ExperimentConfig, report: &mut RunReport) {
    let checks = &cfg.checks;
    match checks.expect {
        Expectation::RankDeficient => {
            report.checks.push(Check::new(
                "rank_deficient",
                report.status == Status::RankDeficient,
                report
                    .error
                    .clone()
                    .unwrap_or_else(|| "rank condition held".into()),
            ));
        }
        Expectation::Converged => {
            if let Some(err) = &report.error {
                report
                    .checks
                    .push(Check::new("pipeline", false, err.clone()));
            } else if let Some(it) = &report.iteration {
                report.checks.push(Check::new(
                    "converged",
                    it.converged,
                    format!("{} iterations", it.iterations),
                ));
            }
        }
    }
    if let Some(it) = &report.iteration {
        if let (Some(bound), Some(v)) = (checks.max_gain_error, it.final_gain_error) {
            report.checks.push(Check::at_most("gain_error", v, bound));
        }
        if let (Some(bound), Some(v)) = (checks.max_value_error, it.final_value_error) {
            report.checks.push(Check::at_most("value_error", v, bound));
        }
        if let Some([lo, hi]) = checks.iterations {
            report.checks.push(Check::new(
                "iterations",
                (lo..=hi).contains(&it.iterations),
                format!("{} in [{lo}, {hi}]", it.iterations),
            ));
        }
    } else if checks.expect == Expectation::Converged
        && (checks.max_gain_error.is_some()
            || checks.max_value_error.is_some()
            || checks.iterations.is_some())
    {
        report
            .checks
            .push(Check::new("iterations", false, "no iterates produced"));
    }
    if let Some(cap) = checks.max_seconds {
        let total = report.timings.get("total").copied().unwrap_or(f64::NAN);
        report
            .checks
            .push(Check::at_most(RUNTIME_CHECK, total, cap));
    }
}
