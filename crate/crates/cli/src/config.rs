//! Experiment configuration. One TOML file describes the plant, cost,
//! observer, exploration signal, data window, algorithm and pass criteria.
//! Matrices are written row-major with explicit dimensions:
//! `{ rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 1.0] }`.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_matrix(&self, what: &str) -> CliResult<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(CliError::Config(format!(
                "{what}: {}x{} needs {} entries, found {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{what}: entries must be finite")));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmChoice {
    StatePi,
    StateVi,
    OutputPi,
    OutputVi,
    ImprovedPi,
    ImprovedVi,
    ModelKleinman,
    ModelVi,
    OracleOnly,
}

impl AlgorithmChoice {
    pub fn needs_data(self) -> bool {
        !matches!(self, Self::ModelKleinman | Self::ModelVi | Self::OracleOnly)
    }

    pub fn is_state_based(self) -> bool {
        matches!(self, Self::StatePi | Self::StateVi)
    }

    pub fn is_pi(self) -> bool {
        matches!(
            self,
            Self::StatePi | Self::OutputPi | Self::ImprovedPi | Self::ModelKleinman
        )
    }

    pub fn is_vi(self) -> bool {
        matches!(
            self,
            Self::StateVi | Self::OutputVi | Self::ImprovedVi | Self::ModelVi
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::StatePi => "state-pi",
            Self::StateVi => "state-vi",
            Self::OutputPi => "output-pi",
            Self::OutputVi => "output-vi",
            Self::ImprovedPi => "improved-pi",
            Self::ImprovedVi => "improved-vi",
            Self::ModelKleinman => "model-kleinman",
            Self::ModelVi => "model-vi",
            Self::OracleOnly => "oracle-only",
        }
    }
}

impl fmt::Display for AlgorithmChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Explicit {
        a: MatrixSpec,
        b: MatrixSpec,
        c: MatrixSpec,
    },
    /// Drawn from the config seed. Entries are uniform in `[-1, 1]`, output
    /// rows are normalized, and draws are repeated until the pair is
    /// controllable and well observable.
    Random {
        n: usize,
        m: usize,
        #[serde(default = "one")]
        p: usize,
        /// Shift `A` so its spectral abscissa is at most `-stability_margin`.
        #[serde(default)]
        stable: bool,
        #[serde(default = "default_margin")]
        stability_margin: f64,
        /// Redraw when the placed observer gain exceeds this in magnitude.
        #[serde(default)]
        max_observer_gain: Option<f64>,
    },
}

fn one() -> usize {
    1
}

fn default_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Output weight; identity when absent.
    pub q_y: Option<MatrixSpec>,
    /// Input weight; identity when absent.
    pub r: Option<MatrixSpec>,
    /// State weight for state-based runs; `C' Q_y C` when absent.
    pub q: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub roots: Option<Vec<f64>>,
    /// Monic coefficients, highest power first.
    pub coefficients: Option<Vec<f64>>,
    /// Random real roots drawn uniformly from this interval.
    pub root_range: Option<[f64; 2]>,
    /// Explicit gain, checked against the polynomial.
    pub l: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineSpec {
    pub amplitude: Vec<f64>,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    /// Common amplitude for `frequencies`, applied on every input channel.
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub sines: Vec<SineSpec>,
    pub offset: Option<Vec<f64>>,
    /// Time at which sines and offset switch on; feedback acts throughout.
    pub onset: Option<f64>,
    pub zeta_gain: Option<MatrixSpec>,
    pub state_gain: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    #[serde(default)]
    pub t_start: f64,
    /// Plant initial state; ones when absent.
    pub x0: Option<Vec<f64>>,
    /// Compensator initial state; zeros when absent.
    pub zeta0: Option<Vec<f64>>,
    /// Start on `x0 = M zeta0` so no observer transient enters the data.
    #[serde(default)]
    pub start_on_manifold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    #[default]
    Strict,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub t0: f64,
    pub spacing: f64,
    pub intervals: usize,
    #[serde(default)]
    pub mode: WindowMode,
    /// Cap for auto extension; four times `intervals` when absent.
    pub max_intervals: Option<usize>,
}

impl WindowConfig {
    pub fn cap(&self) -> usize {
        match self.mode {
            WindowMode::Strict => self.intervals,
            WindowMode::Auto => self
                .max_intervals
                .unwrap_or(4 * self.intervals)
                .max(self.intervals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_pi_iters")]
    pub max_iters: usize,
    /// Initial gain; zeros when absent.
    pub k0: Option<MatrixSpec>,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_pi_iters(),
            k0: None,
        }
    }
}

fn default_tol() -> f64 {
    0.01
}

fn default_pi_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub scale: f64,
    #[serde(default = "unit")]
    pub offset: f64,
    #[serde(default = "unit")]
    pub exponent: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViConfig {
    #[serde(default = "default_step")]
    pub step: StepConfig,
    #[serde(default = "default_bound")]
    pub bound_base: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_vi_iters")]
    pub max_iters: usize,
    #[serde(default = "default_hits")]
    pub required_hits: usize,
    /// Initial value matrix; identity when absent.
    pub p0: Option<MatrixSpec>,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            step: default_step(),
            bound_base: default_bound(),
            tol: default_tol(),
            max_iters: default_vi_iters(),
            required_hits: default_hits(),
            p0: None,
        }
    }
}

fn default_step() -> StepConfig {
    StepConfig {
        scale: 5.0,
        offset: 1.0,
        exponent: 1.0,
    }
}

fn default_bound() -> f64 {
    1000.0
}

fn default_vi_iters() -> usize {
    100_000
}

fn default_hits() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSystem {
    #[default]
    Plant,
    Ancillary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    #[default]
    Converged,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default)]
    pub expect: Expectation,
    pub max_gain_error: Option<f64>,
    pub max_value_error: Option<f64>,
    pub iterations: Option<[usize; 2]>,
    pub max_seconds: Option<f64>,
    /// Compare data-driven iterates with their model-based counterparts.
    pub model_match_tol: Option<f64>,
    pub model_match_steps: Option<usize>,
    /// Oracle values to reproduce, with an absolute tolerance.
    pub expected_p: Option<MatrixSpec>,
    pub expected_k: Option<MatrixSpec>,
    pub expected_l: Option<MatrixSpec>,
    pub expected_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Number of seeded draws for `verify` on a random plant.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: AlgorithmChoice,
    #[serde(default)]
    pub seed: u64,
    /// Subdirectory of the output root; `name` when absent.
    pub output_dir: Option<String>,
    /// Which system the model-based algorithms iterate on.
    #[serde(default)]
    pub model_system: ModelSystem,
    pub plant: PlantSpec,
    #[serde(default)]
    pub cost: CostConfig,
    pub observer: Option<ObserverConfig>,
    #[serde(default)]
    pub signal: SignalConfig,
    pub simulation: Option<SimulationConfig>,
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub pi: PiConfig,
    #[serde(default)]
    pub vi: ViConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    pub suite: Option<SuiteConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn output_subdir(&self) -> &str {
        self.output_dir.as_deref().unwrap_or(&self.name)
    }

    /// Checks that need no matrices: names, step sizes, window timing.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!(
                "name {:?} must be a plain non-empty file name",
                self.name
            ));
        }
        if self.algorithm.needs_data() {
            let Some(sim) = &self.simulation else {
                return bad(format!("{} needs a [simulation] section", self.algorithm));
            };
            let Some(win) = &self.window else {
                return bad(format!("{} needs a [window] section", self.algorithm));
            };
            if !(sim.dt > 0.0 && sim.dt.is_finite()) {
                return bad("simulation.dt must be positive".into());
            }
            if !(win.spacing > 0.0) || win.intervals == 0 {
                return bad("window needs spacing > 0 and at least one interval".into());
            }
            if win.t0 < sim.t_start {
                return bad("window.t0 precedes simulation.t_start".into());
            }
            if !is_multiple(win.spacing, sim.dt) {
                return bad(format!(
                    "dt = {} does not divide the knot spacing {}",
                    sim.dt, win.spacing
                ));
            }
            if !is_multiple(win.t0 - sim.t_start, sim.dt) {
                return bad("window.t0 is not on the simulation time grid".into());
            }
            if !self.algorithm.is_state_based() && self.observer.is_none() {
                return bad(format!("{} needs an [observer] section", self.algorithm));
            }
            if sim.start_on_manifold && sim.zeta0.is_none() {
                return bad("start_on_manifold needs an explicit zeta0".into());
            }
        }
        if self.model_system == ModelSystem::Ancillary && self.observer.is_none() {
            return bad("model_system = \"ancillary\" needs an [observer] section".into());
        }
        if self.algorithm.is_pi() && !(self.pi.tol > 0.0) {
            return bad("pi.tol must be positive".into());
        }
        if self.algorithm.is_vi() {
            let s = &self.vi.step;
            if !(s.scale > 0.0 && s.offset > 0.0 && s.exponent > 0.5 && s.exponent <= 1.0) {
                return bad("vi.step needs scale > 0, offset > 0 and exponent in (0.5, 1]".into());
            }
            if !(self.vi.tol > 0.0 && self.vi.bound_base > 0.0) || self.vi.required_hits == 0 {
                return bad("vi needs tol > 0, bound_base > 0 and required_hits >= 1".into());
            }
        }
        if let Some(obs) = &self.observer {
            let given = [
                obs.roots.is_some(),
                obs.coefficients.is_some(),
                obs.root_range.is_some(),
            ];
            if given.iter().filter(|g| **g).count() != 1 {
                return bad("observer needs exactly one of roots, coefficients, root_range".into());
            }
        }
        if self.signal.amplitude.is_none() && !self.signal.frequencies.is_empty() {
            return bad("signal.frequencies needs signal.amplitude".into());
        }
        if let Some(suite) = &self.suite {
            if suite.trials == 0 || !matches!(self.plant, PlantSpec::Random { .. }) {
                return bad("a suite needs trials >= 1 and a random plant".into());
            }
        }
        Ok(())
    }
}

/// True when `span / step` is an integer up to roundoff.
fn is_multiple(span: f64, step: f64) -> bool {
    let ratio = span / step;
    (ratio - ratio.round()).abs() <= 1e-9 * ratio.abs().max(1.0)
}

pub fn vector(values: &[f64], len: usize, what: &str) -> CliResult<DVector<f64>> {
    if values.len() != len {
        return Err(CliError::Config(format!(
            "{what} has {} entries, expected {len}",
            values.len()
        )));
    }
    Ok(DVector::from_column_slice(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
algorithm = "oracle-only"

[plant]
kind = "explicit"
a = { rows = 1, cols = 1, data = [-1.0] }
b = { rows = 1, cols = 1, data = [1.0] }
c = { rows = 1, cols = 1, data = [1.0] }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm, AlgorithmChoice::OracleOnly);
        assert_eq!(cfg.pi.tol, 0.01);
        assert_eq!(cfg.vi.required_hits, 3);
        assert_eq!(cfg.output_subdir(), "tiny");
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[pi]\ntolerance = 1.0\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn matrix_entry_count_is_checked() {
        let spec = MatrixSpec {
            rows: 2,
            cols: 2,
            data: vec![1.0; 3],
        };
        assert!(spec.to_matrix("A").is_err());
        let ok = MatrixSpec {
            rows: 1,
            cols: 2,
            data: vec![1.0, 2.0],
        };
        assert_eq!(ok.to_matrix("A").unwrap()[(0, 1)], 2.0);
        assert_eq!(MatrixSpec::from_matrix(&ok.to_matrix("A").unwrap()), ok);
    }

    #[test]
    fn dt_must_divide_spacing() {
        let text = format!(
            "{}\n{}",
            MINIMAL.replace("oracle-only", "state-pi"),
            "[simulation]\ndt = 0.03\n[window]\nt0 = 0.0\nspacing = 0.1\nintervals = 10\n"
        );
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("does not divide"), "{err}");
    }
}
