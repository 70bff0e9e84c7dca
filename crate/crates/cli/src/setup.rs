//! Turns a parsed config into library objects: plant, cost, observer
//! polynomial and exploration signal. Random plants are drawn here.

use adp_lqr::linalg::{numerical_rank, singular_values};
use adp_lqr::observer::{
    controllability_matrix, observability_matrix, place_observer_gain, ObserverPoly,
};
use adp_lqr::plant::{CostSpec, LtiPlant};
use adp_lqr::riccati::{spectral_abscissa, AreProblem};
use adp_lqr::sim::{ExplorationSignal, Sinusoid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{vector, ExperimentConfig, ObserverConfig, PlantSpec, SignalConfig};
use crate::error::{CliError, CliResult, PhaseContext};

/// Give up on a random plant config after this many rejected draws.
const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Resolved {
    pub plant: LtiPlant,
    pub cost: CostSpec,
    /// State weight of the state-based problem.
    pub state_q: DMatrix<f64>,
    pub poly: Option<ObserverPoly>,
    pub explicit_l: Option<DMatrix<f64>>,
}

impl Resolved {
    pub fn are_problem(&self) -> CliResult<AreProblem> {
        AreProblem::new(
            self.plant.a.clone(),
            self.plant.b.clone(),
            self.state_q.clone(),
            self.cost.r.clone(),
        )
        .phase("oracle")
    }
}

/// Resolves the config; `trial` offsets the seed for suite draws.
pub fn resolve(cfg: &ExperimentConfig, trial: u64) -> CliResult<Resolved> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let (plant, poly) = match &cfg.plant {
        PlantSpec::Explicit { a, b, c } => {
            let plant = LtiPlant::new(
                a.to_matrix("plant.a")?,
                b.to_matrix("plant.b")?,
                c.to_matrix("plant.c")?,
            )
            .phase("plant")?;
            let poly = match &cfg.observer {
                Some(obs) => Some(observer_poly(obs, plant.n(), &mut rng)?),
                None => None,
            };
            (plant, poly)
        }
        PlantSpec::Random { .. } => draw_plant(cfg, &mut rng)?,
    };
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let weight = |spec: &Option<crate::config::MatrixSpec>,
                  dim: usize,
                  what: &str|
     -> CliResult<DMatrix<f64>> {
        match spec {
            Some(s) => {
                let w = s.to_matrix(what)?;
                if w.shape() != (dim, dim) {
                    return Err(CliError::Config(format!("{what} must be {dim}x{dim}")));
                }
                Ok(w)
            }
            None => Ok(DMatrix::identity(dim, dim)),
        }
    };
    let q_y = weight(&cfg.cost.q_y, p, "cost.q_y")?;
    let r = weight(&cfg.cost.r, m, "cost.r")?;
    let state_q = match &cfg.cost.q {
        Some(_) => weight(&cfg.cost.q, n, "cost.q")?,
        None => plant.c.transpose() * &q_y * &plant.c,
    };
    let explicit_l = match cfg.observer.as_ref().and_then(|o| o.l.as_ref()) {
        Some(spec) => Some(spec.to_matrix("observer.l")?),
        None => None,
    };
    Ok(Resolved {
        plant,
        cost: CostSpec::new(q_y, r),
        state_q,
        poly,
        explicit_l,
    })
}

fn observer_poly(obs: &ObserverConfig, n: usize, rng: &mut ChaCha8Rng) -> CliResult<ObserverPoly> {
    let poly = if let Some(roots) = &obs.roots {
        if roots.len() != n {
            return Err(CliError::Config(format!(
                "observer.roots needs {n} roots, found {}",
                roots.len()
            )));
        }
        ObserverPoly::from_roots(roots)
    } else if let Some(coefficients) = &obs.coefficients {
        if coefficients.len() != n + 1 {
            return Err(CliError::Config(format!(
                "observer.coefficients needs {} entries",
                n + 1
            )));
        }
        // stored lowest power first, monic term dropped
        let mut low_first: Vec<f64> = coefficients.iter().rev().copied().collect();
        if low_first.pop() != Some(1.0) {
            return Err(CliError::Config(
                "observer.coefficients must be monic".into(),
            ));
        }
        ObserverPoly::from_coefficients(low_first)
    } else {
        let [lo, hi] = obs.root_range.expect("validated: one source is present");
        if !(lo < hi) {
            return Err(CliError::Config(
                "observer.root_range must be increasing".into(),
            ));
        }
        let roots: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        ObserverPoly::from_roots(&roots)
    };
    poly.phase("observer")
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn draw_plant(
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> CliResult<(LtiPlant, Option<ObserverPoly>)> {
    let PlantSpec::Random {
        n,
        m,
        p,
        stable,
        stability_margin,
        max_observer_gain,
    } = cfg.plant
    else {
        unreachable!("called for random plants only")
    };
    if n == 0 || m == 0 || p == 0 {
        return Err(CliError::Config(
            "random plant dimensions must be positive".into(),
        ));
    }
    for _ in 0..MAX_DRAWS {
        let mut a = uniform(rng, n, n);
        let b = uniform(rng, n, m);
        let mut c = uniform(rng, p, n);
        for mut row in c.row_iter_mut() {
            let norm = row.norm().max(1e-3);
            row /= norm;
        }
        if stable {
            let abscissa = spectral_abscissa(&a).phase("plant")?;
            if abscissa > -stability_margin {
                a -= DMatrix::identity(n, n) * (abscissa + stability_margin);
            }
        }
        let poly = match &cfg.observer {
            Some(obs) => Some(observer_poly(obs, n, rng)?),
            None => None,
        };
        if numerical_rank(&controllability_matrix(&a, &b), 1e-6) < n {
            continue;
        }
        let obs_sv = singular_values(&observability_matrix(&a, &c));
        let well_observable = if p == 1 {
            obs_sv.last().copied().unwrap_or(0.0) > 1e-2 * obs_sv[0]
        } else {
            numerical_rank(&observability_matrix(&a, &c), 1e-6) == n
        };
        if !well_observable {
            continue;
        }
        if let (Some(cap), Some(poly)) = (max_observer_gain, &poly) {
            if p == 1 && place_observer_gain(&a, &c, poly).phase("observer")?.amax() > cap {
                continue;
            }
        }
        return Ok((LtiPlant::new(a, b, c).phase("plant")?, poly));
    }
    Err(CliError::Config(format!(
        "no acceptable random plant in {MAX_DRAWS} draws"
    )))
}

/// Builds the exploration input; `n_zeta` sizes the compensator feedback.
pub fn exploration_signal(
    sig: &SignalConfig,
    m: usize,
    n: usize,
    n_zeta: usize,
) -> CliResult<ExplorationSignal> {
    let mut signal = match sig.amplitude {
        Some(amp) => ExplorationSignal::sum_of_sines(m, amp, &sig.frequencies),
        None => ExplorationSignal::zero(m),
    };
    for (i, s) in sig.sines.iter().enumerate() {
        signal.sinusoids.push(Sinusoid {
            amplitude: amplitude_vector(&s.amplitude, m, &format!("signal.sines[{i}].amplitude"))?,
            omega: s.omega,
            phase: s.phase,
        });
    }
    if let Some(offset) = &sig.offset {
        signal.offset = vector(offset, m, "signal.offset")?;
    }
    signal.onset = sig.onset;
    if let Some(g) = &sig.zeta_gain {
        let g = g.to_matrix("signal.zeta_gain")?;
        if g.shape() != (m, n_zeta) {
            return Err(CliError::Config(format!(
                "signal.zeta_gain must be {m}x{n_zeta}"
            )));
        }
        signal = signal.with_zeta_gain(g);
    }
    if let Some(g) = &sig.state_gain {
        let g = g.to_matrix("signal.state_gain")?;
        if g.shape() != (m, n) {
            return Err(CliError::Config(format!(
                "signal.state_gain must be {m}x{n}"
            )));
        }
        signal = signal.with_state_gain(g);
    }
    Ok(signal)
}

/// A single amplitude applies to every channel.
fn amplitude_vector(values: &[f64], m: usize, what: &str) -> CliResult<DVector<f64>> {
    match values {
        [single] => Ok(DVector::from_element(m, *single)),
        _ => vector(values, m, what),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn random_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
name = "draw"
algorithm = "oracle-only"
seed = {seed}
[plant]
kind = "random"
n = 3
m = 1
stable = true
max_observer_gain = 20.0
[observer]
root_range = [-3.0, -0.5]
"#
        ))
        .unwrap()
    }

    #[test]
    fn random_plants_are_seeded_and_meet_the_config() {
        let first = resolve(&random_config(7), 0).unwrap();
        let again = resolve(&random_config(7), 0).unwrap();
        assert_eq!(first.plant, again.plant);
        assert_ne!(first.plant, resolve(&random_config(7), 1).unwrap().plant);
        assert!(spectral_abscissa(&first.plant.a).unwrap() <= -0.2 + 1e-9);
        let l = place_observer_gain(&first.plant.a, &first.plant.c, first.poly.as_ref().unwrap())
            .unwrap();
        assert!(l.amax() <= 20.0);
        assert_eq!(first.state_q, first.plant.c.transpose() * &first.plant.c);
    }

    #[test]
    fn monic_coefficients_match_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let from_coeffs = observer_poly(
            &ObserverConfig {
                coefficients: Some(vec![1.0, 13.0, 42.0]),
                ..Default::default()
            },
            2,
            &mut rng,
        )
        .unwrap();
        let from_roots = ObserverPoly::from_roots(&[-6.0, -7.0]).unwrap();
        assert_eq!(from_coeffs.coefficients(), from_roots.coefficients());
    }

    #[test]
    fn scalar_amplitude_is_broadcast() {
        let sig = SignalConfig {
            sines: vec![crate::config::SineSpec {
                amplitude: vec![2.0],
                omega: 1.0,
                phase: 0.0,
            }],
            ..Default::default()
        };
        let s = exploration_signal(&sig, 2, 3, 0).unwrap();
        assert_eq!(s.sinusoids[0].amplitude, DVector::from_element(2, 2.0));
    }
}
