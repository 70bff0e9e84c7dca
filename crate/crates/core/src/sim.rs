//! Fixed-step RK4 simulation of the plant together with the companion
//! filters, under a known exploration input.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observer::Compensator;
use crate::plant::LtiPlant;

/// Joint-state norm that aborts integration.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// `amplitude * sin(omega t + phase)`, one amplitude per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinusoid {
    pub amplitude: DVector<f64>,
    pub omega: f64,
    pub phase: f64,
}

/// `u(t) = K_zeta zeta + K_x x + sum_i a_i sin(w_i t + phi_i) + offset`,
/// where the open-loop part (sines and offset) is switched on at `onset`.
/// Feedback terms act from the start.
///
/// `state_gain` is only meaningful for state-feedback experiments; the
/// output-feedback pipeline leaves it `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSignal {
    pub zeta_gain: Option<DMatrix<f64>>,
    pub state_gain: Option<DMatrix<f64>>,
    pub sinusoids: Vec<Sinusoid>,
    pub offset: DVector<f64>,
    pub onset: Option<f64>,
}

impl ExplorationSignal {
    /// No feedback, no excitation.
    pub fn zero(m: usize) -> Self {
        Self {
            zeta_gain: None,
            state_gain: None,
            sinusoids: Vec::new(),
            offset: DVector::zeros(m),
            onset: None,
        }
    }

    /// Sum of unit-phase sines `amplitude * sum_i sin(omega_i t)` on every
    /// channel.
    pub fn sum_of_sines(m: usize, amplitude: f64, omegas: &[f64]) -> Self {
        let mut s = Self::zero(m);
        s.sinusoids = omegas
            .iter()
            .map(|&omega| Sinusoid {
                amplitude: DVector::from_element(m, amplitude),
                omega,
                phase: 0.0,
            })
            .collect();
        s
    }

    pub fn with_zeta_gain(mut self, gain: DMatrix<f64>) -> Self {
        self.zeta_gain = Some(gain);
        self
    }

    pub fn with_state_gain(mut self, gain: DMatrix<f64>) -> Self {
        self.state_gain = Some(gain);
        self
    }

    pub fn with_onset(mut self, onset: f64) -> Self {
        self.onset = Some(onset);
        self
    }

    pub fn m(&self) -> usize {
        self.offset.len()
    }

    /// Whether the excitation is switched on at time `t`.
    pub fn is_active(&self, t: f64) -> bool {
        self.onset.is_none_or(|o| t >= o)
    }

    fn validate(&self, n: usize, n_zeta: usize) -> Result<()> {
        let m = self.m();
        if let Some(g) = &self.zeta_gain {
            if g.shape() != (m, n_zeta) {
                return Err(Error::Dimension(format!(
                    "zeta gain is {}x{}, expected {m}x{n_zeta}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            if !all_finite(g.iter()) {
                return Err(Error::InvalidArgument("non-finite zeta gain".into()));
            }
        }
        if let Some(g) = &self.state_gain {
            if g.shape() != (m, n) {
                return Err(Error::Dimension(format!(
                    "state gain is {}x{}, expected {m}x{n}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            if !all_finite(g.iter()) {
                return Err(Error::InvalidArgument("non-finite state gain".into()));
            }
        }
        for s in &self.sinusoids {
            if s.amplitude.len() != m {
                return Err(Error::Dimension("sinusoid amplitude length != m".into()));
            }
            if !(s.omega.is_finite() && s.phase.is_finite() && all_finite(s.amplitude.iter())) {
                return Err(Error::InvalidArgument("non-finite sinusoid".into()));
            }
        }
        if !all_finite(self.offset.iter()) || self.onset.is_some_and(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument("non-finite offset or onset".into()));
        }
        Ok(())
    }

    /// Input at time `t`; a pure function of its arguments.
    pub fn eval(&self, t: f64, x: &[f64], zeta: &[f64], out: &mut [f64]) {
        self.eval_switched(self.is_active(t), t, x, zeta, out);
    }

    fn eval_switched(&self, active: bool, t: f64, x: &[f64], zeta: &[f64], out: &mut [f64]) {
        if active {
            out.copy_from_slice(self.offset.as_slice());
            for s in &self.sinusoids {
                let v = (s.omega * t + s.phase).sin();
                for (o, a) in out.iter_mut().zip(s.amplitude.iter()) {
                    *o += a * v;
                }
            }
        } else {
            out.fill(0.0);
        }
        if let Some(g) = &self.zeta_gain {
            add_mat_vec(g, zeta, out);
        }
        if let Some(g) = &self.state_gain {
            add_mat_vec(g, x, out);
        }
    }
}

fn all_finite<'a>(mut v: impl Iterator<Item = &'a f64>) -> bool {
    v.all(|x| x.is_finite())
}

fn add_mat_vec(a: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, vj) in v.iter().enumerate() {
            acc += a[(i, j)] * vj;
        }
        *o += acc;
    }
}

/// Uniformly sampled trajectory; every series holds one column per time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t_start: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub x: DMatrix<f64>,
    pub zeta: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_zeta(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }

    /// Index of the sample at time `t`, if `t` sits on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let pos = (t - self.t_start) / self.dt;
        let idx = pos.round();
        if idx < 0.0 || (pos - idx).abs() > 1e-6 {
            return None;
        }
        let idx = idx as usize;
        (idx < self.len()).then_some(idx)
    }

    /// CSV with header `t,x1..,zeta1..,u1..,y1..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for (name, rows) in [
            ("x", self.n()),
            ("zeta", self.n_zeta()),
            ("u", self.m()),
            ("y", self.p()),
        ] {
            header.extend((1..=rows).map(|i| format!("{name}{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut fields = vec![format!("{t:.16e}")];
            for series in [&self.x, &self.zeta, &self.u, &self.y] {
                fields.extend(series.column(i).iter().map(|v| format!("{v:.16e}")));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

struct JointSystem<'a> {
    plant: &'a LtiPlant,
    comp: Option<&'a Compensator>,
    signal: &'a ExplorationSignal,
    n: usize,
    n_zeta: usize,
}

impl JointSystem<'_> {
    fn output(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.n).map(|j| self.plant.c[(i, j)] * x[j]).sum();
        }
    }

    /// `active` is decided once per step so that an onset on the grid is
    /// never straddled by a step.
    fn derivative(
        &self,
        active: bool,
        t: f64,
        z: &[f64],
        dz: &mut [f64],
        u: &mut [f64],
        y: &mut [f64],
    ) {
        let (x, zeta) = z.split_at(self.n);
        self.signal.eval_switched(active, t, x, zeta, u);
        self.output(x, y);
        let (dx, dzeta) = dz.split_at_mut(self.n);
        for (i, d) in dx.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += self.plant.a[(i, j)] * xj;
            }
            for (j, uj) in u.iter().enumerate() {
                acc += self.plant.b[(i, j)] * uj;
            }
            *d = acc;
        }
        if let Some(comp) = self.comp {
            comp.derivative(zeta, u, y, dzeta);
        }
        debug_assert_eq!(dzeta.len(), self.n_zeta);
    }
}

/// Integrates from `t_start` to `t_end` with the classical fixed-step RK4.
/// Sample `i` sits at `t_start + i dt`; `u` and `y` are recorded at the
/// samples.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    plant: &LtiPlant,
    comp: Option<&Compensator>,
    signal: &ExplorationSignal,
    x0: &DVector<f64>,
    zeta0: &DVector<f64>,
    t_start: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = plant.n();
    let n_zeta = comp.map_or(0, |c| c.n_zeta());
    if let Some(c) = comp {
        if c.m != plant.m() || c.p != plant.p() || c.n() != n {
            return Err(Error::Dimension(
                "compensator does not match the plant".into(),
            ));
        }
    }
    if signal.m() != plant.m() {
        return Err(Error::Dimension("signal width != m".into()));
    }
    signal.validate(n, n_zeta)?;
    if x0.len() != n || zeta0.len() != n_zeta {
        return Err(Error::Dimension(format!(
            "initial state lengths {}/{} but n = {n}, n_zeta = {n_zeta}",
            x0.len(),
            zeta0.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let span = t_end - t_start;
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidArgument("empty time span".into()));
    }
    let steps_f = span / dt;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-6 {
        return Err(Error::GridAlignment(format!(
            "span {span} is not a multiple of dt {dt}"
        )));
    }
    let steps = steps as usize;

    let sys = JointSystem {
        plant,
        comp,
        signal,
        n,
        n_zeta,
    };
    let m = plant.m();
    let p = plant.p();
    let dim = n + n_zeta;
    let mut traj = Trajectory {
        t_start,
        dt,
        times: Vec::with_capacity(steps + 1),
        x: DMatrix::zeros(n, steps + 1),
        zeta: DMatrix::zeros(n_zeta, steps + 1),
        u: DMatrix::zeros(m, steps + 1),
        y: DMatrix::zeros(p, steps + 1),
    };
    let mut z: Vec<f64> = x0.iter().chain(zeta0.iter()).copied().collect();
    let mut k = vec![vec![0.0; dim]; 4];
    let mut stage = vec![0.0; dim];
    let mut u = vec![0.0; m];
    let mut y = vec![0.0; p];

    for i in 0..=steps {
        let t = t_start + i as f64 * dt;
        let active = signal.is_active(t + 1e-6 * dt);
        // record the sample, computing u and y at (t, z)
        sys.derivative(active, t, &z, &mut k[0], &mut u, &mut y);
        traj.times.push(t);
        traj.x.column_mut(i).copy_from_slice(&z[..n]);
        traj.zeta.column_mut(i).copy_from_slice(&z[n..]);
        traj.u.column_mut(i).copy_from_slice(&u);
        traj.y.column_mut(i).copy_from_slice(&y);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= DIVERGENCE_NORM) {
            let keep = i + 1;
            let partial = Trajectory {
                t_start,
                dt,
                times: traj.times.clone(),
                x: traj.x.columns(0, keep).into_owned(),
                zeta: traj.zeta.columns(0, keep).into_owned(),
                u: traj.u.columns(0, keep).into_owned(),
                y: traj.y.columns(0, keep).into_owned(),
            };
            return Err(Error::Divergence {
                time: t,
                norm,
                partial: Box::new(partial),
            });
        }
        if i == steps {
            break;
        }
        for s in 1..4 {
            let h = if s == 3 { dt } else { 0.5 * dt };
            for j in 0..dim {
                stage[j] = z[j] + h * k[s - 1][j];
            }
            sys.derivative(active, t + h, &stage, &mut k[s], &mut u, &mut y);
        }
        for j in 0..dim {
            z[j] += dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
    }
    Ok(traj)
}

/// `|M zeta(t) - x(t)|` at every sample.
pub fn observation_error(traj: &Trajectory, m_mat: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m_mat.shape() != (traj.n(), traj.n_zeta()) {
        return Err(Error::Dimension("M does not match the trajectory".into()));
    }
    Ok((0..traj.len())
        .map(|i| (m_mat * traj.zeta.column(i) - traj.x.column(i)).norm())
        .collect())
}

/// Least-squares slope of `ln(values)` against `times`; the exponential
/// decay rate of a positive series.
pub fn log_decay_rate(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two paired samples".into(),
        ));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("values must be positive".into()));
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let ml = logs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, l) in times.iter().zip(&logs) {
        num += (t - mt) * (l - ml);
        den += (t - mt) * (t - mt);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn scalar_plant() -> LtiPlant {
        LtiPlant::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap()
    }

    #[test]
    fn zero_input_zero_state() {
        let traj = simulate(
            &scalar_plant(),
            None,
            &ExplorationSignal::zero(1),
            &dvector![0.0],
            &DVector::zeros(0),
            0.0,
            1.0,
            0.01,
        )
        .unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exponential_decay() {
        let traj = simulate(
            &scalar_plant(),
            None,
            &ExplorationSignal::zero(1),
            &dvector![1.0],
            &DVector::zeros(0),
            0.0,
            1.0,
            1e-3,
        )
        .unwrap();
        let last = traj.x[(0, traj.len() - 1)];
        assert!((last - (-1f64).exp()).abs() < 1e-10);
        assert!((traj.times[1000] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signal_evaluation() {
        let sig = ExplorationSignal::sum_of_sines(1, 2.0, &[1.0, 3.0])
            .with_zeta_gain(dmatrix![1.0, -1.0]);
        let mut u = [0.0];
        sig.eval(0.5, &[], &[2.0, 0.5], &mut u);
        let expected = 2.0 * (0.5f64.sin() + 1.5f64.sin()) + 1.5;
        assert!((u[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn onset_gates_only_excitation() {
        let sig = ExplorationSignal::sum_of_sines(1, 2.0, &[1.0])
            .with_zeta_gain(dmatrix![3.0])
            .with_onset(1.0);
        let mut u = [0.0];
        sig.eval(0.5, &[], &[2.0], &mut u);
        assert_eq!(u[0], 6.0);
        sig.eval(1.5, &[], &[2.0], &mut u);
        assert!((u[0] - (6.0 + 2.0 * 1.5f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn divergence_carries_partial() {
        let plant = LtiPlant::new(dmatrix![50.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let err = simulate(
            &plant,
            None,
            &ExplorationSignal::zero(1),
            &dvector![1.0],
            &DVector::zeros(0),
            0.0,
            10.0,
            1e-3,
        )
        .unwrap_err();
        match err {
            Error::Divergence { partial, time, .. } => {
                assert!(time < 1.0);
                assert!(!partial.is_empty());
                assert_eq!(partial.x.ncols(), partial.times.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misaligned_span() {
        let err = simulate(
            &scalar_plant(),
            None,
            &ExplorationSignal::zero(1),
            &dvector![1.0],
            &DVector::zeros(0),
            0.0,
            1.0,
            0.3,
        );
        assert!(matches!(err, Err(Error::GridAlignment(_))));
    }

    #[test]
    fn decay_rate_fit() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        assert!((log_decay_rate(&t, &v).unwrap() + 2.5).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = simulate(
            &scalar_plant(),
            None,
            &ExplorationSignal::zero(1),
            &dvector![1.0],
            &DVector::zeros(0),
            0.0,
            0.02,
            0.01,
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,u1,y1");
        assert_eq!(lines.len(), 4);
        let first: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(first, 1.0);
    }
}
