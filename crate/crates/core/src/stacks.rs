//! Data stacks: per-interval increments and integrals of Kronecker
//! products of trajectory signals, and the rank conditions that gate the
//! data-driven regressions.
//!
//! Row `q` of every stack covers the knot interval `[t_q, t_{q+1}]`. With
//! `a` the regressor signal (`x` or `zeta`):
//!
//! | stack      | row                          | width          |
//! |------------|------------------------------|----------------|
//! | `delta`    | `vecv(a(t_{q+1})) - vecv(a(t_q))` | `d(d+1)/2` |
//! | `gamma_aa` | `int a (x) a`                | `d^2`          |
//! | `gamma_au` | `int a (x) u`                | `d m`          |
//! | `i_aa`     | `int vecv(a)`                | `d(d+1)/2`     |
//! | `i_au`     | `int a (x) R u`              | `d m`          |
//! | `gamma_yy` | `int y (x) y`                | `p^2`          |
//! | `i_yy`     | `int vecv(y)`                | `p(p+1)/2`     |

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, packed_len, rank_from_singular_values, vecv_into};
use crate::sim::Trajectory;

/// Default relative singular-value cutoff of the rank report.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Knots `t_0 < t_1 < .. < t_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    knots: Vec<f64>,
}

impl SampleGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument("a sample grid needs s >= 1".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "knots must be strictly increasing".into(),
            ));
        }
        Ok(Self { knots })
    }

    /// `t_q = t0 + q * spacing`, `q = 0..=s`.
    pub fn uniform(t0: f64, spacing: f64, s: usize) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument(
                "knot spacing must be positive".into(),
            ));
        }
        Self::new((0..=s).map(|q| t0 + q as f64 * spacing).collect())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of intervals `s`.
    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().expect("non-empty grid")
    }

    /// Knot positions as trajectory sample indices.
    pub fn align(&self, traj: &Trajectory) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self
            .knots
            .iter()
            .map(|&t| {
                traj.index_of(t).ok_or_else(|| {
                    Error::GridAlignment(format!(
                        "knot {t} is not on the trajectory grid (start {}, dt {}, {} samples)",
                        traj.t_start,
                        traj.dt,
                        traj.len()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if idx.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridAlignment("two knots share a sample".into()));
        }
        Ok(idx)
    }
}

/// Which signal plays the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackKind {
    /// `a = x`; needs the plant state to be measured.
    State,
    /// `a = zeta`; output-feedback stacks.
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataStacks {
    pub kind: StackKind,
    pub delta: DMatrix<f64>,
    pub gamma_aa: DMatrix<f64>,
    pub gamma_au: DMatrix<f64>,
    pub i_aa: DMatrix<f64>,
    pub i_au: DMatrix<f64>,
    pub gamma_yy: DMatrix<f64>,
    pub i_yy: DMatrix<f64>,
    /// Regressor dimension (`n` or `n_zeta`).
    pub dim: usize,
    pub m: usize,
    pub p: usize,
}

/// Quadrature weights for `intervals` uniform steps of width `h`:
/// composite Simpson, closing with Simpson 3/8 on an odd count and the
/// trapezoid on a single step.
pub fn quadrature_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match intervals {
        0 => {}
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let simpson_end = if intervals.is_multiple_of(2) {
                intervals
            } else {
                intervals - 3
            };
            let mut i = 0;
            while i < simpson_end {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
                i += 2;
            }
            if simpson_end < intervals {
                let c = 3.0 * h / 8.0;
                w[simpson_end] += c;
                w[simpson_end + 1] += 3.0 * c;
                w[simpson_end + 2] += 3.0 * c;
                w[simpson_end + 3] += c;
            }
        }
    }
    w
}

impl DataStacks {
    pub fn build(
        traj: &Trajectory,
        grid: &SampleGrid,
        r: &DMatrix<f64>,
        kind: StackKind,
    ) -> Result<Self> {
        let m = traj.m();
        let p = traj.p();
        if r.shape() != (m, m) {
            return Err(Error::Dimension(format!("R must be {m}x{m}")));
        }
        let signal = match kind {
            StackKind::State => &traj.x,
            StackKind::Output => &traj.zeta,
        };
        let d = signal.nrows();
        if d == 0 {
            return Err(Error::Dimension("regressor signal is empty".into()));
        }
        let idx = grid.align(traj)?;
        let s = grid.intervals();
        let dv = packed_len(d);
        let mut out = Self {
            kind,
            delta: DMatrix::zeros(s, dv),
            gamma_aa: DMatrix::zeros(s, d * d),
            gamma_au: DMatrix::zeros(s, d * m),
            i_aa: DMatrix::zeros(s, dv),
            i_au: DMatrix::zeros(s, d * m),
            gamma_yy: DMatrix::zeros(s, p * p),
            i_yy: DMatrix::zeros(s, packed_len(p)),
            dim: d,
            m,
            p,
        };
        let ru = r * &traj.u;
        let mut va = vec![0.0; dv];
        let mut vb = vec![0.0; dv];
        let mut vy = vec![0.0; packed_len(p)];
        let mut row_aa = vec![0.0; d * d];
        let mut row_au = vec![0.0; d * m];
        let mut row_iau = vec![0.0; d * m];
        let mut row_iaa = vec![0.0; dv];
        let mut row_yy = vec![0.0; p * p];
        let mut row_iyy = vec![0.0; packed_len(p)];
        for q in 0..s {
            let (i0, i1) = (idx[q], idx[q + 1]);
            vecv_into(signal.column(i0).as_slice(), &mut va);
            vecv_into(signal.column(i1).as_slice(), &mut vb);
            for c in 0..dv {
                out.delta[(q, c)] = vb[c] - va[c];
            }
            let weights = quadrature_weights(i1 - i0, traj.dt);
            for row in [
                &mut row_aa,
                &mut row_au,
                &mut row_iau,
                &mut row_iaa,
                &mut row_yy,
                &mut row_iyy,
            ] {
                row.fill(0.0);
            }
            for (off, &w) in weights.iter().enumerate() {
                let i = i0 + off;
                let a = signal.column(i);
                let u = traj.u.column(i);
                let ruc = ru.column(i);
                let y = traj.y.column(i);
                for j in 0..d {
                    let wa = w * a[j];
                    for k in 0..d {
                        row_aa[j * d + k] += wa * a[k];
                    }
                    for k in 0..m {
                        row_au[j * m + k] += wa * u[k];
                        row_iau[j * m + k] += wa * ruc[k];
                    }
                }
                vecv_into(a.as_slice(), &mut va);
                for (acc, v) in row_iaa.iter_mut().zip(&va) {
                    *acc += w * v;
                }
                for j in 0..p {
                    for k in 0..p {
                        row_yy[j * p + k] += w * y[j] * y[k];
                    }
                }
                vecv_into(y.as_slice(), &mut vy);
                for (acc, v) in row_iyy.iter_mut().zip(&vy) {
                    *acc += w * v;
                }
            }
            copy_row(&mut out.gamma_aa, q, &row_aa);
            copy_row(&mut out.gamma_au, q, &row_au);
            copy_row(&mut out.i_au, q, &row_iau);
            copy_row(&mut out.i_aa, q, &row_iaa);
            copy_row(&mut out.gamma_yy, q, &row_yy);
            copy_row(&mut out.i_yy, q, &row_iyy);
        }
        Ok(out)
    }

    /// Number of intervals `s`.
    pub fn rows(&self) -> usize {
        self.delta.nrows()
    }

    /// The named stacks in a fixed order, for export.
    pub fn named(&self) -> Vec<(&'static str, &DMatrix<f64>)> {
        vec![
            ("delta", &self.delta),
            ("gamma_aa", &self.gamma_aa),
            ("gamma_au", &self.gamma_au),
            ("i_aa", &self.i_aa),
            ("i_au", &self.i_au),
            ("gamma_yy", &self.gamma_yy),
            ("i_yy", &self.i_yy),
        ]
    }

    /// Rank report over the conditions that apply to this stack kind.
    pub fn rank_report(&self, tol: f64) -> RankReport {
        let conditions = match self.kind {
            StackKind::State => vec![RankCondition::StatePi, RankCondition::StateVi],
            StackKind::Output => vec![
                RankCondition::OutputPi,
                RankCondition::OutputVi,
                RankCondition::ImprovedPi,
                RankCondition::ImprovedVi,
            ],
        };
        let entries = conditions.into_iter().map(|c| self.check(c, tol)).collect();
        RankReport { tol, entries }
    }

    fn condition_matrix(&self, cond: RankCondition) -> DMatrix<f64> {
        let pair = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            linalg::hcat(&[a, b]).expect("stacks share the row count")
        };
        match cond {
            RankCondition::StatePi | RankCondition::OutputPi => {
                pair(&self.gamma_aa, &self.gamma_au)
            }
            RankCondition::StateVi | RankCondition::OutputVi => pair(&self.i_aa, &self.i_au),
            RankCondition::ImprovedPi => self.gamma_aa.clone(),
            RankCondition::ImprovedVi => self.i_aa.clone(),
        }
    }

    pub fn check(&self, cond: RankCondition, tol: f64) -> RankEntry {
        let required = cond.required(self.dim, self.m);
        let singular_values = linalg::singular_values(&self.condition_matrix(cond));
        let achieved = rank_from_singular_values(&singular_values, tol);
        RankEntry {
            condition: cond,
            required,
            achieved,
            satisfied: achieved >= required,
            singular_values,
        }
    }

    /// One CSV per stack, same numeric format as trajectories.
    pub fn write_csv<W: Write>(matrix: &DMatrix<f64>, mut w: W) -> std::io::Result<()> {
        for i in 0..matrix.nrows() {
            let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn copy_row(m: &mut DMatrix<f64>, q: usize, row: &[f64]) {
    for (c, v) in row.iter().enumerate() {
        m[(q, c)] = *v;
    }
}

/// The six full-rank requirements on the stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankCondition {
    /// `rank [Gamma_xx, Gamma_xu] = n(n+1)/2 + mn`
    StatePi,
    /// `rank [I_xx, I_xu] = n(n+1)/2 + mn`
    StateVi,
    /// `rank [Gamma_zz, Gamma_zu] = n_z(n_z+1)/2 + m n_z`
    OutputPi,
    /// `rank [I_zz, I_zu] = n_z(n_z+1)/2 + m n_z`
    OutputVi,
    /// `rank Gamma_zz = n_z(n_z+1)/2`
    ImprovedPi,
    /// `rank I_zz = n_z(n_z+1)/2`
    ImprovedVi,
}

impl RankCondition {
    pub fn required(&self, dim: usize, m: usize) -> usize {
        match self {
            RankCondition::ImprovedPi | RankCondition::ImprovedVi => packed_len(dim),
            _ => packed_len(dim) + m * dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RankCondition::StatePi => "state-pi",
            RankCondition::StateVi => "state-vi",
            RankCondition::OutputPi => "output-pi",
            RankCondition::OutputVi => "output-vi",
            RankCondition::ImprovedPi => "improved-pi",
            RankCondition::ImprovedVi => "improved-vi",
        }
    }

    pub fn matrix_label(&self) -> &'static str {
        match self {
            RankCondition::StatePi => "[Gamma_xx, Gamma_xu]",
            RankCondition::StateVi => "[I_xx, I_xu]",
            RankCondition::OutputPi => "[Gamma_zz, Gamma_zu]",
            RankCondition::OutputVi => "[I_zz, I_zu]",
            RankCondition::ImprovedPi => "Gamma_zz",
            RankCondition::ImprovedVi => "I_zz",
        }
    }
}

impl fmt::Display for RankCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub condition: RankCondition,
    pub required: usize,
    pub achieved: usize,
    pub satisfied: bool,
    /// Descending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub tol: f64,
    pub entries: Vec<RankEntry>,
}

impl RankReport {
    pub fn get(&self, cond: RankCondition) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.condition == cond)
    }
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<12} rank {:<20} = {:>4} / {:<4} {}",
                e.condition.name(),
                e.condition.matrix_label(),
                e.achieved,
                e.required,
                if e.satisfied { "ok" } else { "deficient" }
            )?;
        }
        Ok(())
    }
}
