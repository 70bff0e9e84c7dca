//! Data-driven iteration engines. Each engine reads only data stacks and
//! known matrices (`Q`/`Q_y`, `R`, and for the reduced-variable variants
//! the compensator input matrix `B_zeta`), assembles a linear regression per
//! iteration and solves it by least squares.
//!
//! | engine                | unknowns                   | regressor   |
//! |-----------------------|----------------------------|-------------|
//! | [`state_pi`]          | `vecs(P)`, `vec(K_next)`   | `x`         |
//! | [`state_vi`]          | `vecs(H)`, `vec(K)`        | `x`         |
//! | [`output_pi_original`]| `vecs(P)`, `vec(K_next)`   | `zeta`      |
//! | [`output_vi_original`]| `vecs(H)`, `vec(K)`        | `zeta`      |
//! | [`output_pi_improved`]| `vecs(P)`                  | `zeta`      |
//! | [`output_vi_improved`]| `vecs(H)`                  | `zeta`      |

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, duplication_matrix, kron, norm2, normalized_error, packed_len, unvec, unvecs, vec,
    vecs_unchecked, PseudoInverse,
};
use crate::riccati::{value_iteration, IterateHistory, IterateRecord, ViSchedule, ViStep};
use crate::stacks::{DataStacks, RankCondition, RankReport, StackKind, DEFAULT_RANK_TOL};

/// Iterate norm beyond which a PI run is declared divergent.
pub const ITERATE_DIVERGENCE_NORM: f64 = 1e8;

/// Relative singular-value cutoff used inside each regression solve.
const SOLVE_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    StatePi,
    StateVi,
    OutputPi,
    OutputVi,
    ImprovedPi,
    ImprovedVi,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::StatePi => "state-pi",
            Algorithm::StateVi => "state-vi",
            Algorithm::OutputPi => "output-pi",
            Algorithm::OutputVi => "output-vi",
            Algorithm::ImprovedPi => "improved-pi",
            Algorithm::ImprovedVi => "improved-vi",
        }
    }

    /// The stack rank condition gating this engine.
    pub fn rank_condition(&self) -> RankCondition {
        match self {
            Algorithm::StatePi => RankCondition::StatePi,
            Algorithm::StateVi => RankCondition::StateVi,
            Algorithm::OutputPi => RankCondition::OutputPi,
            Algorithm::OutputVi => RankCondition::OutputVi,
            Algorithm::ImprovedPi => RankCondition::ImprovedPi,
            Algorithm::ImprovedVi => RankCondition::ImprovedVi,
        }
    }

    pub fn layout(&self, dim: usize, m: usize) -> UnknownLayout {
        match self {
            Algorithm::StatePi | Algorithm::OutputPi => UnknownLayout::ValueAndGain { dim, m },
            Algorithm::StateVi | Algorithm::OutputVi => UnknownLayout::DriftAndGain { dim, m },
            Algorithm::ImprovedPi => UnknownLayout::ValueOnly { dim },
            Algorithm::ImprovedVi => UnknownLayout::DriftOnly { dim },
        }
    }

    fn stack_kind(&self) -> StackKind {
        match self {
            Algorithm::StatePi | Algorithm::StateVi => StackKind::State,
            _ => StackKind::Output,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a regression solution vector splits into matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownLayout {
    /// `[vecs(P); vec(K)]`
    ValueAndGain { dim: usize, m: usize },
    /// `[vecs(H); vec(K)]`
    DriftAndGain { dim: usize, m: usize },
    /// `vecs(P)`
    ValueOnly { dim: usize },
    /// `vecs(H)`
    DriftOnly { dim: usize },
}

impl UnknownLayout {
    pub fn unknowns(&self) -> usize {
        match *self {
            UnknownLayout::ValueAndGain { dim, m } | UnknownLayout::DriftAndGain { dim, m } => {
                packed_len(dim) + m * dim
            }
            UnknownLayout::ValueOnly { dim } | UnknownLayout::DriftOnly { dim } => packed_len(dim),
        }
    }

    /// Symmetric block and, when present, the `m x dim` gain block.
    pub fn unpack(&self, sol: &DVector<f64>) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        if sol.len() != self.unknowns() {
            return Err(Error::Dimension(format!(
                "solution has {} entries, layout expects {}",
                sol.len(),
                self.unknowns()
            )));
        }
        match *self {
            UnknownLayout::ValueAndGain { dim, m } | UnknownLayout::DriftAndGain { dim, m } => {
                let d = packed_len(dim);
                let sym = unvecs(&sol.rows(0, d).into_owned())?;
                let gain = unvec(&sol.rows(d, m * dim).into_owned(), m, dim)?;
                Ok((sym, Some(gain)))
            }
            UnknownLayout::ValueOnly { .. } | UnknownLayout::DriftOnly { .. } => {
                Ok((unvecs(sol)?, None))
            }
        }
    }
}

/// `design * unknowns = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub layout: UnknownLayout,
}

impl Regression {
    pub fn new(design: DMatrix<f64>, target: DVector<f64>, layout: UnknownLayout) -> Result<Self> {
        if design.ncols() != layout.unknowns() || design.nrows() != target.len() {
            return Err(Error::Dimension(format!(
                "design {}x{}, target {}, layout {} unknowns",
                design.nrows(),
                design.ncols(),
                target.len(),
                layout.unknowns()
            )));
        }
        Ok(Self {
            design,
            target,
            layout,
        })
    }

    /// Fewer rows than unknowns.
    pub fn is_underdetermined(&self) -> bool {
        self.design.nrows() < self.design.ncols()
    }

    pub fn solve(&self) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        let sol = linalg::least_squares(&self.design, &self.target, SOLVE_RTOL)?;
        self.layout.unpack(&sol.x)
    }
}

/// Policy-iteration stopping and gating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOptions {
    /// Stop once `|P_k - P_{k-1}| < tol`.
    pub tol: f64,
    pub max_iters: usize,
    pub rank_tol: f64,
}

impl PiOptions {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self {
            tol,
            max_iters,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Value-iteration schedule plus the rank gate tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    pub schedule: ViSchedule,
    pub rank_tol: f64,
}

impl ViOptions {
    pub fn new(schedule: ViSchedule) -> Self {
        Self {
            schedule,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Normalized errors against a reference pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceErrors {
    /// `|P_k - P_ref| / |P_ref|` per record.
    pub value: Vec<f64>,
    /// `|K_k - K_ref| / |K_ref|` per record.
    pub gain: Vec<f64>,
    pub final_value: f64,
    pub final_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdpResult {
    pub algorithm: Algorithm,
    pub layout: UnknownLayout,
    pub history: IterateHistory,
    pub converged: bool,
    pub iterations: usize,
    pub rank_report: RankReport,
    pub reference: Option<ReferenceErrors>,
}

impl AdpResult {
    fn new(
        algorithm: Algorithm,
        layout: UnknownLayout,
        history: IterateHistory,
        rank_report: RankReport,
    ) -> Self {
        Self {
            algorithm,
            layout,
            converged: history.converged,
            iterations: history.iterations(),
            history,
            rank_report,
            reference: None,
        }
    }

    /// Computes normalized errors of every iterate against `(p_ref, k_ref)`.
    pub fn attach_reference(&mut self, p_ref: &DMatrix<f64>, k_ref: &DMatrix<f64>) -> Result<()> {
        let shape_ok =
            |r: &IterateRecord| r.p.shape() == p_ref.shape() && r.gain.shape() == k_ref.shape();
        if !self.history.records.iter().all(shape_ok)
            || self.history.final_gain.shape() != k_ref.shape()
        {
            return Err(Error::Dimension(
                "reference does not match the iterates".into(),
            ));
        }
        let value = self
            .history
            .records
            .iter()
            .map(|r| normalized_error(&r.p, p_ref))
            .collect();
        let gain = self
            .history
            .records
            .iter()
            .map(|r| normalized_error(&r.gain, k_ref))
            .collect();
        self.reference = Some(ReferenceErrors {
            value,
            gain,
            final_value: normalized_error(&self.history.final_p, p_ref),
            final_gain: normalized_error(&self.history.final_gain, k_ref),
        });
        Ok(())
    }

    /// Iterate log: `k, vecs(P_k).., vec(K_k).., p_error, k_error,
    /// increment_ratio, reset`.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(first) = self.history.records.first() else {
            return writeln!(w, "k");
        };
        let dp = packed_len(first.p.nrows());
        let dk = first.gain.len();
        let mut header = vec!["k".to_string()];
        header.extend((1..=dp).map(|i| format!("vecs_p{i}")));
        header.extend((1..=dk).map(|i| format!("vec_k{i}")));
        header.extend(["p_error", "k_error", "increment_ratio", "reset"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let num = |v: f64| format!("{v:.16e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        for (i, r) in self.history.records.iter().enumerate() {
            let mut fields = vec![r.k.to_string()];
            fields.extend(vecs_unchecked(&r.p).iter().map(|v| num(*v)));
            fields.extend(r.gain.iter().map(|v| num(*v)));
            let errs = self.reference.as_ref();
            fields.push(opt(errs.map(|e| e.value[i])));
            fields.push(opt(errs.map(|e| e.gain[i])));
            fields.push(opt(r.increment_ratio));
            fields.push(u8::from(r.reset).to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn gate(stacks: &DataStacks, algorithm: Algorithm, rank_tol: f64) -> Result<RankReport> {
    if stacks.kind != algorithm.stack_kind() {
        return Err(Error::InvalidArgument(format!(
            "{algorithm} needs {:?} stacks, got {:?}",
            algorithm.stack_kind(),
            stacks.kind
        )));
    }
    let report = stacks.rank_report(rank_tol);
    let entry = report
        .get(algorithm.rank_condition())
        .expect("report covers every condition of its kind");
    if !entry.satisfied {
        return Err(Error::RankDeficient {
            condition: algorithm.rank_condition().name().to_string(),
            achieved: entry.achieved,
            required: entry.required,
            report: Box::new(report),
        });
    }
    Ok(report)
}

fn check_square(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if m.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    linalg::symmetrize(m)
}

fn check_gain(name: &str, k: &DMatrix<f64>, m: usize, dim: usize) -> Result<()> {
    if k.shape() != (m, dim) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {m}x{dim}",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

fn r_inverse(r: &DMatrix<f64>, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = check_square("R", r, m)?;
    if linalg::min_sym_eigenvalue(&r) <= 0.0 {
        return Err(Error::InvalidArgument("R must be positive definite".into()));
    }
    let inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R is singular".into()))?;
    Ok((r, inv))
}

/// Runs the shared PI loop. `step` maps the current gain to `(P_k, K_{k+1})`.
fn policy_iteration<F>(k0: &DMatrix<f64>, opts: &PiOptions, mut step: F) -> Result<IterateHistory>
where
    F: FnMut(&DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "PI tolerance must be positive".into(),
        ));
    }
    let mut records: Vec<IterateRecord> = Vec::new();
    let mut gain = k0.clone();
    let mut converged = false;
    for k in 0..opts.max_iters {
        let (p, next_gain) = step(&gain)?;
        let size = norm2(&p).max(norm2(&next_gain));
        if !(size <= ITERATE_DIVERGENCE_NORM) {
            return Err(Error::IterateDivergence {
                step: k,
                norm: size,
            });
        }
        let delta = records.last().map(|prev| norm2(&(&p - &prev.p)));
        records.push(IterateRecord {
            k,
            p,
            gain,
            are_residual: None,
            closed_loop_abscissa: None,
            increment_ratio: None,
            reset: false,
        });
        gain = next_gain;
        if matches!(delta, Some(d) if d < opts.tol) {
            converged = true;
            break;
        }
    }
    let final_p = records
        .last()
        .map(|r| r.p.clone())
        .unwrap_or_else(|| DMatrix::zeros(0, 0));
    Ok(IterateHistory {
        records,
        converged,
        resets: 0,
        final_p,
        final_gain: gain,
    })
}

/// `[delta, -2 Gamma_aa (I (x) K'R) + 2 Gamma_au (I (x) R)]` and
/// `-Gamma_aa vec(K'RK) - cost`, shared by the state and original output
/// PI regressions.
fn pi_regression(
    stacks: &DataStacks,
    r: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    cost: &DVector<f64>,
    layout: UnknownLayout,
) -> Result<Regression> {
    let dim = stacks.dim;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let ktr = gain.transpose() * r;
    let gain_block =
        (&stacks.gamma_aa * kron(&eye, &ktr)) * -2.0 + (&stacks.gamma_au * kron(&eye, r)) * 2.0;
    let design = linalg::hcat(&[&stacks.delta, &gain_block])?;
    let target = -(&stacks.gamma_aa * vec(&(&ktr * gain))) - cost;
    Regression::new(design, target, layout)
}

/// State-feedback PI from `x`-stacks: per iteration solves for `P_k` and
/// `K_{k+1}` jointly. `q` is the `n x n` state weight.
pub fn state_pi(
    stacks: &DataStacks,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k0: &DMatrix<f64>,
    opts: &PiOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::StatePi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (n, m) = (stacks.dim, stacks.m);
    let q = check_square("Q", q, n)?;
    let (r, _) = r_inverse(r, m)?;
    check_gain("K0", k0, m, n)?;
    let layout = algorithm.layout(n, m);
    let state_cost = &stacks.gamma_aa * vec(&q);
    let history = policy_iteration(k0, opts, |gain| {
        let (p, next) = pi_regression(stacks, &r, gain, &state_cost, layout)?.solve()?;
        Ok((p, next.expect("layout carries a gain")))
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

/// State-feedback VI from `x`-stacks: solves `(H_k, K_k)` with
/// `H_k = A'P_k + P_k A` and steps `P + eps (H - K'RK + Q)`.
pub fn state_vi(
    stacks: &DataStacks,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    opts: &ViOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::StateVi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (n, m) = (stacks.dim, stacks.m);
    let q = check_square("Q", q, n)?;
    let (r, _) = r_inverse(r, m)?;
    check_square("P0", p0, n)?;
    let layout = algorithm.layout(n, m);
    let design = linalg::hcat(&[&stacks.i_aa, &(&stacks.i_au * -2.0)])?;
    let pinv = PseudoInverse::new(&design, SOLVE_RTOL);
    let history = value_iteration(p0, &opts.schedule, |p| {
        let target = &stacks.delta * vecs_unchecked(p);
        let (h, gain) = layout.unpack(&pinv.apply(&target))?;
        let gain = gain.expect("layout carries a gain");
        let direction = h - gain.transpose() * &r * &gain + &q;
        Ok(ViStep {
            direction,
            gain,
            are_residual: None,
            closed_loop_abscissa: None,
        })
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

/// Original output-feedback PI: unknowns `vecs(P_k)` and `vec(K_{k+1})`
/// over `zeta`-stacks, costs from measured `y`.
pub fn output_pi_original(
    stacks: &DataStacks,
    q_y: &DMatrix<f64>,
    r: &DMatrix<f64>,
    kbar0: &DMatrix<f64>,
    opts: &PiOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::OutputPi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (nz, m) = (stacks.dim, stacks.m);
    let q_y = check_square("Q_y", q_y, stacks.p)?;
    let (r, _) = r_inverse(r, m)?;
    check_gain("Kbar0", kbar0, m, nz)?;
    let layout = algorithm.layout(nz, m);
    let output_cost = &stacks.gamma_yy * vec(&q_y);
    let history = policy_iteration(kbar0, opts, |gain| {
        let (p, next) = pi_regression(stacks, &r, gain, &output_cost, layout)?.solve()?;
        Ok((p, next.expect("layout carries a gain")))
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

/// Original output-feedback VI: solves `(H_k, K_k)` and steps
/// `P + eps (H - K'RK)`, with `H` absorbing the output cost.
pub fn output_vi_original(
    stacks: &DataStacks,
    q_y: &DMatrix<f64>,
    r: &DMatrix<f64>,
    pbar0: &DMatrix<f64>,
    opts: &ViOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::OutputVi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (nz, m) = (stacks.dim, stacks.m);
    let q_y = check_square("Q_y", q_y, stacks.p)?;
    let (r, _) = r_inverse(r, m)?;
    check_square("Pbar0", pbar0, nz)?;
    let layout = algorithm.layout(nz, m);
    let design = linalg::hcat(&[&stacks.i_aa, &(&stacks.i_au * -2.0)])?;
    let pinv = PseudoInverse::new(&design, SOLVE_RTOL);
    let output_cost = &stacks.i_yy * vecs_unchecked(&q_y);
    let history = value_iteration(pbar0, &opts.schedule, |p| {
        let target = &stacks.delta * vecs_unchecked(p) + &output_cost;
        let (h, gain) = layout.unpack(&pinv.apply(&target))?;
        let gain = gain.expect("layout carries a gain");
        let direction = h - gain.transpose() * &r * &gain;
        Ok(ViStep {
            direction,
            gain,
            are_residual: None,
            closed_loop_abscissa: None,
        })
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

fn check_b_zeta(b_zeta: &DMatrix<f64>, nz: usize, m: usize) -> Result<()> {
    if b_zeta.shape() != (nz, m) {
        return Err(Error::Dimension(format!(
            "B_zeta is {}x{}, expected {nz}x{m}",
            b_zeta.nrows(),
            b_zeta.ncols()
        )));
    }
    Ok(())
}

/// Reduced-variable output PI: the gain update is closed form,
/// `K_{k+1} = -R^-1 B_zeta' P_k`, so only `vecs(P_k)` is regressed.
pub fn output_pi_improved(
    stacks: &DataStacks,
    q_y: &DMatrix<f64>,
    r: &DMatrix<f64>,
    b_zeta: &DMatrix<f64>,
    kbar0: &DMatrix<f64>,
    opts: &PiOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::ImprovedPi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (nz, m) = (stacks.dim, stacks.m);
    let q_y = check_square("Q_y", q_y, stacks.p)?;
    let (r, r_inv) = r_inverse(r, m)?;
    check_b_zeta(b_zeta, nz, m)?;
    check_gain("Kbar0", kbar0, m, nz)?;
    let layout = algorithm.layout(nz, m);
    let eye = DMatrix::<f64>::identity(nz, nz);
    let dup = duplication_matrix(nz);
    let bt = b_zeta.transpose();
    // gain-independent part: delta - 2 Gamma_zu (I (x) B') N
    let base = &stacks.delta - (&stacks.gamma_au * kron(&eye, &bt) * &dup) * 2.0;
    let output_cost = &stacks.gamma_yy * vec(&q_y);
    let history = policy_iteration(kbar0, opts, |gain| {
        let kb = gain.transpose() * &bt;
        let design = &base + (&stacks.gamma_aa * kron(&eye, &kb) * &dup) * 2.0;
        let target = -(&stacks.gamma_aa * vec(&(gain.transpose() * &r * gain))) - &output_cost;
        let (p, _) = Regression::new(design, target, layout)?.solve()?;
        let next = -(&r_inv * &bt * &p);
        Ok((p, next))
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

/// Reduced-variable output VI: `K_k = -R^-1 B_zeta' P_k` in closed form,
/// only `vecs(H_k)` is regressed on the constant design `I_zz`, and the
/// step is `P + eps (H - P B_zeta R^-1 B_zeta' P)`.
pub fn output_vi_improved(
    stacks: &DataStacks,
    q_y: &DMatrix<f64>,
    r: &DMatrix<f64>,
    b_zeta: &DMatrix<f64>,
    pbar0: &DMatrix<f64>,
    opts: &ViOptions,
) -> Result<AdpResult> {
    let algorithm = Algorithm::ImprovedVi;
    let report = gate(stacks, algorithm, opts.rank_tol)?;
    let (nz, m) = (stacks.dim, stacks.m);
    let q_y = check_square("Q_y", q_y, stacks.p)?;
    let (_, r_inv) = r_inverse(r, m)?;
    check_b_zeta(b_zeta, nz, m)?;
    check_square("Pbar0", pbar0, nz)?;
    let layout = algorithm.layout(nz, m);
    let pinv = PseudoInverse::new(&stacks.i_aa, SOLVE_RTOL);
    let output_cost = &stacks.i_yy * vecs_unchecked(&q_y);
    let bt = b_zeta.transpose();
    let g = b_zeta * &r_inv * &bt;
    let history = value_iteration(pbar0, &opts.schedule, |p| {
        let gain = -(&r_inv * &bt * p);
        let target =
            &stacks.delta * vecs_unchecked(p) + &output_cost + (&stacks.i_au * vec(&gain)) * 2.0;
        let (h, _) = layout.unpack(&pinv.apply(&target))?;
        let direction = h - p * &g * p;
        Ok(ViStep {
            direction,
            gain,
            are_residual: None,
            closed_loop_abscissa: None,
        })
    })?;
    Ok(AdpResult::new(algorithm, layout, history, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_counts() {
        // n = 5, m = 5, p = 1 gives n_zeta = 30
        let nz = 30;
        let orig = Algorithm::OutputPi.layout(nz, 5).unknowns();
        let improved = Algorithm::ImprovedPi.layout(nz, 5).unknowns();
        assert_eq!(orig, 615);
        assert_eq!(improved, 465);
        assert_eq!(
            Algorithm::OutputVi.layout(nz, 5).unknowns()
                - Algorithm::ImprovedVi.layout(nz, 5).unknowns(),
            5 * nz
        );
    }

    #[test]
    fn unpack_splits_blocks() {
        let layout = UnknownLayout::ValueAndGain { dim: 2, m: 1 };
        let sol = DVector::from_vec(vec![1.0, 4.0, 3.0, 5.0, 6.0]);
        let (p, k) = layout.unpack(&sol).unwrap();
        assert_eq!(p, nalgebra::dmatrix![1.0, 2.0; 2.0, 3.0]);
        assert_eq!(k.unwrap(), nalgebra::dmatrix![5.0, 6.0]);
        assert!(layout.unpack(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn regression_shape_checked() {
        let layout = UnknownLayout::ValueOnly { dim: 2 };
        assert!(Regression::new(DMatrix::zeros(4, 3), DVector::zeros(4), layout).is_ok());
        assert!(Regression::new(DMatrix::zeros(4, 2), DVector::zeros(4), layout).is_err());
        let reg = Regression::new(DMatrix::zeros(2, 3), DVector::zeros(2), layout).unwrap();
        assert!(reg.is_underdetermined());
    }
}
