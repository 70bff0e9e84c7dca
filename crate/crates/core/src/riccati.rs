//! Model-based Riccati machinery: the Hamiltonian sign-function oracle,
//! Kleinman policy iteration, stochastic-approximation value iteration and
//! the infinite-horizon cost matrix of a fixed gain.
//!
//! Everything here reads the plant matrices directly and serves as ground
//! truth for the data-driven engines in [`crate::adp`].

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};
use crate::linalg::{self, least_squares, norm2, symmetrize};

const SIGN_MAX_ITERS: usize = 100;
const SIGN_TOL: f64 = 1e-12;
/// Eigenvalues of a PSD input may dip this far below zero.
const PSD_INPUT_TOL: f64 = 1e-10;

/// `A'P + PA + Q - P B R^-1 B' P = 0` together with its data.
#[derive(Debug, Clone, PartialEq)]
pub struct AreProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    /// `B R^-1 B'`
    g: DMatrix<f64>,
}

impl AreProblem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let m = b.ncols();
        if b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "A {n}x{n}, B {}x{}, Q {}x{}, R {}x{}",
                b.nrows(),
                b.ncols(),
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let q = symmetrize(&q)?;
        let r = symmetrize(&r)?;
        let q_scale = q.amax().max(1.0);
        if linalg::min_sym_eigenvalue(&q) < -PSD_INPUT_TOL * q_scale {
            return Err(Error::InvalidArgument(
                "Q must be positive semidefinite".into(),
            ));
        }
        if linalg::min_sym_eigenvalue(&r) <= 0.0 {
            return Err(Error::InvalidArgument("R must be positive definite".into()));
        }
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("R is singular".into()))?;
        let g = &b * &r_inv * b.transpose();
        Ok(Self {
            a,
            b,
            q,
            r,
            r_inv,
            g,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    /// Riccati operator `A'P + PA + Q - P B R^-1 B' P`.
    pub fn residual(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        self.a.transpose() * p + p * &self.a + &self.q - p * &self.g * p
    }

    pub fn residual_norm(&self, p: &DMatrix<f64>) -> f64 {
        norm2(&self.residual(p))
    }

    /// Residual norm over the size of the terms it balances,
    /// `2|A||P| + |Q| + |B R^-1 B'||P|^2`. Zero only at an exact solution.
    pub fn relative_residual(&self, p: &DMatrix<f64>) -> f64 {
        let np = norm2(p);
        let scale = 2.0 * norm2(&self.a) * np + norm2(&self.q) + norm2(&self.g) * np * np;
        if scale == 0.0 {
            return self.residual_norm(p);
        }
        self.residual_norm(p) / scale
    }

    /// Greedy gain `-R^-1 B' P`.
    pub fn gain(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        -(&self.r_inv * self.b.transpose() * p)
    }

    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }
}

/// Stabilizing solution of an ARE and its gain.
#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

/// Eigenvalues of a general square matrix via real Schur form.
pub fn eigenvalues(f: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !f.is_square() {
        return Err(Error::NotSquare {
            rows: f.nrows(),
            cols: f.ncols(),
        });
    }
    if f.is_empty() {
        return Ok(Vec::new());
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let schur = Schur::try_new(f.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum of `f`.
pub fn spectral_abscissa(f: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(f)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn log_abs_det_and_inverse(z: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let lu = z.clone().lu();
    let u = lu.u();
    let mut logdet = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        logdet += d.ln();
    }
    let inv = lu.try_inverse()?;
    Some((logdet, inv))
}

/// Stabilizing ARE solution from the matrix sign function of the
/// Hamiltonian `[[A, -BR^-1B'], [-Q, -A']]`, computed by the scaled Newton
/// iteration `Z <- (Z/c + c Z^-1)/2` with determinantal scaling.
pub fn solve_are_sign(prob: &AreProblem) -> Result<AreSolution> {
    let n = prob.n();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&prob.g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&prob.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.a.transpose()));

    let mut z = h;
    let mut scaling = true;
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITERS {
        let (logdet, zinv) = log_abs_det_and_inverse(&z).ok_or(Error::SignNotConverged)?;
        let c = if scaling {
            (logdet / (2 * n) as f64).exp()
        } else {
            1.0
        };
        let next = (&z / c + zinv * c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if !change.is_finite() {
            return Err(Error::SignNotConverged);
        }
        if change < 1e-2 {
            scaling = false;
        }
        if change < SIGN_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SignNotConverged);
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = z.view((0, 0), (n, n)).clone_owned();
    let w12 = z.view((0, n), (n, n)).clone_owned();
    let w21 = z.view((n, 0), (n, n)).clone_owned();
    let w22 = z.view((n, n), (n, n)).clone_owned();
    let lhs = linalg::vcat(&[&w12, &(w22 + &eye)])?;
    let rhs = -linalg::vcat(&[&(w11 + &eye), &w21])?;

    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = rhs.column(j).clone_owned();
        let sol = least_squares(&lhs, &col, 1e-12)?;
        if sol.rank < n {
            return Err(Error::ExtractionFailed(format!(
                "invariant subspace rank {} < {n}",
                sol.rank
            )));
        }
        p.set_column(j, &sol.x);
    }
    let p = (&p + p.transpose()) * 0.5;
    let k = prob.gain(&p);
    let abscissa = spectral_abscissa(&prob.closed_loop(&k))?;
    if abscissa >= 0.0 {
        return Err(Error::ExtractionFailed(format!(
            "closed loop not Hurwitz (abscissa {abscissa:.3e})"
        )));
    }
    Ok(AreSolution { p, k })
}

/// One entry of an iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    /// Value matrix of this iterate.
    pub p: DMatrix<f64>,
    /// For PI the policy under evaluation; for VI the greedy gain of `p`.
    pub gain: DMatrix<f64>,
    /// Riccati residual norm of `p`, when the model is known.
    pub are_residual: Option<f64>,
    /// Spectral abscissa of the closed loop under `gain`, when the model is
    /// known.
    pub closed_loop_abscissa: Option<f64>,
    /// VI only: `|P~_{k+1} - P_k| / eps_k`.
    pub increment_ratio: Option<f64>,
    /// VI only: set when this step left the bounded set and reset.
    pub reset: bool,
}

/// Ordered log of iterates plus the returned approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateHistory {
    pub records: Vec<IterateRecord>,
    pub converged: bool,
    /// Number of bound-set resets (VI).
    pub resets: usize,
    pub final_p: DMatrix<f64>,
    pub final_gain: DMatrix<f64>,
}

impl IterateHistory {
    /// Number of iterations performed before returning.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Kleinman policy iteration: evaluate `K_k` by a Lyapunov solve, improve
/// with `K_{k+1} = -R^-1 B' P_k`, stop once `|P_k - P_{k-1}| < tol`.
pub fn kleinman_pi(
    prob: &AreProblem,
    k0: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<IterateHistory> {
    if k0.shape() != (prob.m(), prob.n()) {
        return Err(Error::Dimension(format!(
            "K0 is {}x{}, expected {}x{}",
            k0.nrows(),
            k0.ncols(),
            prob.m(),
            prob.n()
        )));
    }
    let abscissa0 = spectral_abscissa(&prob.closed_loop(k0))?;
    if abscissa0 >= 0.0 {
        return Err(Error::NotStabilizing {
            abscissa: abscissa0,
        });
    }
    let mut records: Vec<IterateRecord> = Vec::new();
    let mut gain = k0.clone();
    let mut converged = false;
    for k in 0..max_iters {
        let closed = prob.closed_loop(&gain);
        let abscissa = spectral_abscissa(&closed)?;
        let w = &prob.q + gain.transpose() * &prob.r * &gain;
        let p = linalg::solve_lyapunov(&closed, &w)?;
        let next_gain = prob.gain(&p);
        let delta = records.last().map(|prev| norm2(&(&p - &prev.p)));
        records.push(IterateRecord {
            k,
            are_residual: Some(prob.residual_norm(&p)),
            closed_loop_abscissa: Some(abscissa),
            increment_ratio: None,
            reset: false,
            p,
            gain,
        });
        gain = next_gain;
        if matches!(delta, Some(d) if d < tol) {
            converged = true;
            break;
        }
    }
    let final_p = records
        .last()
        .map(|r| r.p.clone())
        .unwrap_or_else(|| DMatrix::zeros(prob.n(), prob.n()));
    Ok(IterateHistory {
        records,
        converged,
        resets: 0,
        final_p,
        final_gain: gain,
    })
}

/// Step sizes `eps_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `scale / (k + offset)`
    Harmonic { scale: f64, offset: f64 },
    /// `scale / (k + offset)^exponent`, `exponent` in `(1/2, 1]`.
    Power {
        scale: f64,
        offset: f64,
        exponent: f64,
    },
}

impl StepSize {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSize::Harmonic { scale, offset } => scale / (k as f64 + offset),
            StepSize::Power {
                scale,
                offset,
                exponent,
            } => scale / (k as f64 + offset).powf(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let (scale, offset, exponent) = match *self {
            StepSize::Harmonic { scale, offset } => (scale, offset, 1.0),
            StepSize::Power {
                scale,
                offset,
                exponent,
            } => (scale, offset, exponent),
        };
        if !(scale > 0.0 && offset > 0.0 && exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidArgument(
                "step size needs scale > 0, offset > 0 and exponent in (0.5, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Norm caps of the nested bounded sets `B_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundSchedule {
    /// `base * (q + 1)`
    Linear { base: f64 },
}

impl BoundSchedule {
    pub fn cap(&self, q: usize) -> f64 {
        match *self {
            BoundSchedule::Linear { base } => base * (q as f64 + 1.0),
        }
    }
}

/// Configuration of a value-iteration loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViSchedule {
    pub step: StepSize,
    pub bound: BoundSchedule,
    /// Threshold on `|P~_{k+1} - P_k| / eps_k`.
    pub tol: f64,
    pub max_iters: usize,
    /// Consecutive ratio-test hits needed to declare convergence.
    pub required_hits: usize,
    /// Eigenvalues below `-psd_tol` count as leaving the PSD cone.
    pub psd_tol: f64,
}

impl ViSchedule {
    pub fn new(step: StepSize, bound: BoundSchedule, tol: f64, max_iters: usize) -> Self {
        Self {
            step,
            bound,
            tol,
            max_iters,
            required_hits: 3,
            psd_tol: 1e-8,
        }
    }

    pub fn with_required_hits(mut self, hits: usize) -> Self {
        self.required_hits = hits;
        self
    }

    fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !(self.tol > 0.0) || self.required_hits == 0 {
            return Err(Error::InvalidArgument(
                "VI needs tol > 0 and at least one required hit".into(),
            ));
        }
        let BoundSchedule::Linear { base } = self.bound;
        if !(base > 0.0) {
            return Err(Error::InvalidArgument("bound base must be positive".into()));
        }
        Ok(())
    }
}

/// What a VI engine produces for the current iterate `P_k`.
pub(crate) struct ViStep {
    /// Bracket multiplied by `eps_k` in the update.
    pub direction: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub are_residual: Option<f64>,
    pub closed_loop_abscissa: Option<f64>,
}

/// The shared loop: `P~ = P_k + eps_k D(P_k)`, reset to `P_0` when `P~`
/// leaves `B_q`, stop on the ratio test.
pub(crate) fn value_iteration<F>(
    p0: &DMatrix<f64>,
    sched: &ViSchedule,
    mut step_fn: F,
) -> Result<IterateHistory>
where
    F: FnMut(&DMatrix<f64>) -> Result<ViStep>,
{
    sched.validate()?;
    let p0 = symmetrize(p0)?;
    let scale = p0.amax().max(1.0);
    if linalg::min_sym_eigenvalue(&p0) < -PSD_INPUT_TOL * scale {
        return Err(Error::InvalidArgument(
            "P0 must be positive semidefinite".into(),
        ));
    }
    let mut records = Vec::new();
    let mut p = p0.clone();
    let mut q = 0usize;
    let mut hits = 0usize;
    let mut resets = 0usize;
    for k in 0..sched.max_iters {
        let step = step_fn(&p)?;
        let eps = sched.step.at(k);
        let candidate = &p + &step.direction * eps;
        let candidate = (&candidate + candidate.transpose()) * 0.5;
        let ratio = norm2(&(&candidate - &p)) / eps;
        let outside = !candidate.iter().all(|v| v.is_finite())
            || norm2(&candidate) >= sched.bound.cap(q)
            || linalg::min_sym_eigenvalue(&candidate) < -sched.psd_tol;
        let mut record = IterateRecord {
            k,
            p: p.clone(),
            gain: step.gain.clone(),
            are_residual: step.are_residual,
            closed_loop_abscissa: step.closed_loop_abscissa,
            increment_ratio: Some(ratio),
            reset: false,
        };
        if outside {
            record.reset = true;
            records.push(record);
            p = p0.clone();
            q += 1;
            resets += 1;
            hits = 0;
            continue;
        }
        if ratio < sched.tol {
            hits += 1;
            if hits >= sched.required_hits {
                records.push(record);
                return Ok(IterateHistory {
                    records,
                    converged: true,
                    resets,
                    final_p: p,
                    final_gain: step.gain,
                });
            }
        } else {
            hits = 0;
        }
        records.push(record);
        p = candidate;
    }
    let final_gain = records
        .last()
        .map(|r| r.gain.clone())
        .unwrap_or_else(|| DMatrix::zeros(0, 0));
    Ok(IterateHistory {
        records,
        converged: false,
        resets,
        final_p: p,
        final_gain,
    })
}

/// Model-based value iteration from any PSD `P0`.
pub fn model_vi(
    prob: &AreProblem,
    p0: &DMatrix<f64>,
    sched: &ViSchedule,
) -> Result<IterateHistory> {
    if p0.shape() != (prob.n(), prob.n()) {
        return Err(Error::Dimension("P0 does not match A".into()));
    }
    value_iteration(p0, sched, |p| {
        let direction = prob.residual(p);
        let gain = prob.gain(p);
        Ok(ViStep {
            are_residual: Some(norm2(&direction)),
            closed_loop_abscissa: None,
            direction,
            gain,
        })
    })
}

/// Infinite-horizon cost matrix of a fixed gain.
#[derive(Debug, Clone, PartialEq)]
pub enum CostMatrix {
    Finite(DMatrix<f64>),
    Infinite,
}

impl CostMatrix {
    pub fn finite(&self) -> Option<&DMatrix<f64>> {
        match self {
            CostMatrix::Finite(v) => Some(v),
            CostMatrix::Infinite => None,
        }
    }
}

/// `V_K = int_0^inf e^{(A+BK)'t} (Q + K'RK) e^{(A+BK)t} dt`, finite iff the
/// closed loop is Hurwitz.
pub fn cost_matrix(prob: &AreProblem, k: &DMatrix<f64>) -> Result<CostMatrix> {
    let closed = prob.closed_loop(k);
    if spectral_abscissa(&closed)? >= 0.0 {
        return Ok(CostMatrix::Infinite);
    }
    let w = &prob.q + k.transpose() * &prob.r * k;
    Ok(CostMatrix::Finite(linalg::solve_lyapunov(&closed, &w)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_problem() -> AreProblem {
        AreProblem::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]).unwrap()
    }

    #[test]
    fn scalar_oracle() {
        let sol = solve_are_sign(&scalar_problem()).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.k[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_residual_is_scale_free() {
        // x' = x + u, q = 1, r = 1: p = 1 + sqrt 2
        let prob =
            AreProblem::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let exact = dmatrix![1.0 + 2f64.sqrt()];
        assert!(prob.relative_residual(&exact) < 1e-15);
        let off = dmatrix![2.5];
        // residual 2p + 1 - p^2 over 2p + 1 + p^2
        let want = (5.0 + 1.0 - 6.25f64).abs() / (5.0 + 1.0 + 6.25);
        assert!((prob.relative_residual(&off) - want).abs() < 1e-15);
        let scaled = AreProblem::new(
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![100.0],
            dmatrix![100.0],
        )
        .unwrap();
        assert!((scaled.relative_residual(&(off * 100.0)) - want).abs() < 1e-14);
    }

    #[test]
    fn decoupled_kleinman() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let prob = AreProblem::new(-&eye, eye.clone(), eye.clone(), eye.clone()).unwrap();
        let hist = kleinman_pi(&prob, &DMatrix::zeros(2, 2), 1e-12, 50).unwrap();
        assert!(hist.converged);
        let expected = &eye * (2f64.sqrt() - 1.0);
        assert!((&hist.final_p - expected).amax() < 1e-12);
    }

    #[test]
    fn kleinman_rejects_destabilizing_gain() {
        let err = kleinman_pi(&scalar_problem(), &dmatrix![0.5], 1e-9, 10).unwrap_err();
        assert!(matches!(err, Error::NotStabilizing { .. }));
    }

    #[test]
    fn scalar_vi() {
        let sched = ViSchedule::new(
            StepSize::Harmonic {
                scale: 1.0,
                offset: 1.0,
            },
            BoundSchedule::Linear { base: 100.0 },
            1e-4,
            100_000,
        );
        let hist = model_vi(&scalar_problem(), &dmatrix![0.0], &sched).unwrap();
        assert!(hist.converged);
        assert!((hist.final_p[(0, 0)] - 1.0).abs() < 1e-3);
        // the literal scalar recursion p <- p + eps (1 - p^2)
        let mut p = 0.0;
        for (k, rec) in hist.records.iter().enumerate().take(50) {
            assert!((rec.p[(0, 0)] - p).abs() < 1e-14);
            p += 1.0 / (k as f64 + 1.0) * (1.0 - p * p);
        }
    }

    #[test]
    fn vi_fixed_point_stops_immediately() {
        let prob = scalar_problem();
        let sched = ViSchedule::new(
            StepSize::Harmonic {
                scale: 1.0,
                offset: 1.0,
            },
            BoundSchedule::Linear { base: 10.0 },
            1e-6,
            100,
        );
        let hist = model_vi(&prob, &dmatrix![1.0], &sched.with_required_hits(1)).unwrap();
        assert!(hist.converged);
        assert_eq!(hist.records.len(), 1);
        assert_eq!(hist.records[0].k, 0);
        let hist = model_vi(&prob, &dmatrix![1.0], &sched).unwrap();
        assert_eq!(hist.records.last().unwrap().k, 2);
    }

    #[test]
    fn vi_not_converged_is_partial() {
        let sched = ViSchedule::new(
            StepSize::Harmonic {
                scale: 0.1,
                offset: 1.0,
            },
            BoundSchedule::Linear { base: 100.0 },
            1e-12,
            10,
        );
        let hist = model_vi(&scalar_problem(), &dmatrix![0.0], &sched).unwrap();
        assert!(!hist.converged);
        assert_eq!(hist.records.len(), 10);
    }

    #[test]
    fn vi_reset_on_bound_violation() {
        // tiny cap forces a reset at the first step
        let sched = ViSchedule::new(
            StepSize::Harmonic {
                scale: 5.0,
                offset: 1.0,
            },
            BoundSchedule::Linear { base: 1.0 },
            1e-3,
            5000,
        );
        let hist = model_vi(&scalar_problem(), &dmatrix![0.0], &sched).unwrap();
        assert!(hist.resets >= 1);
        assert!(hist.records[0].reset);
        assert!(hist.converged);
    }

    #[test]
    fn cost_matrix_markers() {
        let prob = scalar_problem();
        assert_eq!(
            cost_matrix(&prob, &dmatrix![0.5]).unwrap(),
            CostMatrix::Infinite
        );
        let v = cost_matrix(&prob, &dmatrix![-1.0]).unwrap();
        assert!((v.finite().unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn abscissa_of_negative_identity() {
        let f = -DMatrix::<f64>::identity(3, 3);
        assert!((spectral_abscissa(&f).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn problem_validation() {
        assert!(
            AreProblem::new(dmatrix![0.0], dmatrix![1.0], dmatrix![-1.0], dmatrix![1.0]).is_err()
        );
        assert!(
            AreProblem::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).is_err()
        );
        assert!(AreProblem::new(
            dmatrix![0.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0],
            dmatrix![1.0]
        )
        .is_err());
    }
}
