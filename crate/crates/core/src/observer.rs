//! State parameterization: the observer polynomial and gain, the companion
//! filters driven by inputs and outputs, the parameterization matrix `M`
//! with `M zeta(t) -> x(t)`, and the ancillary system `(A_zeta, B_zeta)`
//! whose LQR solution is `M' P* M`.
//!
//! `M`, `A_zeta` and `Q_zeta` depend on the plant and are ground truth
//! only. The data-driven engines use the compensator (`Acal`, `b`) and
//! `B_zeta`, all of which are known by construction.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, kron, norm2, numerical_rank};
use crate::plant::{CostSpec, LtiPlant};
use crate::riccati::{eigenvalues, spectral_abscissa};

/// Tolerance on the relative residual of the resolvent recursion.
const RECURSION_TOL: f64 = 1e-8;

/// Monic polynomial `s^n + a_{n-1} s^{n-1} + ... + a_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverPoly {
    /// `a_0, .., a_{n-1}`
    coefficients: Vec<f64>,
}

impl ObserverPoly {
    /// Expands `prod (s - r_i)`.
    pub fn from_roots(roots: &[f64]) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::InvalidArgument(
                "observer polynomial needs degree >= 1".into(),
            ));
        }
        // ascending powers, leading 1 at the end
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= r * ci;
            }
            c = next;
        }
        c.pop();
        Ok(Self { coefficients: c })
    }

    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "observer polynomial needs finite coefficients a_0..a_{n-1}".into(),
            ));
        }
        Ok(Self { coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    /// `a_0, .., a_{n-1}`
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `Lambda(X) = X^n + a_{n-1} X^{n-1} + ... + a_0 I` by Horner's rule.
    pub fn eval_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut acc = eye.clone();
        for &a in self.coefficients.iter().rev() {
            acc = &acc * x + &eye * a;
        }
        acc
    }

    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(spectral_abscissa(&companion_matrix(self))? < 0.0)
    }
}

fn companion_matrix(poly: &ObserverPoly) -> DMatrix<f64> {
    let n = poly.degree();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for (j, &c) in poly.coefficients().iter().enumerate() {
        a[(n - 1, j)] = -c;
    }
    a
}

/// Characteristic polynomial coefficients `a_0..a_{n-1}` of a square
/// matrix (Faddeev-LeVerrier).
pub fn characteristic_coefficients(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut coeffs = vec![0.0; n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        m = a * &m + &eye * c_prev;
        let c = -(a * &m).trace() / k as f64;
        coeffs[n - k] = c;
        c_prev = c;
    }
    coeffs
}

/// Known filter pair `(Acal, b)` replicated over the `m + p` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    pub a_cal: DMatrix<f64>,
    pub b_vec: DMatrix<f64>,
    pub m: usize,
    pub p: usize,
    /// False when the polynomial is not Hurwitz; construction is still
    /// allowed.
    pub hurwitz: bool,
}

impl Compensator {
    pub fn n(&self) -> usize {
        self.a_cal.nrows()
    }

    pub fn n_zeta(&self) -> usize {
        (self.m + self.p) * self.n()
    }

    /// `I_{m+p} (x) Acal`
    pub fn block_a(&self) -> DMatrix<f64> {
        kron(
            &DMatrix::identity(self.m + self.p, self.m + self.p),
            &self.a_cal,
        )
    }

    /// `[I_m (x) b; 0]`, which is also `B_zeta`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_zeta(), self.m);
        let top = kron(&DMatrix::identity(self.m, self.m), &self.b_vec);
        out.view_mut((0, 0), top.shape()).copy_from(&top);
        out
    }

    /// `[0; I_p (x) b]`
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_zeta(), self.p);
        let bottom = kron(&DMatrix::identity(self.p, self.p), &self.b_vec);
        out.view_mut((self.m * self.n(), 0), bottom.shape())
            .copy_from(&bottom);
        out
    }

    /// `zeta' = (I (x) Acal) zeta + [I_m (x) b; 0] u + [0; I_p (x) b] y`
    /// evaluated channel by channel.
    pub fn derivative(&self, zeta: &[f64], u: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.n();
        for ch in 0..self.m + self.p {
            let block = &zeta[ch * n..(ch + 1) * n];
            let w = if ch < self.m { u[ch] } else { y[ch - self.m] };
            for i in 0..n {
                let acc: f64 = block
                    .iter()
                    .enumerate()
                    .map(|(j, z)| self.a_cal[(i, j)] * z)
                    .sum();
                out[ch * n + i] = acc + self.b_vec[(i, 0)] * w;
            }
        }
    }
}

/// Companion form of the polynomial: superdiagonal ones, last row
/// `-a_0 .. -a_{n-1}`, input selector `b = e_n`.
pub fn companion_from_poly(poly: &ObserverPoly, m: usize, p: usize) -> Result<Compensator> {
    let n = poly.degree();
    let a_cal = companion_matrix(poly);
    let mut b_vec = DMatrix::zeros(n, 1);
    b_vec[(n - 1, 0)] = 1.0;
    let hurwitz = poly.is_hurwitz()?;
    Ok(Compensator {
        a_cal,
        b_vec,
        m,
        p,
        hurwitz,
    })
}

/// `[C; CA; ..; CA^{n-1}]`
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut o = DMatrix::zeros(n * p, n);
    let mut row = c.clone();
    for i in 0..n {
        o.view_mut((i * p, 0), (p, n)).copy_from(&row);
        row = &row * a;
    }
    o
}

/// `[B, AB, .., A^{n-1}B]`
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut col = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&col);
        col = a * &col;
    }
    ctrb
}

/// Single-output observer gain by Ackermann's formula,
/// `L = Lambda(A) O^-1 e_n`.
pub fn place_observer_gain(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    poly: &ObserverPoly,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if c.nrows() != 1 {
        return Err(Error::SupplyGainExplicitly);
    }
    if poly.degree() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "polynomial degree {} and C width {} must equal n = {n}",
            poly.degree(),
            c.ncols()
        )));
    }
    let obs = observability_matrix(a, c);
    let rank = numerical_rank(&obs, 1e-12);
    if rank < n {
        return Err(Error::NotObservable { rank, n });
    }
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let v = obs
        .lu()
        .solve(&e_n)
        .ok_or(Error::NotObservable { rank: n - 1, n })?;
    Ok(poly.eval_matrix(a) * DMatrix::from_column_slice(n, 1, v.as_slice()))
}

/// `M = [M_1 .. M_{m+p}]`, `M_i = [D_0 f_i, .., D_{n-1} f_i]` where the
/// `D_i` follow `D_{n-1} = I`, `D_{i-1} = (A - LC) D_i + a_i I` and `f_i`
/// runs over the columns of `[B L]`.
pub fn build_m(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    l: &DMatrix<f64>,
    poly: &ObserverPoly,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if poly.degree() != n || l.shape() != (n, c.nrows()) || b.nrows() != n {
        return Err(Error::Dimension(
            "build_m inputs are not conformable".into(),
        ));
    }
    let alpha = poly.coefficients();
    let f = a - l * c;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut d = vec![DMatrix::<f64>::zeros(n, n); n];
    d[n - 1] = eye.clone();
    for i in (1..n).rev() {
        d[i - 1] = &f * &d[i] + &eye * alpha[i];
    }
    let closing = &f * &d[0] + &eye * alpha[0];
    let scale = 1.0 + alpha[0].abs() + norm2(&f) * norm2(&d[0]);
    let residual = norm2(&closing) / scale;
    if residual > RECURSION_TOL {
        return Err(Error::PolynomialGainMismatch { residual });
    }
    let drivers = linalg::hcat(&[b, l])?;
    let channels = drivers.ncols();
    let mut m = DMatrix::zeros(n, channels * n);
    for ch in 0..channels {
        let fi = drivers.column(ch);
        for (j, dj) in d.iter().enumerate() {
            m.set_column(ch * n + j, &(dj * fi));
        }
    }
    Ok(m)
}

/// The ancillary system `zeta' = A_zeta zeta + B_zeta u` and its state
/// weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Ancillary {
    pub a_zeta: DMatrix<f64>,
    pub b_zeta: DMatrix<f64>,
    pub q_zeta: DMatrix<f64>,
    pub stabilizable: bool,
    pub detectable: bool,
}

/// PSD square root through the symmetric eigendecomposition.
pub fn psd_sqrt(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = ((q + q.transpose()) * 0.5).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

fn complex_rank(m: &DMatrix<Complex<f64>>, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// PBH test: every eigenvalue with `Re >= 0` keeps `[lambda I - A, B]` at
/// full row rank.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    let ac = complexify(a);
    let bc = complexify(b);
    for lambda in eigenvalues(a)? {
        if lambda.re < -1e-9 {
            continue;
        }
        let mut pbh = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        let shifted = DMatrix::<Complex<f64>>::identity(n, n) * lambda - &ac;
        pbh.view_mut((0, 0), (n, n)).copy_from(&shifted);
        pbh.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
        if complex_rank(&pbh, 1e-9) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Dual PBH test on `(A, C)`.
pub fn is_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<bool> {
    is_stabilizable(&a.transpose(), &c.transpose())
}

/// `A_zeta = I (x) Acal + [0; I_p (x) b] C M`, `B_zeta = [I_m (x) b; 0]`,
/// `Q_zeta = M' C' Q_y C M`, with stabilizability and detectability
/// checked numerically.
pub fn build_ancillary(
    comp: &Compensator,
    m_mat: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q_y: &DMatrix<f64>,
) -> Result<Ancillary> {
    if m_mat.ncols() != comp.n_zeta() || c.ncols() != m_mat.nrows() {
        return Err(Error::Dimension("M does not match the compensator".into()));
    }
    let cm = c * m_mat;
    let a_zeta = comp.block_a() + comp.output_matrix() * &cm;
    let b_zeta = comp.input_matrix();
    let q_zeta = cm.transpose() * q_y * &cm;
    let q_zeta = (&q_zeta + q_zeta.transpose()) * 0.5;
    let stabilizable = is_stabilizable(&a_zeta, &b_zeta)?;
    let detectable = is_detectable(&a_zeta, &(psd_sqrt(q_y) * &cm))?;
    Ok(Ancillary {
        a_zeta,
        b_zeta,
        q_zeta,
        stabilizable,
        detectable,
    })
}

/// Norms of the three parameterization identities
/// `M (I (x) Acal) = (A - LC) M`, `M [I_m (x) b; 0] = B`, `M [0; I_p (x) b] = L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub similarity: f64,
    pub input: f64,
    pub output: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.similarity.max(self.input).max(self.output)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn check_identities(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    l: &DMatrix<f64>,
    comp: &Compensator,
    m_mat: &DMatrix<f64>,
) -> IdentityResiduals {
    let f = a - l * c;
    IdentityResiduals {
        similarity: norm2(&(m_mat * comp.block_a() - &f * m_mat)),
        input: norm2(&(m_mat * comp.input_matrix() - b)),
        output: norm2(&(m_mat * comp.output_matrix() - l)),
    }
}

/// True when `M` has full row rank at relative tolerance `tol`.
pub fn has_full_row_rank(m_mat: &DMatrix<f64>, tol: f64) -> bool {
    numerical_rank(m_mat, tol) == m_mat.nrows()
}

/// Everything derived from the plant, the cost and the observer design.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameterization {
    pub poly: ObserverPoly,
    pub l: DMatrix<f64>,
    pub compensator: Compensator,
    pub m: DMatrix<f64>,
    pub ancillary: Ancillary,
    pub warnings: Vec<String>,
}

impl Parameterization {
    /// Builds the parameterization; `l` is computed by Ackermann when
    /// `None` (single output only), otherwise verified against `poly`.
    pub fn build(
        plant: &LtiPlant,
        cost: &CostSpec,
        poly: &ObserverPoly,
        l: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let l = match l {
            Some(l) => {
                if l.shape() != (plant.n(), plant.p()) {
                    return Err(Error::Dimension("L must be n x p".into()));
                }
                l
            }
            None => place_observer_gain(&plant.a, &plant.c, poly)?,
        };
        let compensator = companion_from_poly(poly, plant.m(), plant.p())?;
        let m = build_m(&plant.a, &plant.b, &plant.c, &l, poly)?;
        let ancillary = build_ancillary(&compensator, &m, &plant.c, &cost.q_y)?;
        let mut warnings = Vec::new();
        if !compensator.hurwitz {
            warnings.push("observer polynomial is not Hurwitz".to_string());
        }
        if !ancillary.stabilizable {
            warnings.push("(A_zeta, B_zeta) failed the stabilizability test".to_string());
        }
        if !ancillary.detectable {
            warnings.push("(A_zeta, sqrt(Q_y) C M) failed the detectability test".to_string());
        }
        Ok(Self {
            poly: poly.clone(),
            l,
            compensator,
            m,
            ancillary,
            warnings,
        })
    }

    pub fn n_zeta(&self) -> usize {
        self.compensator.n_zeta()
    }

    pub fn identities(&self, plant: &LtiPlant) -> IdentityResiduals {
        check_identities(
            &plant.a,
            &plant.b,
            &plant.c,
            &self.l,
            &self.compensator,
            &self.m,
        )
    }
}
