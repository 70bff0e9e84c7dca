//! Dense kernels behind the vectorized regressions: quadratic-monomial and
//! symmetric packings, Kronecker products, the duplication matrix, Lyapunov
//! solves, minimum-norm least squares and numerical rank.
//!
//! Packing order for `vecv`/`vecs` walks the upper triangle row by row:
//! `(0,0), (0,1), .., (0,n-1), (1,1), .., (n-1,n-1)`. Off-diagonal entries of
//! `vecs` are doubled so that `vecv(x) . vecs(P) = x' P x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry accepted before a "symmetric" input is rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Default relative singular-value cutoff for least squares.
pub const DEFAULT_LSTSQ_RTOL: f64 = 1e-9;

/// Length of a symmetric packing of an `n x n` matrix.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in the packed ordering.
#[inline]
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Quadratic monomials of `b` in packed order.
pub fn vecv(b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    if n == 0 {
        return Err(Error::EmptyVector);
    }
    let mut out = DVector::zeros(packed_len(n));
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            out[idx] = b[i] * b[j];
            idx += 1;
        }
    }
    Ok(out)
}

/// Writes `vecv(b)` into `out` without allocating. `out` must have length
/// `n(n+1)/2`.
pub(crate) fn vecv_into(b: &[f64], out: &mut [f64]) {
    let n = b.len();
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            out[idx] = b[i] * b[j];
            idx += 1;
        }
    }
}

/// Averages `m` with its transpose after checking that the asymmetry is
/// within [`SYMMETRY_TOL`] relative to the largest entry.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax() / scale;
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Symmetric packing with doubled off-diagonal entries.
pub fn vecs(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = symmetrize(p)?;
    Ok(vecs_unchecked(&p))
}

pub(crate) fn vecs_unchecked(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut out = DVector::zeros(packed_len(n));
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            out[idx] = if i == j {
                p[(i, i)]
            } else {
                p[(i, j)] + p[(j, i)]
            };
            idx += 1;
        }
    }
    out
}

/// Inverse of [`vecs`].
pub fn unvecs(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = dim_from_packed(v.len())?;
    let mut p = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                p[(i, i)] = v[idx];
            } else {
                let half = 0.5 * v[idx];
                p[(i, j)] = half;
                p[(j, i)] = half;
            }
            idx += 1;
        }
    }
    Ok(p)
}

/// Recovers `n` from a packed length `n(n+1)/2`.
pub fn dim_from_packed(len: usize) -> Result<usize> {
    let mut n = 0;
    while packed_len(n) < len {
        n += 1;
    }
    if packed_len(n) != len {
        return Err(Error::Dimension(format!(
            "{len} is not a triangular number"
        )));
    }
    Ok(n)
}

/// Symmetric matrix held in `vecs` packing.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: DVector<f64>,
}

impl SymMatrix {
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            dim: m.nrows(),
            packed: vecs(m)?,
        })
    }

    pub fn from_packed(packed: DVector<f64>) -> Result<Self> {
        let dim = dim_from_packed(packed.len())?;
        Ok(Self { dim, packed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `vecs` vector.
    pub fn packed(&self) -> &DVector<f64> {
        &self.packed
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        unvecs(&self.packed).expect("packed length validated at construction")
    }
}

/// Column-stacking vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra stores column-major, which is exactly the stacking order.
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`] for a `rows x cols` target.
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Duplication matrix `N_n` with `N_n vecs(P) = vec(P)` for symmetric `P`.
pub fn duplication_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n * n, packed_len(n));
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                d[(i + j * n, idx)] = 1.0;
            } else {
                d[(i + j * n, idx)] = 0.5;
                d[(j + i * n, idx)] = 0.5;
            }
            idx += 1;
        }
    }
    d
}

/// Block-diagonal assembly.
pub fn blockdiag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Induced 2-norm (largest singular value). Non-finite input yields
/// `inf` or `NaN` instead of reaching the SVD.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return a.iter().map(|v| v.abs()).sum();
    }
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.norm();
    }
    a.singular_values().max()
}

/// Normalized error `|x - reference| / |reference|` in the induced 2-norm.
pub fn normalized_error(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let denom = norm2(reference);
    let num = norm2(&(x - reference));
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}

/// Eigenvalues of a symmetric matrix in ascending order; all `NaN` when
/// an entry is not finite.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return vec![f64::NAN; a.nrows()];
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Solves `F' X + X F + W = 0` by dense Kronecker vectorization.
pub fn solve_lyapunov(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !f.is_square() {
        return Err(Error::NotSquare {
            rows: f.nrows(),
            cols: f.ncols(),
        });
    }
    let n = f.nrows();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension(format!(
            "Lyapunov weight is {}x{}, expected {n}x{n}",
            w.nrows(),
            w.ncols()
        )));
    }
    let w = symmetrize(w)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    let op = kron(&eye, &ft) + kron(&ft, &eye);
    let rhs = -vec(&w);
    let sol = op.lu().solve(&rhs).ok_or(Error::SpectrumConflict)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SpectrumConflict);
    }
    let x = unvec(&sol, n, n)?;
    let x = (&x + x.transpose()) * 0.5;
    let residual = norm2(&(&ft * &x + &x * f + &w));
    let scale = 1.0 + norm2(&w) + 2.0 * norm2(f) * norm2(&x);
    if residual > 1e-9 * scale {
        return Err(Error::SpectrumConflict);
    }
    Ok(x)
}

/// Result of a minimum-norm least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// SVD-backed pseudo-inverse, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pinv: DMatrix<f64>,
    rank: usize,
    singular_values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl PseudoInverse {
    pub fn new(a: &DMatrix<f64>, rtol: f64) -> Self {
        let (rows, cols) = a.shape();
        if a.is_empty() {
            return Self {
                pinv: DMatrix::zeros(cols, rows),
                rank: 0,
                singular_values: Vec::new(),
                rows,
                cols,
            };
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Self {
                pinv: DMatrix::from_element(cols, rows, f64::NAN),
                rank: 0,
                singular_values: vec![f64::NAN; rows.min(cols)],
                rows,
                cols,
            };
        }
        let svd = a.clone().svd(true, true);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let cutoff = rtol * smax;
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut pinv = DMatrix::zeros(cols, rows);
        let mut rank = 0;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > cutoff && s > 0.0 {
                rank += 1;
                let vk = v_t.row(k).transpose();
                let uk = u.column(k);
                pinv += (vk * uk.transpose()) / s;
            }
        }
        sv.sort_by(|x, y| y.total_cmp(x));
        Self {
            pinv,
            rank,
            singular_values: sv,
            rows,
            cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.pinv * b
    }
}

/// Minimum-norm least squares with rank reported at `rtol * sigma_max`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> Result<LstsqSolution> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, target has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "least squares needs at least one row".into(),
        ));
    }
    let pinv = PseudoInverse::new(a, rtol);
    let x = pinv.apply(b);
    let residual = (a * &x - b).norm();
    Ok(LstsqSolution {
        x,
        residual,
        rank: pinv.rank,
        singular_values: pinv.singular_values,
    })
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    if a.iter().any(|v| !v.is_finite()) {
        return vec![f64::NAN; a.nrows().min(a.ncols())];
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    rank_from_singular_values(&singular_values(a), tol)
}

pub fn rank_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Horizontal concatenation.
pub fn hcat(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(Error::Dimension("hcat row mismatch".into()));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    Ok(out)
}

/// Vertical concatenation.
pub fn vcat(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::Dimension("vcat column mismatch".into()));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    #[test]
    fn vecv_small() {
        assert_eq!(vecv(&dvector![1.0, 2.0]).unwrap(), dvector![1.0, 2.0, 4.0]);
        assert_eq!(vecv(&DVector::zeros(3)).unwrap(), DVector::zeros(6));
        assert!(matches!(vecv(&DVector::zeros(0)), Err(Error::EmptyVector)));
    }

    #[test]
    fn vecs_definition() {
        assert_eq!(
            vecs(&DMatrix::identity(2, 2)).unwrap(),
            dvector![1.0, 0.0, 1.0]
        );
        let p = dmatrix![3.0, -1.5; -1.5, 7.0];
        assert_eq!(vecs(&p).unwrap(), dvector![3.0, -3.0, 7.0]);
        assert_eq!(unvecs(&vecs(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn vecs_rejects_bad_inputs() {
        assert!(matches!(
            vecs(&DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let p = dmatrix![1.0, 2.0; 2.1, 1.0];
        assert!(matches!(vecs(&p), Err(Error::Asymmetric { .. })));
        // tiny drift is symmetrized away
        let p = dmatrix![1.0, 2.0; 2.0 + 1e-12, 1.0];
        assert!((vecs(&p).unwrap()[1] - (4.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn duplication_matrix_small() {
        assert_eq!(duplication_matrix(1), dmatrix![1.0]);
        let expected = dmatrix![
            1.0, 0.0, 0.0;
            0.0, 0.5, 0.0;
            0.0, 0.5, 0.0;
            0.0, 0.0, 1.0
        ];
        assert_eq!(duplication_matrix(2), expected);
    }

    #[test]
    fn kron_identity_factor() {
        let b = dmatrix![0.0; 1.0];
        let k = kron(&DMatrix::identity(2, 2), &b);
        assert_eq!(k, dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 0.0; 0.0, 1.0]);
        let m = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(kron(&dmatrix![2.5], &m), &m * 2.5);
    }

    #[test]
    fn lyapunov_diagonal() {
        let f = -DMatrix::<f64>::identity(3, 3);
        let w = DMatrix::<f64>::identity(3, 3) * 2.0;
        let x = solve_lyapunov(&f, &w).unwrap();
        assert!((x - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn lyapunov_spectrum_conflict() {
        // eigenvalues 1 and -1 give lambda_i + lambda_j = 0
        let f = dmatrix![1.0, 0.0; 0.0, -1.0];
        let w = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            solve_lyapunov(&f, &w),
            Err(Error::SpectrumConflict)
        ));
    }

    #[test]
    fn least_squares_identity_and_deficient() {
        let b = dvector![1.0, -2.0, 3.5];
        let sol = least_squares(&DMatrix::identity(3, 3), &b, DEFAULT_LSTSQ_RTOL).unwrap();
        assert!((sol.x - &b).amax() < 1e-14);
        assert_eq!(sol.rank, 3);

        let a = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        let b = dvector![1.0, 0.0, 1.0];
        let sol = least_squares(&a, &b, DEFAULT_LSTSQ_RTOL).unwrap();
        assert_eq!(sol.rank, 1);
        let normal = a.transpose() * (&a * &sol.x - &b);
        assert!(normal.amax() <= 1e-9);
        // minimum-norm: solution lies in the row space, i.e. along [1, 2]
        assert!((sol.x[1] - 2.0 * sol.x[0]).abs() < 1e-12);
    }

    #[test]
    fn rank_basics() {
        assert_eq!(numerical_rank(&DMatrix::identity(5, 5), 1e-9), 5);
        let u = dvector![1.0, 2.0, 3.0];
        let v = dvector![4.0, -1.0];
        assert_eq!(numerical_rank(&(u * v.transpose()), 1e-9), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-9), 0);
    }

    #[test]
    fn packed_dimension_recovery() {
        assert_eq!(dim_from_packed(10).unwrap(), 4);
        assert!(dim_from_packed(7).is_err());
    }
}
