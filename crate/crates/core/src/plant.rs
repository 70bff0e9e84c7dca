use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::riccati::AreProblem;

/// Ground-truth plant `x' = Ax + Bu, y = Cx`. Only simulators and oracles
/// read it; data-driven engines see trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LtiPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n}, B is {}x{}, C is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::Dimension(
                "plant needs at least one input and output".into(),
            ));
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// State-weighted problem with `Q = C' Q_y C`.
    pub fn are_problem(&self, cost: &CostSpec) -> Result<AreProblem> {
        let q = self.c.transpose() * &cost.q_y * &self.c;
        AreProblem::new(self.a.clone(), self.b.clone(), q, cost.r.clone())
    }
}

/// Output and input weights of the quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub q_y: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(q_y: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        Self { q_y, r }
    }

    /// `Q_y = 1, R = 1` for single-input single-output plants.
    pub fn unit_siso() -> Self {
        Self::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1))
    }
}
