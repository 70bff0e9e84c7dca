use thiserror::Error;

use crate::stacks::RankReport;

/// Errors raised by the numerical kernels and iteration engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyVector,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    Asymmetric { asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectrum conflict: Lyapunov operator is singular or ill-conditioned")]
    SpectrumConflict,

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("Hamiltonian has near-imaginary-axis eigenvalues (sign iteration did not converge)")]
    SignNotConverged,

    #[error("stabilizing subspace extraction failed: {0}")]
    ExtractionFailed(String),

    #[error("initial gain not stabilizing (spectral abscissa {abscissa:.6})")]
    NotStabilizing { abscissa: f64 },

    #[error("pair is not observable (observability rank {rank} < {n})")]
    NotObservable { rank: usize, n: usize },

    #[error("multi-output pole placement is not supported: supply L explicitly")]
    SupplyGainExplicitly,

    #[error("polynomial/gain mismatch: resolvent recursion residual {residual:.3e}")]
    PolynomialGainMismatch { residual: f64 },

    #[error("grid alignment: {0}")]
    GridAlignment(String),

    #[error("divergence at t = {time}: state norm {norm:.3e}")]
    Divergence {
        time: f64,
        norm: f64,
        /// Samples integrated before the blow-up.
        partial: Box<crate::sim::Trajectory>,
    },

    #[error("iterate diverged at step {step}: norm {norm:.3e}")]
    IterateDivergence { step: usize, norm: f64 },

    #[error("rank condition '{condition}' not satisfied: rank {achieved} < {required}")]
    RankDeficient {
        condition: String,
        achieved: usize,
        required: usize,
        report: Box<RankReport>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
