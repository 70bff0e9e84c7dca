//! Config-driven experiment runner for the `adp-lqr` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod setup;
pub mod sweep;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use pipeline::run;
pub use report::RunReport;
pub use sweep::sweep;
pub use verify::verify;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ADP_LQR_OUT";

/// `--out` when given, else `$ADP_LQR_OUT`, else `adp-lqr-out`.
pub fn output_root(flag: Option<std::path::PathBuf>) -> std::path::PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(Into::into))
        .unwrap_or_else(|| "adp-lqr-out".into())
}
