//! Data-driven output-feedback LQR: Riccati oracles, state
//! parameterization through companion filters, trajectory simulation, data
//! stacks and the policy- and value-iteration engines that learn optimal
//! gains from input/output data.

// negated float comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adp;
pub mod error;
pub mod linalg;
pub mod observer;
pub mod plant;
pub mod riccati;
pub mod sim;
pub mod stacks;

pub use error::{Error, Result};
