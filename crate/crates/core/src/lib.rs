//! Monotonic input-convex Kolmogorov-Arnold networks for discovering
//! hyperelastic strain energy functions from full-field displacement and
//! reaction-force data.

pub mod bspline;
pub mod error;
pub mod evaluation;
pub mod fem;
pub mod hyperelasticity;
pub mod jet;
pub mod network;
pub mod symreg;
pub mod trainer;

pub use error::{Error, Result};
