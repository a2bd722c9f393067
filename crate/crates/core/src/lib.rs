//! Concentration residuals for uniform generalization errors of linear
//! binary classifiers with Gaussian inputs, and the Monte-Carlo machinery
//! that checks them.

pub mod analytics;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod model;
pub mod optimizer;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
