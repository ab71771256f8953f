//! Weighted lasso Cox regression for heterogeneous patient subgroups.
//!
//! Subgroup-specific Cox models are fitted on the pooled cohort, with each
//! patient weighted by how likely it is to belong to the target subgroup
//! (`w_s = p(s | t, d, x) / p(s)`, estimated by a cross-validated classifier)
//! or by a fixed down-weighting of the other subgroups. The crate also ships
//! the Weibull simulation design and the repeated train/test experiment used
//! to compare weighting schemes.

pub mod config;
pub mod cox;
pub mod error;
pub mod folds;
pub mod io;
pub mod pipeline;
pub mod simulate;
pub mod survival;
pub mod weights;

pub use error::{Error, ErrorKind, Result};
