//! Generalized fiducial distributions for one-parameter families.
//!
//! The crate builds exact fiducial densities from a likelihood and the
//! Jacobian of a data-generating equation, evaluates first- and second-order
//! probability-matching coefficients, computes MLE-centred expansions of the
//! fiducial density and quantiles, and runs reproducible coverage studies.

pub mod dge;
pub mod error;
pub mod expansion;
pub mod fiducial;
pub mod matching;
pub mod models;
pub mod numdiff;
pub mod quadrature;
pub mod real;
pub mod simharness;
pub mod special;

pub use dge::{Dge, InvCdfWeight};
pub use error::{GfdError, Result};
pub use models::{MleResult, Model, Obs, ParamDomain, Sample};
