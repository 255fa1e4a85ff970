//! Variable-value and non-equicardinal symmetries of discrete graphical
//! models, and orbital MCMC samplers that exploit them.

pub mod autograph;
pub mod cli;
pub mod domains;
pub mod error;
pub mod model;
pub mod permgroup;
pub mod reduction;
pub mod samplers;
pub mod symmetry;

pub use error::{Error, ParseError, Result};
