//! Two-branch equilibrium income distribution with threshold Langevin
//! dynamics: closed-form density and exceedance, a quadrature oracle,
//! ensemble simulation, Weibull-rank empirical curves, survey/rich-list
//! matching and parameter fitting.

pub mod empirical;
pub mod error;
pub mod fit;
pub mod interp;
pub mod io;
pub mod matching;
pub mod model;
pub mod quad;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
