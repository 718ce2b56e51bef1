//! The two-branch equilibrium income distribution.

mod asymptote;
mod distribution;
mod oracle;
mod params;
mod sampling;

pub use asymptote::{asymptote, Approximant, AsymptoticRegime, Regime};
pub use distribution::{ccdf_eq, normalize, pdf_eq, EyDistribution, TAIL_CUT_FACTOR};
pub use oracle::{pdf_from_integral, IntegralOracle};
pub use params::{
    mds_row, survey_row, EyParams, EyShape, LangevinParams, MDS_ROWS, SURVEY_ROWS,
};
pub use sampling::{sample, InverseCdf};

use crate::error::Result;

/// Effective parameters implied by the Langevin coefficients:
/// `alpha = 1 + a/b`, `alpha1 = 1 + a'/b`, `T = B0/A0`, `T1 = B0/A0'`,
/// `m0 = sqrt(B0/b)`.
pub fn from_langevin(lp: &LangevinParams) -> Result<EyParams> {
    lp.validate()?;
    normalize(&shape_from_langevin(lp))
}

/// The structural part of [`from_langevin`], without normalization.
pub fn shape_from_langevin(lp: &LangevinParams) -> EyShape {
    EyShape {
        t: lp.b0 / lp.a0,
        t1: lp.b0 / lp.a0_prime,
        m0: (lp.b0 / lp.b).sqrt(),
        m1: lp.m1,
        alpha: 1.0 + lp.a / lp.b,
        alpha1: 1.0 + lp.a_prime / lp.b,
    }
}
