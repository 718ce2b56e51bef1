use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::distribution::pdf_unchecked;
use super::params::EyParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `m << m0`: `c' exp(-m / T)`.
    BoltzmannGibbs,
    /// `m0 << m < m1`: power law with exponent `alpha + 1` in the density.
    ParetoMedium,
    /// `m >> m1`: power law with exponent `alpha1 + 1` in the density.
    ParetoHigh,
}

/// A regime together with the income interval over which its approximant is
/// evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRegime {
    pub regime: Regime,
    pub lower: f64,
    pub upper: f64,
}

impl AsymptoticRegime {
    pub fn new(regime: Regime, lower: f64, upper: f64) -> Self {
        AsymptoticRegime {
            regime,
            lower,
            upper,
        }
    }

    fn validate(&self, p: &EyParams) -> Result<()> {
        let ok = self.lower >= 0.0
            && self.upper > self.lower
            && match self.regime {
                Regime::BoltzmannGibbs => self.upper <= p.m0,
                Regime::ParetoMedium => self.lower > p.m0 && self.upper < p.m1,
                Regime::ParetoHigh => self.lower >= p.m1 && self.upper.is_finite(),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{:?} interval [{}, {}] is outside its validity bounds (m0 = {}, m1 = {})",
                self.regime, self.lower, self.upper, p.m0, p.m1
            )))
        }
    }
}

/// Closed-form approximant `amplitude * exp(-m / scale) * m^(-exponent)`
/// together with its worst relative error against the exact density over the
/// regime's interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    pub regime: AsymptoticRegime,
    pub amplitude: f64,
    /// Exponential scale; infinite for the power-law regimes.
    pub scale: f64,
    /// Density exponent; zero for the exponential regime.
    pub exponent: f64,
    pub max_relative_error: f64,
}

impl Approximant {
    pub fn eval(&self, m: f64) -> f64 {
        match self.regime.regime {
            Regime::BoltzmannGibbs => self.amplitude * (-m / self.scale).exp(),
            _ => self.amplitude * m.powf(-self.exponent),
        }
    }
}

/// Builds the limiting form of the density for `regime` and reports its
/// worst relative error over 256 points spread across the interval.
pub fn asymptote(p: &EyParams, regime: AsymptoticRegime) -> Result<Approximant> {
    regime.validate(p)?;
    let (amplitude, scale, exponent) = match regime.regime {
        Regime::BoltzmannGibbs => (p.c_prime, p.t, 0.0),
        // arctan -> pi/2 and 1 + x^2 -> x^2
        Regime::ParetoMedium => (
            p.c_prime * (-(p.m0 / p.t) * FRAC_PI_2).exp() * p.m0.powf(p.alpha + 1.0),
            f64::INFINITY,
            p.alpha + 1.0,
        ),
        Regime::ParetoHigh => (
            p.c_double_prime * (-(p.m0 / p.t1) * FRAC_PI_2).exp() * p.m0.powf(p.alpha1 + 1.0),
            f64::INFINITY,
            p.alpha1 + 1.0,
        ),
    };
    let mut approx = Approximant {
        regime,
        amplitude,
        scale,
        exponent,
        max_relative_error: 0.0,
    };
    const N: usize = 256;
    let mut worst: f64 = 0.0;
    for i in 0..N {
        let f = i as f64 / (N - 1) as f64;
        let m = if regime.regime == Regime::BoltzmannGibbs || regime.lower == 0.0 {
            regime.lower + f * (regime.upper - regime.lower)
        } else {
            regime.lower * (regime.upper / regime.lower).powf(f)
        };
        // the high branch starts at m1 inclusive; stay inside the open range
        let m = if regime.regime == Regime::ParetoMedium {
            m.min(p.m1 * (1.0 - 1e-12))
        } else {
            m
        };
        let exact = pdf_unchecked(m, p);
        worst = worst.max((approx.eval(m) - exact).abs() / exact);
    }
    approx.max_relative_error = worst;
    Ok(approx)
}
