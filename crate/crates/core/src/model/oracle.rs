//! Equilibrium density evaluated directly from the stationary
//! Fokker–Planck solution
//!
//! ```text
//! P(m) = const / B(m) * exp(-integral_{m_init}^{m} A(m') / B(m') dm')
//! ```
//!
//! with the threshold drift and quadratic diffusion of [`LangevinParams`].
//! Every integral here is numerical; nothing is shared with the closed form,
//! which makes this an independent check on it.

use super::params::LangevinParams;
use crate::error::Result;
use crate::quad;

const TOL_ABS: f64 = 1e-13;
const TOL_REL: f64 = 1e-11;

/// Numerically normalized stationary density for fixed Langevin coefficients.
#[derive(Debug, Clone)]
pub struct IntegralOracle {
    lp: LangevinParams,
    m0: f64,
    ln_norm: f64,
}

impl IntegralOracle {
    pub fn new(lp: &LangevinParams) -> Result<Self> {
        lp.validate()?;
        let mut oracle = IntegralOracle {
            lp: *lp,
            m0: lp.m0(),
            ln_norm: 0.0,
        };
        oracle.ln_norm = -oracle.total_mass()?.ln();
        Ok(oracle)
    }

    pub fn params(&self) -> &LangevinParams {
        &self.lp
    }

    /// `integral_{m_init}^{m} A/B`. Above `m0` the integral runs in `ln m`,
    /// where `A/B * m` is bounded.
    pub fn drift_integral(&self, m: f64) -> Result<f64> {
        let lp = &self.lp;
        let lo = lp.m_init;
        if m <= lo {
            return Ok(0.0);
        }
        let ratio = |x: f64| lp.drift(x) / lp.diffusion(x);
        let mut total = 0.0;
        let linear_top = m.min(self.m0.max(lo));
        if linear_top > lo {
            let mut pts = vec![lo];
            if lp.m1 > lo && lp.m1 < linear_top {
                pts.push(lp.m1);
            }
            pts.push(linear_top);
            total += quad::integrate_partitioned(ratio, &pts, TOL_ABS, TOL_REL)?.value;
        }
        if m > linear_top {
            let (t0, t1) = (linear_top.ln(), m.ln());
            let mut pts = vec![t0];
            if lp.m1 > linear_top && lp.m1 < m {
                pts.push(lp.m1.ln());
            }
            pts.push(t1);
            let in_log = |t: f64| {
                let x = t.exp();
                ratio(x) * x
            };
            total += quad::integrate_partitioned(in_log, &pts, TOL_ABS, TOL_REL)?.value;
        }
        Ok(total)
    }

    fn ln_unnormalized(&self, m: f64) -> Result<f64> {
        Ok(-self.drift_integral(m)? - self.lp.diffusion(m).ln())
    }

    fn total_mass(&self) -> Result<f64> {
        let lp = &self.lp;
        let temp = lp.b0 / lp.a0.abs().max(f64::MIN_POSITIVE);
        let scale = temp.min(self.m0).min(lp.m1);
        let lo = lp.m_init;

        // linear part: from m_init to m0, partitioned around the natural scales
        let linear_top = self.m0.max(lo);
        let mut pts = vec![lo];
        let mut k = scale * 1e-3;
        while k < linear_top {
            if k > lo {
                pts.push(k);
            }
            k *= 10f64.sqrt();
        }
        if lp.m1 > lo && lp.m1 < linear_top {
            pts.push(lp.m1);
        }
        pts.push(linear_top);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let f = |m: f64| self.ln_unnormalized(m).map(f64::exp).unwrap_or(f64::NAN);
        let mut mass = if linear_top > lo {
            quad::integrate_partitioned(f, &pts, TOL_ABS * scale, TOL_REL)?.value
        } else {
            0.0
        };

        // log part: P(e^t) e^t decays like e^{-alpha1 t}
        let alpha1 = 1.0 + lp.a_prime / lp.b;
        let t_lo = linear_top.max(scale * 1e-3).ln();
        let t_hi = lp.m1.max(linear_top).ln() + 50.0 / alpha1;
        let mut tpts = vec![t_lo];
        let mut t = t_lo + 1.0;
        while t < t_hi {
            tpts.push(t);
            t += 1.0;
        }
        if lp.m1.ln() > t_lo && lp.m1.ln() < t_hi {
            tpts.push(lp.m1.ln());
        }
        tpts.push(t_hi);
        tpts.sort_by(f64::total_cmp);
        tpts.dedup();
        let g = |t: f64| {
            let m = t.exp();
            self.ln_unnormalized(m)
                .map(|v| (v + t).exp())
                .unwrap_or(f64::NAN)
        };
        mass += quad::integrate_partitioned(g, &tpts, TOL_ABS * scale, TOL_REL)?.value;
        Ok(mass)
    }

    /// Normalized density at `m >= m_init`; zero below `m_init`.
    pub fn pdf(&self, m: f64) -> Result<f64> {
        if m < self.lp.m_init {
            return Ok(0.0);
        }
        Ok((self.ln_unnormalized(m)? + self.ln_norm).exp())
    }
}

/// One-shot evaluation of the quadrature-form density. Builds the
/// normalization on every call; keep an [`IntegralOracle`] for repeated use.
pub fn pdf_from_integral(m: f64, lp: &LangevinParams) -> Result<f64> {
    IntegralOracle::new(lp)?.pdf(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_coefficients_give_exponential() {
        // b -> 0 with A(m) = A0 everywhere: P(m) = exp(-m/T)/T
        let b = 1e-18;
        let b0 = 1e9;
        let a0 = b0 / 40_000.0;
        let lp = LangevinParams {
            a0,
            a: 0.0,
            a0_prime: a0,
            a_prime: 0.0,
            b0,
            b,
            m1: 1e15,
            m_init: 0.0,
        };
        let o = IntegralOracle::new(&lp).unwrap();
        let t = b0 / a0;
        for &m in &[0.0, 1e3, 4e4, 2e5, 6e5] {
            let expect = (-m / t).exp() / t;
            let got = o.pdf(m).unwrap();
            assert!((got - expect).abs() / expect < 1e-6, "m = {m}: {got} vs {expect}");
        }
    }

    #[test]
    fn zero_below_lowest_income() {
        let lp = LangevinParams {
            a0: 1.0,
            a: 1.0,
            a0_prime: 1.0,
            a_prime: 0.5,
            b0: 1.0,
            b: 1.0,
            m1: 10.0,
            m_init: 2.0,
        };
        let o = IntegralOracle::new(&lp).unwrap();
        assert_eq!(o.pdf(1.0).unwrap(), 0.0);
        assert!(o.pdf(2.0).unwrap() > 0.0);
    }
}
