use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the Langevin dynamics with threshold drift
/// `A(m) = A0 + a m` below `m1`, `A0' + a' m` above, and diffusion
/// `B(m) = B0 + b m^2`. Incomes in EUR/year, rates in 1/year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    #[serde(rename = "A0")]
    pub a0: f64,
    pub a: f64,
    #[serde(rename = "A0_prime")]
    pub a0_prime: f64,
    pub a_prime: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    pub b: f64,
    pub m1: f64,
    #[serde(default)]
    pub m_init: f64,
}

impl LangevinParams {
    /// Checks the structural invariants. Negative slopes are admitted as long
    /// as both Pareto exponents `1 + a/b`, `1 + a'/b` stay positive, which the
    /// high-income branch needs for a normalizable tail.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a0,
            self.a,
            self.a0_prime,
            self.a_prime,
            self.b0,
            self.b,
            self.m1,
            self.m_init,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite Langevin coefficient".into()));
        }
        if self.b0 <= 0.0 || self.b <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "diffusion must be positive (B0 = {}, b = {})",
                self.b0, self.b
            )));
        }
        if self.m1 <= 0.0 || self.m_init < 0.0 || self.m_init >= self.m1 {
            return Err(Error::InvalidParams(format!(
                "need 0 <= m_init < m1 (m_init = {}, m1 = {})",
                self.m_init, self.m1
            )));
        }
        if 1.0 + self.a / self.b <= 0.0 || 1.0 + self.a_prime / self.b <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "exponents 1 + a/b = {}, 1 + a'/b = {} must be positive",
                1.0 + self.a / self.b,
                1.0 + self.a_prime / self.b
            )));
        }
        Ok(())
    }

    /// Drift `A(m)` in the threshold form.
    #[inline]
    pub fn drift(&self, m: f64) -> f64 {
        if m < self.m1 {
            self.a0 + self.a * m
        } else {
            self.a0_prime + self.a_prime * m
        }
    }

    /// Diffusion `B(m) = B0 + b m^2`.
    #[inline]
    pub fn diffusion(&self, m: f64) -> f64 {
        self.b0 + self.b * m * m
    }

    /// `m0 = sqrt(B0 / b)`.
    pub fn m0(&self) -> f64 {
        (self.b0 / self.b).sqrt()
    }

    /// Microscopic coefficients reproducing `shape`, for a chosen
    /// multiplicative diffusion strength `b` (the closed form depends only on
    /// ratios, so `b` sets the time unit).
    pub fn from_shape(shape: &EyShape, b: f64) -> Result<Self> {
        shape.validate()?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
        }
        let b0 = b * shape.m0 * shape.m0;
        let lp = LangevinParams {
            a0: b0 / shape.t,
            a: (shape.alpha - 1.0) * b,
            a0_prime: b0 / shape.t1,
            a_prime: (shape.alpha1 - 1.0) * b,
            b0,
            b,
            m1: shape.m1,
            m_init: 0.0,
        };
        lp.validate()?;
        Ok(lp)
    }
}

/// The six structural parameters of the two-branch distribution, before the
/// normalization constants are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyShape {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub m0: f64,
    pub m1: f64,
    pub alpha: f64,
    pub alpha1: f64,
}

impl EyShape {
    pub fn new(t: f64, t1: f64, m0: f64, m1: f64, alpha: f64, alpha1: f64) -> Self {
        EyShape {
            t,
            t1,
            m0,
            m1,
            alpha,
            alpha1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t, self.t1, self.m0, self.m1, self.alpha, self.alpha1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite distribution parameter".into()));
        }
        if self.t <= 0.0 || self.t1 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "temperatures must be positive (T = {}, T1 = {})",
                self.t, self.t1
            )));
        }
        if self.m0 <= 0.0 || self.m1 <= self.m0 {
            return Err(Error::InvalidParams(format!(
                "need 0 < m0 < m1 (m0 = {}, m1 = {})",
                self.m0, self.m1
            )));
        }
        if self.alpha1 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "alpha1 = {} gives a divergent tail",
                self.alpha1
            )));
        }
        if self.alpha <= self.alpha1 {
            return Err(Error::InvalidParams(format!(
                "need alpha > alpha1 (alpha = {}, alpha1 = {})",
                self.alpha, self.alpha1
            )));
        }
        Ok(())
    }

    /// Multiplies every income-dimension parameter by `s`.
    pub fn rescaled(&self, s: f64) -> Self {
        EyShape {
            t: self.t * s,
            t1: self.t1 * s,
            m0: self.m0 * s,
            m1: self.m1 * s,
            ..*self
        }
    }

    /// Returns the values in the order `[T, T1, m0, m1, alpha, alpha1]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.t, self.t1, self.m0, self.m1, self.alpha, self.alpha1]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        EyShape::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

/// Normalized two-branch distribution parameters.
///
/// Deserialization accepts documents with or without the two constants and
/// always recomputes them from the structural fields, so a JSON file can never carry an inconsistent
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEyParams")]
pub struct EyParams {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub m0: f64,
    pub m1: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub c_prime: f64,
    pub c_double_prime: f64,
}

#[derive(Deserialize)]
struct RawEyParams {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "T1")]
    t1: f64,
    m0: f64,
    m1: f64,
    alpha: f64,
    alpha1: f64,
}

impl TryFrom<RawEyParams> for EyParams {
    type Error = Error;

    fn try_from(raw: RawEyParams) -> Result<Self> {
        super::normalize(&EyShape::new(
            raw.t, raw.t1, raw.m0, raw.m1, raw.alpha, raw.alpha1,
        ))
    }
}

impl EyParams {
    pub fn shape(&self) -> EyShape {
        EyShape::new(self.t, self.t1, self.m0, self.m1, self.alpha, self.alpha1)
    }
}

/// Fitted parameter rows for the merged (survey + rich list) dataset, by year.
pub const MDS_ROWS: [(u16, EyShape); 6] = [
    (2005, EyShape { t: 36_000.0, t1: 430_000.0, m0: 155_000.0, m1: 430_000.0, alpha: 2.907, alpha1: 0.795 }),
    (2006, EyShape { t: 37_000.0, t1: 445_000.0, m0: 145_000.0, m1: 445_000.0, alpha: 2.892, alpha1: 0.86 }),
    (2007, EyShape { t: 37_000.0, t1: 480_000.0, m0: 160_000.0, m1: 480_000.0, alpha: 2.735, alpha1: 0.79 }),
    (2008, EyShape { t: 38_000.0, t1: 450_000.0, m0: 120_000.0, m1: 450_000.0, alpha: 2.965, alpha1: 0.890 }),
    (2009, EyShape { t: 37_000.0, t1: 290_000.0, m0: 145_000.0, m1: 290_000.0, alpha: 2.974, alpha1: 2.608 }),
    (2010, EyShape { t: 38_000.0, t1: 450_000.0, m0: 135_000.0, m1: 450_000.0, alpha: 3.153, alpha1: 0.77 }),
];

/// Fitted parameter rows for the survey-only dataset, by year.
pub const SURVEY_ROWS: [(u16, EyShape); 6] = [
    (2005, EyShape { t: 36_000.0, t1: 390_000.0, m0: 160_000.0, m1: 390_000.0, alpha: 3.216, alpha1: 1.54 }),
    (2006, EyShape { t: 37_000.0, t1: 330_000.0, m0: 150_000.0, m1: 330_000.0, alpha: 3.094, alpha1: 2.15 }),
    (2007, EyShape { t: 37_000.0, t1: 325_000.0, m0: 160_000.0, m1: 325_000.0, alpha: 3.057, alpha1: 2.32 }),
    (2008, EyShape { t: 38_000.0, t1: 320_000.0, m0: 120_000.0, m1: 320_000.0, alpha: 3.0632, alpha1: 2.13 }),
    (2009, EyShape { t: 37_000.0, t1: 290_000.0, m0: 145_000.0, m1: 290_000.0, alpha: 2.979, alpha1: 2.750 }),
    (2010, EyShape { t: 38_000.0, t1: 320_000.0, m0: 140_000.0, m1: 320_000.0, alpha: 3.329, alpha1: 2.43 }),
];

/// Looks up the merged-dataset row for `year`.
pub fn mds_row(year: u16) -> Option<EyShape> {
    MDS_ROWS.iter().find(|(y, _)| *y == year).map(|(_, s)| *s)
}

/// Looks up the survey-only row for `year`.
pub fn survey_row(year: u16) -> Option<EyShape> {
    SURVEY_ROWS.iter().find(|(y, _)| *y == year).map(|(_, s)| *s)
}
