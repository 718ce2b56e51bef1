//! Least-squares fit of the six shape parameters to an empirical exceedance
//! curve in log-log coordinates.

mod crossover;
mod report;
pub mod simplex;

pub use crossover::{crossover_guess, CrossoverGuess, MIN_POINTS};
pub use report::{format_table, FitFlag, FitReport};

use serde::{Deserialize, Serialize};

use crate::empirical::CcdfCurve;
use crate::error::{Error, Result};
use crate::model::{normalize, EyDistribution, EyParams, EyShape};

/// Weight of each of the richest `TOP_POINTS` points.
pub const TOP_WEIGHT: f64 = 0.2;
pub const TOP_POINTS: usize = 5;
/// Smallest admissible Pareto exponent.
pub const MIN_EXPONENT: f64 = 0.01;
const MIN_CURVE_POINTS: usize = 10;
const INFEASIBLE: f64 = 1e6;
const MAX_RESTARTS: usize = 4;
const SCALE_RANGE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    T,
    T1,
    M0,
    M1,
    Alpha,
    Alpha1,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::T,
        Param::T1,
        Param::M0,
        Param::M1,
        Param::Alpha,
        Param::Alpha1,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Scales are fitted by their logarithm, exponents directly.
    fn is_scale(self) -> bool {
        matches!(self, Param::T | Param::T1 | Param::M0 | Param::M1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Loss {
    #[default]
    LogLogLeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub free_params: Vec<Param>,
    /// Starting point; when absent it is derived from the curve's knees.
    pub initial_guess: Option<EyParams>,
    pub loss: Loss,
    pub max_evals: usize,
    /// Relative objective spread at which a simplex search stops.
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            free_params: Param::ALL.to_vec(),
            initial_guess: None,
            loss: Loss::LogLogLeastSquares,
            max_evals: 20_000,
            tolerance: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.free_params.is_empty() {
            return Err(Error::Config("no free parameters".into()));
        }
        if let Some(p) = &self.initial_guess {
            p.shape().validate()?;
        }
        if self.max_evals == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "max_evals ({}) and tolerance ({}) must be positive",
                self.max_evals, self.tolerance
            )));
        }
        Ok(())
    }
}

/// Curve points in ascending income order with their loss weights.
struct Target {
    m: Vec<f64>,
    ln_m: Vec<f64>,
    log10_s: Vec<f64>,
    weight: Vec<f64>,
}

impl Target {
    fn new(c: &CcdfCurve) -> Self {
        let n = c.n();
        let mut t = Target {
            m: Vec::with_capacity(n),
            ln_m: Vec::with_capacity(n),
            log10_s: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
        };
        for (rank, p) in c.points().iter().enumerate().rev() {
            t.m.push(p.income);
            t.ln_m.push(p.income.ln());
            t.log10_s.push(p.exceedance.log10());
            t.weight.push(if rank < TOP_POINTS { TOP_WEIGHT } else { 1.0 });
        }
        t
    }

    /// Keeps the points whose income satisfies `keep`.
    fn subset(&self, keep: impl Fn(f64) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.m.len()).filter(|&i| keep(self.m[i])).collect();
        Target {
            m: idx.iter().map(|&i| self.m[i]).collect(),
            ln_m: idx.iter().map(|&i| self.ln_m[i]).collect(),
            log10_s: idx.iter().map(|&i| self.log10_s[i]).collect(),
            weight: idx.iter().map(|&i| self.weight[i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.m.len()
    }

    fn residuals(&self, dist: &EyDistribution, buf: &mut Vec<f64>) {
        dist.log10_ccdf_sorted(&self.m, &self.ln_m, buf);
        for (r, y) in buf.iter_mut().zip(&self.log10_s) {
            *r -= y;
        }
    }

    /// Weighted mean squared log10 residual of `shape`.
    fn loss(&self, shape: &EyShape, buf: &mut Vec<f64>) -> f64 {
        let Ok(dist) = EyDistribution::from_shape(shape) else {
            return INFEASIBLE;
        };
        self.residuals(&dist, buf);
        let (mut num, mut den) = (0.0, 0.0);
        for (r, w) in buf.iter().zip(&self.weight) {
            num += w * r * r;
            den += w;
        }
        if den > 0.0 && num.is_finite() {
            num / den
        } else {
            INFEASIBLE
        }
    }
}

/// Weighted mean squared difference between the curve's log10 exceedances
/// and the model's at the same incomes. The richest five points carry
/// weight 0.2, all others 1.
pub fn objective(p: &EyParams, c: &CcdfCurve) -> Result<f64> {
    if c.n() < MIN_CURVE_POINTS {
        return Err(Error::InvalidParams(format!(
            "curve has {} points, need at least {MIN_CURVE_POINTS}",
            c.n()
        )));
    }
    let dist = EyDistribution::new(p)?;
    let target = Target::new(c);
    let mut buf = Vec::new();
    target.residuals(&dist, &mut buf);
    let (num, den) = buf
        .iter()
        .zip(&target.weight)
        .fold((0.0, 0.0), |(n, d), (r, w)| (n + w * r * r, d + w));
    Ok(num / den)
}

/// Packs the free parameters of `shape` into optimizer coordinates.
fn pack(shape: &EyShape, free: &[Param]) -> Vec<f64> {
    let v = shape.to_array();
    free.iter()
        .map(|p| {
            let x = v[p.index()];
            if p.is_scale() {
                x.ln()
            } else {
                x
            }
        })
        .collect()
}

fn unpack(base: &EyShape, free: &[Param], x: &[f64]) -> EyShape {
    let mut v = base.to_array();
    for (p, &xi) in free.iter().zip(x) {
        v[p.index()] = if p.is_scale() { xi.exp() } else { xi };
    }
    EyShape::from_array(v)
}

/// Squared distance outside the admissible region, zero inside. Scales must
/// stay within `SCALE_RANGE` decades of the observed incomes `[lo, hi]`.
fn violation(s: &EyShape, lo: f64, hi: f64) -> f64 {
    let (lo, hi) = ((lo / SCALE_RANGE).ln(), (hi * SCALE_RANGE).ln());
    let mut v = 0.0;
    for x in [s.t, s.t1, s.m0, s.m1] {
        let x = x.ln();
        v += (lo - x).max(0.0).powi(2) + (x - hi).max(0.0).powi(2);
    }
    v += (MIN_EXPONENT - s.alpha1).max(0.0).powi(2);
    v += (MIN_EXPONENT - s.alpha).max(0.0).powi(2);
    v += (s.alpha1 - s.alpha).max(0.0).powi(2);
    v += (s.m0 / s.m1).ln().max(0.0).powi(2);
    v
}

struct Stage {
    shape: EyShape,
    loss: f64,
    evaluations: usize,
    converged: bool,
}

/// Minimizes the loss on `target` over `free`, restarting the simplex until
/// a restart no longer improves the objective.
fn run_stage(
    target: &Target,
    start: &EyShape,
    free: &[Param],
    cfg: &FitConfig,
    budget: usize,
) -> Stage {
    let mut buf = Vec::with_capacity(target.len());
    let (lo, hi) = (target.m[0], target.m[target.len() - 1]);
    let mut f = |x: &[f64]| {
        let s = unpack(start, free, x);
        let v = violation(&s, lo, hi);
        if v > 0.0 || s.validate().is_err() {
            return INFEASIBLE * (1.0 + v);
        }
        target.loss(&s, &mut buf)
    };
    let steps: Vec<f64> = free.iter().map(|p| if p.is_scale() { 0.2 } else { 0.25 }).collect();
    let mut x = pack(start, free);
    let mut best = f(&x);
    let mut evaluations = 1;
    let mut converged = false;
    for _ in 0..=MAX_RESTARTS {
        if evaluations >= budget {
            converged = false;
            break;
        }
        let r = simplex::minimize(&mut f, &x, &steps, budget - evaluations, cfg.tolerance);
        evaluations += r.evaluations;
        converged = r.converged;
        let improvement = best - r.f;
        if r.f <= best {
            x = r.x;
            best = r.f;
        }
        if improvement <= cfg.tolerance * (best.abs() + cfg.tolerance) {
            break;
        }
    }
    Stage {
        shape: unpack(start, free, &x),
        loss: best,
        evaluations,
        converged,
    }
}

/// Least-squares log-log slope of the curve points with income in `[lo, hi)`.
fn loglog_slope(c: &CcdfCurve, lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = c
        .points()
        .iter()
        .filter(|p| p.income >= lo && p.income < hi)
        .map(|p| (p.income.ln(), p.exceedance.ln()))
        .collect();
    if pts.len() < MIN_CURVE_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Income at which the curve's exceedance first reaches `q`.
fn income_at(c: &CcdfCurve, q: f64) -> f64 {
    let pts = c.points();
    pts.iter()
        .find(|p| p.exceedance >= q)
        .unwrap_or(&pts[pts.len() - 1])
        .income
}

/// Starting shape with knees at `m0 < m1`, slopes and `T` read off the data.
fn start_from_knees(c: &CcdfCurve, m0: f64, m1: f64) -> Option<EyShape> {
    if !(m1 > m0) {
        return None;
    }
    let alpha = loglog_slope(c, m0, m1).map_or(2.0, |s| -s).max(0.5);
    let alpha1 = loglog_slope(c, m1, f64::INFINITY)
        .map_or(alpha - 0.5, |s| -s)
        .clamp(0.1, alpha - 0.05);
    // S ~ exp(-m / T) well below the first knee
    let below: Vec<(f64, f64)> = c
        .points()
        .iter()
        .filter(|p| p.income < 0.5 * m0)
        .map(|p| (p.income, p.exceedance.ln()))
        .collect();
    let n = below.len() as f64;
    let t = if below.len() >= MIN_CURVE_POINTS {
        let (mx, my) = below.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let sxy: f64 = below.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = below.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 { -1.0 / slope } else { m0 / 3.0 }
    } else {
        m0 / 3.0
    };
    let shape = EyShape::new(t.clamp(m0 * 1e-3, m0 * 10.0), m1, m0, m1, alpha, alpha1);
    shape.validate().ok().map(|_| shape)
}

/// Exceedance levels that seed the knee positions of the quantile starts.
const M0_LEVELS: [f64; 2] = [0.1, 0.03];
const M1_LEVELS: [f64; 2] = [3e-3, 1e-3];

/// Starting shapes: one from the knee search (unless it is inconclusive)
/// and one per pair of exceedance levels in `M0_LEVELS` x `M1_LEVELS`.
fn starts(c: &CcdfCurve) -> Result<(Vec<EyShape>, bool)> {
    let g = crossover_guess(c)?;
    let mut out = Vec::new();
    if !g.low_confidence {
        out.extend(start_from_knees(c, g.m0, g.m1));
    }
    for q0 in M0_LEVELS {
        for q1 in M1_LEVELS {
            out.extend(start_from_knees(c, income_at(c, q0), income_at(c, q1)));
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParams(
            "no admissible starting point; supply an initial guess".into(),
        ));
    }
    Ok((out, g.low_confidence))
}

/// Stage 1 fits the low-income parameters on points below `m1`, stage 2 the
/// high-income ones on points from `m0` up, stage 3 all free parameters on
/// the whole curve.
fn staged(target: &Target, start: &EyShape, cfg: &FitConfig, budget: usize) -> Stage {
    let pick = |ps: [Param; 3]| -> Vec<Param> {
        ps.into_iter().filter(|p| cfg.free_params.contains(p)).collect()
    };
    let low = pick([Param::T, Param::M0, Param::Alpha]);
    let high = pick([Param::T1, Param::M1, Param::Alpha1]);
    let mut shape = *start;
    let mut evaluations = 0;

    let m1 = shape.m1;
    let lower = target.subset(|m| m < m1);
    if !low.is_empty() && lower.len() >= MIN_CURVE_POINTS {
        let s = run_stage(&lower, &shape, &low, cfg, budget / 4);
        evaluations += s.evaluations;
        shape = s.shape;
    }
    let m0 = shape.m0;
    let upper = target.subset(|m| m >= m0);
    if !high.is_empty() && upper.len() >= MIN_CURVE_POINTS {
        let s = run_stage(&upper, &shape, &high, cfg, budget / 4);
        evaluations += s.evaluations;
        shape = s.shape;
    }
    let mut joint = run_stage(
        target,
        &shape,
        &cfg.free_params,
        cfg,
        budget.saturating_sub(evaluations).max(1),
    );
    joint.evaluations += evaluations;
    joint
}

/// Fits the free parameters of `cfg` to `c` by the staged simplex search,
/// from `cfg.initial_guess` or else from several data-derived starts,
/// keeping the lowest objective.
pub fn fit(c: &CcdfCurve, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    if c.n() < MIN_CURVE_POINTS {
        return Err(Error::InvalidParams(format!(
            "curve has {} points, need at least {MIN_CURVE_POINTS}",
            c.n()
        )));
    }
    let (starts, low_confidence) = match &cfg.initial_guess {
        Some(p) => (vec![p.shape()], false),
        None => starts(c)?,
    };
    let target = Target::new(c);
    let budget = cfg.max_evals / starts.len();
    let mut evaluations = 0;
    let mut best: Option<Stage> = None;
    for s in &starts {
        let stage = staged(&target, s, cfg, budget);
        evaluations += stage.evaluations;
        if best.as_ref().is_none_or(|b| stage.loss < b.loss) {
            best = Some(stage);
        }
    }
    let best = best.expect("at least one start");
    let params = normalize(&best.shape)?;
    report::build(
        c,
        params,
        best.loss,
        evaluations,
        best.converged,
        low_confidence,
    )
}
