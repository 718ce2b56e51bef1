//! Rich-list incomes from wealth differences, and the common scale factor
//! that lets them continue a survey's exceedance curve.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::empirical::{IncomeRecord, IncomeSample, Source};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthRecord {
    pub person_id: String,
    pub year: i32,
    /// EUR.
    pub wealth: f64,
}

fn validate_wealth(w: &[WealthRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in w {
        if !(r.wealth.is_finite() && r.wealth > 0.0) {
            return Err(Error::InvalidParams(format!(
                "{} ({}): wealth {} is not positive",
                r.person_id, r.year, r.wealth
            )));
        }
        if !seen.insert((r.person_id.as_str(), r.year)) {
            return Err(Error::InvalidParams(format!(
                "duplicate wealth record for {} in {}",
                r.person_id, r.year
            )));
        }
    }
    Ok(())
}

/// Incomes `w_year - w_(year-1)` of everyone listed in both years whose
/// wealth grew.
pub fn estimate_incomes(w: &[WealthRecord], year: i32) -> Result<IncomeSample> {
    estimate_incomes_with(w, year, 1.0)
}

/// As [`estimate_incomes`], with incomes `kappa * (w_year - w_(year-1))`.
pub fn estimate_incomes_with(w: &[WealthRecord], year: i32, kappa: f64) -> Result<IncomeSample> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
    }
    validate_wealth(w)?;
    let previous: HashMap<&str, f64> = w
        .iter()
        .filter(|r| r.year == year - 1)
        .map(|r| (r.person_id.as_str(), r.wealth))
        .collect();
    let records: Vec<IncomeRecord> = w
        .iter()
        .filter(|r| r.year == year)
        .filter_map(|r| {
            let gain = r.wealth - previous.get(r.person_id.as_str())?;
            (gain > 0.0).then_some(IncomeRecord {
                income: kappa * gain,
                source: Source::RichList,
                year,
            })
        })
        .collect();
    if records.is_empty() {
        return Err(Error::EmptySample(format!(
            "nobody gained wealth between {} and {year}",
            year - 1
        )));
    }
    IncomeSample::new(records, format!("wealth differences {}-{year}", year - 1))
}

/// Concatenates the two samples, keeping their source labels.
pub fn merge(survey: &IncomeSample, rich_scaled: &IncomeSample) -> IncomeSample {
    let mut records = survey.records().to_vec();
    records.extend_from_slice(rich_scaled.records());
    let metadata = match (survey.metadata.is_empty(), rich_scaled.metadata.is_empty()) {
        (false, false) => format!("{} + {}", survey.metadata, rich_scaled.metadata),
        (false, true) => survey.metadata.clone(),
        _ => rich_scaled.metadata.clone(),
    };
    IncomeSample::new(records, metadata).expect("both inputs are already validated")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub s_min: f64,
    pub s_max: f64,
    /// Log-spaced comparison points across the overlap window.
    pub grid_points: usize,
    /// Each segment needs this many records inside the overlap window.
    pub min_overlap: usize,
    /// Largest acceptable junction gap, decades of income.
    pub gap_tolerance: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            s_min: 1e-6,
            s_max: 1.0,
            grid_points: 64,
            min_overlap: 5,
            gap_tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub factor: f64,
    pub merged: IncomeSample,
    /// RMS difference of log10 record counts across the overlap window.
    pub overlap_diagnostic: f64,
    /// Junction gap after scaling, decades.
    pub junction_gap: f64,
    /// Junction gap of the unscaled merge, decades.
    pub gap_before: f64,
}

/// What gets written to disk for a match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub factor: f64,
    pub overlap_diagnostic: f64,
    pub junction_gap: f64,
    pub gap_before: f64,
    pub survey_records: usize,
    pub rich_list_records: usize,
}

impl MatchResult {
    pub fn summary(&self) -> MatchSummary {
        MatchSummary {
            factor: self.factor,
            overlap_diagnostic: self.overlap_diagnostic,
            junction_gap: self.junction_gap,
            gap_before: self.gap_before,
            survey_records: self.merged.count(Source::Survey),
            rich_list_records: self.merged.count(Source::RichList),
        }
    }
}

/// Counting function `N(x) = #{incomes >= x}` interpolated linearly in
/// `(ln x, ln N)` between distinct incomes.
struct CountCurve {
    ln_x: Vec<f64>,
    ln_n: Vec<f64>,
    sorted: Vec<f64>,
}

impl CountCurve {
    fn new(incomes: &[f64]) -> Self {
        let mut sorted = incomes.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut ln_x = Vec::new();
        let mut ln_n = Vec::new();
        for (i, &x) in sorted.iter().enumerate() {
            if i > 0 && sorted[i - 1] == x {
                continue;
            }
            ln_x.push(x.ln());
            ln_n.push(((n - i) as f64).ln());
        }
        CountCurve { ln_x, ln_n, sorted }
    }

    fn min(&self) -> f64 {
        self.sorted[0]
    }

    fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    fn count_within(&self, lo: f64, hi: f64) -> usize {
        self.sorted.partition_point(|&x| x <= hi) - self.sorted.partition_point(|&x| x < lo)
    }

    fn ln_count(&self, ln_x: f64) -> f64 {
        let k = self.ln_x.partition_point(|&v| v <= ln_x);
        if k == 0 {
            return self.ln_n[0];
        }
        if k == self.ln_x.len() {
            return self.ln_n[k - 1];
        }
        let (x0, x1) = (self.ln_x[k - 1], self.ln_x[k]);
        let w = (ln_x - x0) / (x1 - x0);
        self.ln_n[k - 1] + w * (self.ln_n[k] - self.ln_n[k - 1])
    }
}

/// Mean squared difference of `ln(1 + n)` between survey and scaled rich
/// segment, where `n(x) = N(x) - N(hi)` counts records in `[x, hi]` of the
/// common window `[lo, hi]`. Counting down from the window top rather than from each
/// segment's own top keeps a truncated survey comparable with a rich list
/// that extends past it. `None` when the window is too thin.
fn overlap_objective(survey: &CountCurve, rich: &CountCurve, s: f64, cfg: &MatchConfig) -> Option<f64> {
    let lo = survey.min().max(s * rich.min());
    let hi = survey.max().min(s * rich.max());
    if !(hi > lo) {
        return None;
    }
    if survey.count_within(lo, hi) < cfg.min_overlap
        || rich.count_within(lo / s, hi / s) < cfg.min_overlap
    {
        return None;
    }
    let (a, b) = (lo.ln(), hi.ln());
    let k = cfg.grid_points;
    let ln_s = s.ln();
    let survey_above = survey.ln_count(b).exp();
    let rich_above = rich.ln_count(b - ln_s).exp();
    let sum: f64 = (0..k)
        .map(|i| {
            let t = a + (b - a) * i as f64 / (k - 1) as f64;
            let ns = survey.ln_count(t).exp() - survey_above;
            let nr = rich.ln_count(t - ln_s).exp() - rich_above;
            let d = ns.max(0.0).ln_1p() - nr.max(0.0).ln_1p();
            d * d
        })
        .sum();
    Some(sum / k as f64)
}

/// Log10 jump from the largest survey income to the next larger income in
/// `merged`; zero when nothing lies above it.
pub fn junction_gap(merged: &IncomeSample) -> f64 {
    let Some(top) = merged
        .records()
        .iter()
        .filter(|r| r.source == Source::Survey)
        .map(|r| r.income)
        .max_by(f64::total_cmp)
    else {
        return 0.0;
    };
    merged
        .records()
        .iter()
        .map(|r| r.income)
        .filter(|&x| x > top)
        .min_by(f64::total_cmp)
        .map_or(0.0, |next| (next / top).log10())
}

const SCAN_POINTS: usize = 241;
const GOLDEN_TOL: f64 = 1e-9;

/// Finds the scale `s` in `[cfg.s_min, cfg.s_max]` that best superimposes
/// the scaled rich segment on the survey's exceedance counts.
pub fn find_factor(survey: &IncomeSample, rich: &IncomeSample) -> Result<MatchResult> {
    find_factor_with(survey, rich, &MatchConfig::default())
}

pub fn find_factor_with(
    survey: &IncomeSample,
    rich: &IncomeSample,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    if survey.is_empty() || rich.is_empty() {
        return Err(Error::EmptySample("matching needs both segments".into()));
    }
    if !(cfg.s_min > 0.0 && cfg.s_min < cfg.s_max && cfg.grid_points >= 2) {
        return Err(Error::Config(format!(
            "bad search range [{}, {}] or grid of {} points",
            cfg.s_min, cfg.s_max, cfg.grid_points
        )));
    }
    let sc = CountCurve::new(&survey.incomes());
    let rc = CountCurve::new(&rich.incomes());
    let f = |ln_s: f64| overlap_objective(&sc, &rc, ln_s.exp(), cfg);

    let (a, b) = (cfg.s_min.ln(), cfg.s_max.ln());
    let h = (b - a) / (SCAN_POINTS - 1) as f64;
    let scan: Vec<(f64, Option<f64>)> = (0..SCAN_POINTS)
        .map(|i| {
            let t = if i == SCAN_POINTS - 1 { b } else { a + h * i as f64 };
            (t, f(t))
        })
        .collect();
    let (best, _) = scan
        .iter()
        .enumerate()
        .filter_map(|(i, (_, v))| v.map(|v| (i, v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or(Error::NoOverlap {
            lower: cfg.s_min,
            upper: cfg.s_max,
        })?;

    let lo = scan[best.saturating_sub(1)].0;
    let hi = scan[(best + 1).min(SCAN_POINTS - 1)].0;
    let penalized = |t: f64| f(t).unwrap_or(f64::INFINITY);
    let refined = golden_section(&penalized, lo, hi, GOLDEN_TOL);
    let ln_s = [refined, scan[best].0]
        .into_iter()
        .min_by(|x, y| penalized(*x).total_cmp(&penalized(*y)))
        .expect("two candidates");
    let mse = penalized(ln_s);

    let factor = ln_s.exp();
    let merged = merge(survey, &rich.scaled(factor)?);
    Ok(MatchResult {
        factor,
        junction_gap: junction_gap(&merged),
        gap_before: junction_gap(&merge(survey, rich)),
        merged,
        overlap_diagnostic: mse.sqrt() / std::f64::consts::LN_10,
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
