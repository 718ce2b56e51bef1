use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::empirical::CcdfCurve;
use crate::error::Result;
use crate::model::{EyDistribution, EyParams};

/// Points above the fitted `m1` needed before the tail counts as supported.
const MIN_TAIL_POINTS: usize = 10;
/// Exceedance level above which a fitted `m0` counts as beyond the bulk.
const BULK_EXCEEDANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    NotConverged,
    /// Fewer than ten points lie above the fitted `m1`.
    DegenerateTail,
    /// The fitted `m0` exceeds 99% of the incomes.
    CrossoverBeyondBulk,
    /// The knee search found no clear slope change.
    LowConfidenceGuess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub year: Option<i32>,
    pub params: EyParams,
    /// RMS log10 exceedance residual over all points, unweighted.
    pub residual_rms: f64,
    /// RMS residual below `m1`.
    pub residual_low: Option<f64>,
    /// RMS residual at and above `m1`.
    pub residual_high: Option<f64>,
    /// Weighted objective at the optimum.
    pub objective: f64,
    pub n_points_used: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub flags: Vec<FitFlag>,
    pub method: String,
}

const METHOD: &str = "weighted least squares of log10 exceedance (richest 5 points weight 0.2); \
staged Nelder-Mead on ln T, ln T1, ln m0, ln m1, alpha, alpha1; c' and c'' from normalization";

fn rms(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    (n > 0).then(|| (s / n as f64).sqrt())
}

pub(super) fn build(
    c: &CcdfCurve,
    params: EyParams,
    objective: f64,
    evaluations: usize,
    converged: bool,
    low_confidence: bool,
) -> Result<FitReport> {
    let dist = EyDistribution::new(&params)?;
    let m: Vec<f64> = c.points().iter().rev().map(|p| p.income).collect();
    let ln_m: Vec<f64> = m.iter().map(|x| x.ln()).collect();
    let mut model = Vec::new();
    dist.log10_ccdf_sorted(&m, &ln_m, &mut model);
    let resid: Vec<(f64, f64)> = c
        .points()
        .iter()
        .rev()
        .zip(&model)
        .map(|(p, y)| (p.income, y - p.exceedance.log10()))
        .collect();
    let m1 = params.m1;

    let mut flags = Vec::new();
    if !converged {
        flags.push(FitFlag::NotConverged);
    }
    if resid.iter().filter(|(x, _)| *x >= m1).count() < MIN_TAIL_POINTS {
        flags.push(FitFlag::DegenerateTail);
    }
    let bulk_top = c
        .points()
        .iter()
        .find(|p| p.exceedance >= BULK_EXCEEDANCE)
        .map_or(f64::INFINITY, |p| p.income);
    if params.m0 > bulk_top {
        flags.push(FitFlag::CrossoverBeyondBulk);
    }
    if low_confidence {
        flags.push(FitFlag::LowConfidenceGuess);
    }

    Ok(FitReport {
        year: None,
        residual_rms: rms(resid.iter().map(|r| r.1)).unwrap_or(0.0),
        residual_low: rms(resid.iter().filter(|r| r.0 < m1).map(|r| r.1)),
        residual_high: rms(resid.iter().filter(|r| r.0 >= m1).map(|r| r.1)),
        objective,
        n_points_used: c.n(),
        evaluations,
        converged,
        flags,
        method: METHOD.into(),
        params,
    })
}

impl FitReport {
    pub fn has(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Plain-text table with one row per report:
/// `Year T T1 m0 m1 alpha alpha1 residual`.
pub fn format_table(reports: &[FitReport]) -> String {
    let header = ["Year", "T", "T1", "m0", "m1", "alpha", "alpha1", "residual"];
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            let p = &r.params;
            [
                r.year.map_or("-".into(), |y| y.to_string()),
                format!("{:.0}", p.t),
                format!("{:.0}", p.t1),
                format!("{:.0}", p.m0),
                format!("{:.0}", p.m1),
                format!("{:.3}", p.alpha),
                format!("{:.3}", p.alpha1),
                format!("{:.4}", r.residual_rms),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..8)
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(&mut out, &header);
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
