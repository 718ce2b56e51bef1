//! Knee detection on a log-log exceedance curve.

use serde::{Deserialize, Serialize};

use crate::empirical::CcdfCurve;
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 100;
const GRID_CELLS: usize = 48;
/// Minimum slope change at a knee, in log-log units, for the guess to count.
const MIN_SLOPE_CHANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverGuess {
    pub m0: f64,
    pub m1: f64,
    /// Log-log slopes of the three segments, poorest first.
    pub slopes: [f64; 3],
    pub low_confidence: bool,
}

/// Least-squares fit of `y = c + s0 x + d1 (x - b1)+ + d2 (x - b2)+`.
/// Returns `(sse, [c, s0, d1, d2])`.
fn hinge_fit(xs: &[f64], ys: &[f64], b1: f64, b2: f64) -> Option<(f64, [f64; 4])> {
    let basis = |x: f64| [1.0, x, (x - b1).max(0.0), (x - b2).max(0.0)];
    let mut a = [[0.0; 4]; 4];
    let mut r = [0.0; 4];
    for (&x, &y) in xs.iter().zip(ys) {
        let phi = basis(x);
        for i in 0..4 {
            r[i] += phi[i] * y;
            for j in 0..4 {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    let coef = solve4(a, r)?;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let phi = basis(x);
            let fit: f64 = phi.iter().zip(&coef).map(|(p, c)| p * c).sum();
            (y - fit).powi(2)
        })
        .sum();
    Some((sse, coef))
}

/// Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut r: [f64; 4]) -> Option<[f64; 4]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let s: f64 = (i + 1..4).map(|k| a[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / a[i][i];
    }
    Some(x)
}

/// Bin means of `(log10 income, log10 exceedance)` on an even grid in
/// `log10 income`, plus the grid edges.
fn binned(c: &CcdfCurve) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pts = c.points();
    let hi = pts[0].income.log10();
    let lo = pts[pts.len() - 1].income.log10();
    let width = (hi - lo) / GRID_CELLS as f64;
    let edges: Vec<f64> = (0..=GRID_CELLS).map(|i| lo + width * i as f64).collect();
    let mut sx = vec![0.0; GRID_CELLS];
    let mut sy = vec![0.0; GRID_CELLS];
    let mut n = vec![0usize; GRID_CELLS];
    for p in pts {
        let x = p.income.log10();
        let k = (((x - lo) / width) as usize).min(GRID_CELLS - 1);
        sx[k] += x;
        sy[k] += p.exceedance.log10();
        n[k] += 1;
    }
    let (xs, ys) = (0..GRID_CELLS)
        .filter(|&k| n[k] > 0)
        .map(|k| (sx[k] / n[k] as f64, sy[k] / n[k] as f64))
        .unzip();
    (xs, ys, edges)
}

/// Locates the two knees of the log-log curve by a continuous three-segment
/// fit with breakpoints restricted to grid edges.
pub fn crossover_guess(c: &CcdfCurve) -> Result<CrossoverGuess> {
    if c.n() < MIN_POINTS {
        return Err(Error::Config(format!(
            "crossover guess needs at least {MIN_POINTS} points, got {}; supply an initial guess instead",
            c.n()
        )));
    }
    let (xs, ys, edges) = binned(c);
    let (lo, hi) = (edges[0], edges[GRID_CELLS]);
    if !(hi > lo) {
        return Err(Error::InvalidParams("all incomes are equal".into()));
    }

    let mut best: Option<(f64, f64, f64, [f64; 4])> = None;
    for i in 2..GRID_CELLS - 3 {
        for j in i + 2..GRID_CELLS - 1 {
            let (b1, b2) = (edges[i], edges[j]);
            let occupied = |a: f64, b: f64| xs.iter().filter(|&&x| x > a && x < b).count();
            if occupied(lo, b1) < 2 || occupied(b1, b2) < 2 || occupied(b2, hi + 1.0) < 2 {
                continue;
            }
            if let Some((sse, coef)) = hinge_fit(&xs, &ys, b1, b2) {
                if best.is_none_or(|(s, ..)| sse < s) {
                    best = Some((sse, b1, b2, coef));
                }
            }
        }
    }
    let Some((_, b1, b2, coef)) = best else {
        return Err(Error::InvalidParams(
            "too few distinct incomes to place two knees".into(),
        ));
    };
    let slopes = [coef[1], coef[1] + coef[2], coef[1] + coef[2] + coef[3]];
    let low_confidence = coef[2].abs() < MIN_SLOPE_CHANGE || coef[3].abs() < MIN_SLOPE_CHANGE;
    let (m0, m1) = if low_confidence {
        (10f64.powf(lo), 10f64.powf(hi))
    } else {
        (10f64.powf(b1), 10f64.powf(b2))
    };
    Ok(CrossoverGuess {
        m0,
        m1,
        slopes,
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::CcdfPoint;

    /// Exceedance curve with log-log slopes -0.2, -2.5, -1 and knees at 1e5, 4e5.
    pub(crate) fn three_segment(n: usize) -> CcdfCurve {
        let (b1, b2) = (5.0, 4e5f64.log10());
        let y = |x: f64| -0.2 * (x - 3.0) - 2.3 * (x - b1).max(0.0) + 1.5 * (x - b2).max(0.0) - 0.05;
        let pts = (0..n)
            .map(|i| {
                let x = 7.0 - 4.0 * i as f64 / (n - 1) as f64;
                CcdfPoint {
                    income: 10f64.powf(x),
                    exceedance: 10f64.powf(y(x)),
                }
            })
            .collect();
        CcdfCurve::from_points(pts).unwrap()
    }

    #[test]
    fn finds_constructed_knees() {
        let g = crossover_guess(&three_segment(2000)).unwrap();
        let half_cell = 0.5 * 4.0 / GRID_CELLS as f64;
        assert!((g.m0.log10() - 5.0).abs() <= half_cell, "{}", g.m0);
        assert!((g.m1.log10() - 4e5f64.log10()).abs() <= half_cell, "{}", g.m1);
        assert!(!g.low_confidence);
        assert!((g.slopes[1] + 2.5).abs() < 0.2);
    }

    #[test]
    fn straight_line_is_low_confidence() {
        let pts = (0..500)
            .map(|i| {
                let x = 6.0 - 3.0 * i as f64 / 499.0;
                CcdfPoint {
                    income: 10f64.powf(x),
                    exceedance: 10f64.powf(-1.5 * (x - 3.0) - 0.01),
                }
            })
            .collect();
        let c = CcdfCurve::from_points(pts).unwrap();
        let g = crossover_guess(&c).unwrap();
        assert!(g.low_confidence);
        assert!((g.m0 - 1e3).abs() < 1e-6 && (g.m1 / 1e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_shifts_guesses() {
        let c = three_segment(1000);
        let g = crossover_guess(&c).unwrap();
        let scaled = CcdfCurve::from_points(
            c.points()
                .iter()
                .map(|p| CcdfPoint { income: p.income * 7.0, ..*p })
                .collect(),
        )
        .unwrap();
        let h = crossover_guess(&scaled).unwrap();
        assert!((h.m0 / g.m0 - 7.0).abs() < 1e-6);
        assert!((h.m1 / g.m1 - 7.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let c = three_segment(99);
        assert!(matches!(crossover_guess(&c), Err(Error::Config(_))));
    }
}
