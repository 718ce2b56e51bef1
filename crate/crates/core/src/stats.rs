//! Goodness-of-fit helpers.

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `sorted` (ascending) and a continuous CDF.
pub fn ks_distance<F: FnMut(f64) -> f64>(sorted: &[f64], mut cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (hi - f).max(f - lo)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_distance() {
        // midpoints of n cells against U(0,1): D = 1/(2n)
        let n = 10;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.05).abs() < 1e-15);
    }

    #[test]
    fn disjoint_support_is_one() {
        let d = ks_distance(&[5.0, 6.0], |x| x.clamp(0.0, 1.0));
        assert!((d - 1.0).abs() < 1e-15);
    }
}
