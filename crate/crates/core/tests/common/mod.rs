#![allow(dead_code)]

//! Test-only numerical oracles. These deliberately use a different scheme
//! (adaptive Simpson in `ln m`) from the library's Gauss–Kronrod code.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `integral_{lo}^{hi} g(m) dm` computed as `integral g(e^t) e^t dt`, split into
/// unit-length pieces in `t` so the recursion starts fine enough.
pub fn simpson_log<F: Fn(f64) -> f64>(g: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let (t0, t1) = (lo.ln(), hi.ln());
    let pieces = ((t1 - t0).ceil() as usize).max(1);
    let h = (t1 - t0) / pieces as f64;
    let f = |t: f64| {
        let m = t.exp();
        g(m) * m
    };
    (0..pieces)
        .map(|i| simpson(&f, t0 + i as f64 * h, t0 + (i + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
