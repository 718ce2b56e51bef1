//! Ensemble simulation of the threshold Langevin dynamics
//!
//! ```text
//! dm = -A(m) dt + sqrt(2 B(m)) dW        (Itô)
//! ```
//!
//! by Euler–Maruyama with reflection at zero. Each agent owns a ChaCha8
//! stream selected by its index, so results do not depend on how agents are
//! spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mds_row, shape_from_langevin, EyDistribution, EyShape, LangevinParams};
use crate::quad;
use crate::stats::ks_distance;

/// States are recorded every `RECORD_STRIDE` steps after burn-in.
pub const RECORD_STRIDE: usize = 10;
const STABILITY_LIMIT: f64 = 0.1;
const DEFAULT_BINS: usize = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Boundary {
    #[default]
    ReflectAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lp: LangevinParams,
    pub n_agents: usize,
    /// Time step, years.
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub seed: u64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for SimConfig {
    /// The 2009 MDS row with `b = 1/year`: 10^5 recorded states.
    fn default() -> Self {
        let shape = mds_row(2009).expect("2009 row is tabulated");
        Self::for_shape(&shape, 1.0, 0).expect("tabulated row converts")
    }
}

impl SimConfig {
    /// Default run settings for the dynamics behind `shape`, with gauge `b`.
    pub fn for_shape(shape: &EyShape, b: f64, seed: u64) -> Result<Self> {
        Ok(SimConfig {
            lp: LangevinParams::from_shape(shape, b)?,
            n_agents: 10_000,
            dt: 1e-3,
            t_burn: 15.0,
            t_sample: 0.1,
            seed,
            boundary: Boundary::ReflectAtZero,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_burn > 0.0 && self.t_sample > 0.0) {
            return Err(Error::Config(format!(
                "burn-in and sampling horizons must be positive (t_burn = {}, t_sample = {})",
                self.t_burn, self.t_sample
            )));
        }
        let rate = self.dt * self.lp.a.abs().max(self.lp.a_prime.abs()).max(self.lp.b);
        if rate >= STABILITY_LIMIT {
            return Err(Error::UnstableStep(rate));
        }
        if self.sample_steps() < RECORD_STRIDE {
            return Err(Error::Config(format!(
                "t_sample = {} is shorter than one recording stride ({} steps of {})",
                self.t_sample, RECORD_STRIDE, self.dt
            )));
        }
        Ok(())
    }

    fn burn_steps(&self) -> usize {
        (self.t_burn / self.dt).ceil() as usize
    }

    fn sample_steps(&self) -> usize {
        (self.t_sample / self.dt).ceil() as usize
    }

    /// Number of states each agent contributes.
    pub fn records_per_agent(&self) -> usize {
        self.sample_steps() / RECORD_STRIDE
    }
}

/// One Euler–Maruyama step with reflection at zero.
#[inline]
pub fn step(m: f64, dt: f64, lp: &LangevinParams, noise: f64) -> f64 {
    let next = m - lp.drift(m) * dt + (2.0 * lp.diffusion(m) * dt).sqrt() * noise;
    next.abs()
}

/// Density histogram of the recorded states on a log-spaced grid. The first
/// bin is `[0, lo)`; the last bin's upper edge stretches to the largest
/// recorded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryHistogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: usize,
    counts: Vec<u64>,
    /// Recorded states, ascending.
    #[serde(skip)]
    samples: Vec<f64>,
}

impl StationaryHistogram {
    /// Bins `samples` on `[0, lo, ..., hi]` with `bins` log-spaced bins above
    /// `lo`. Samples above `hi` widen the last bin.
    pub fn from_samples(mut samples: Vec<f64>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample("no recorded states".into()));
        }
        if samples.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParams("recorded state is negative or non-finite".into()));
        }
        samples.sort_by(f64::total_cmp);
        let mut edges = vec![0.0];
        edges.extend(quad::geomspace(lo, hi, bins + 1));
        let top = samples[samples.len() - 1];
        let last = edges.len() - 1;
        if top >= edges[last] {
            edges[last] = top * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        }
        let mut counts = vec![0u64; edges.len() - 1];
        let mut bin = 0;
        for &m in &samples {
            while m >= edges[bin + 1] {
                bin += 1;
            }
            counts[bin] += 1;
        }
        Ok(Self::assemble(edges, counts, samples))
    }

    fn assemble(bin_edges: Vec<f64>, counts: Vec<u64>, samples: Vec<f64>) -> Self {
        let n: u64 = counts.iter().sum();
        let densities = counts
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (n as f64 * (w[1] - w[0])))
            .collect();
        StationaryHistogram {
            bin_edges,
            densities,
            n_samples: n as usize,
            counts,
            samples,
        }
    }

    /// Combines two histograms over the same grid; only the stretched upper
    /// edge may differ.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let k = self.bin_edges.len();
        if k != other.bin_edges.len() || self.bin_edges[..k - 1] != other.bin_edges[..k - 1] {
            return Err(Error::Config("histograms have different bin grids".into()));
        }
        let mut edges = self.bin_edges.clone();
        edges[k - 1] = edges[k - 1].max(other.bin_edges[k - 1]);
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        let mut samples = Vec::with_capacity(self.samples.len() + other.samples.len());
        samples.extend_from_slice(&self.samples);
        samples.extend_from_slice(&other.samples);
        samples.sort_by(f64::total_cmp);
        Ok(Self::assemble(edges, counts, samples))
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Geometric bin centers (arithmetic for the first bin, which starts at 0).
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| {
                if w[0] == 0.0 {
                    0.5 * w[1]
                } else {
                    (w[0] * w[1]).sqrt()
                }
            })
            .collect()
    }

    /// `bin_center\tdensity` rows with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bin_center\tdensity\n");
        for (c, d) in self.bin_centers().iter().zip(&self.densities) {
            out.push_str(&format!("{c}\t{d}\n"));
        }
        out
    }

    /// KS distance between the recorded states and `dist`.
    pub fn ks_distance(&self, dist: &EyDistribution) -> f64 {
        ks_distance(&self.samples, |m| 1.0 - dist.ccdf(m).unwrap_or(1.0))
    }
}

fn agent_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

fn run_agent(cfg: &SimConfig, agent: usize) -> Vec<f64> {
    let mut rng = agent_rng(cfg.seed, agent);
    let lp = &cfg.lp;
    let mut m = lp.m_init;
    for _ in 0..cfg.burn_steps() {
        m = step(m, cfg.dt, lp, StandardNormal.sample(&mut rng));
    }
    let mut out = Vec::with_capacity(cfg.records_per_agent());
    for k in 1..=cfg.records_per_agent() * RECORD_STRIDE {
        m = step(m, cfg.dt, lp, StandardNormal.sample(&mut rng));
        if k % RECORD_STRIDE == 0 {
            out.push(m);
        }
    }
    out
}

/// Grid used for every histogram of `cfg`: from `min(T, m0) 1e-3` to `1e4 m1`.
fn grid_bounds(cfg: &SimConfig) -> (f64, f64) {
    let lp = &cfg.lp;
    let t = lp.b0 / lp.a0.abs().max(f64::MIN_POSITIVE);
    let lo = t.min(lp.m0()).min(lp.m1) * 1e-3;
    (lo, (lp.m1 * 1e4).max(lo * 10.0))
}

/// Runs the ensemble on the global rayon pool.
pub fn simulate(cfg: &SimConfig) -> Result<StationaryHistogram> {
    cfg.validate()?;
    let per_agent: Vec<Vec<f64>> = (0..cfg.n_agents)
        .into_par_iter()
        .map(|i| run_agent(cfg, i))
        .collect();
    let (lo, hi) = grid_bounds(cfg);
    StationaryHistogram::from_samples(per_agent.concat(), lo, hi, DEFAULT_BINS)
}

/// Runs the ensemble on a dedicated pool of `threads` workers.
pub fn simulate_with_threads(cfg: &SimConfig, threads: usize) -> Result<StationaryHistogram> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| simulate(cfg))
}

/// Simulates `cfg` and reports the KS distance to the closed form implied by
/// its coefficients.
pub fn simulate_against_closed_form(cfg: &SimConfig) -> Result<(StationaryHistogram, f64)> {
    let hist = simulate(cfg)?;
    let dist = EyDistribution::from_shape(&shape_from_langevin(&cfg.lp))?;
    let ks = hist.ks_distance(&dist);
    Ok((hist, ks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp() -> LangevinParams {
        LangevinParams {
            a0: 2.0,
            a: 0.5,
            a0_prime: 1.0,
            a_prime: 0.25,
            b0: 1.0,
            b: 0.1,
            m1: 10.0,
            m_init: 0.0,
        }
    }

    #[test]
    fn noiseless_step_is_drift() {
        let lp = lp();
        let m = 3.0;
        assert_eq!(step(m, 0.01, &lp, 0.0), m - (lp.a0 + lp.a * m) * 0.01);
    }

    #[test]
    fn reflects_at_zero() {
        let lp = lp();
        let next = step(0.0, 0.01, &lp, 0.0);
        assert!((next - lp.a0 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_unstable_step() {
        let cfg = SimConfig {
            lp: lp(),
            n_agents: 10,
            dt: 0.5,
            t_burn: 1.0,
            t_sample: 10.0,
            seed: 1,
            boundary: Boundary::ReflectAtZero,
        };
        assert!(matches!(simulate(&cfg), Err(Error::UnstableStep(_))));
    }

    #[test]
    fn histogram_is_a_density() {
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) * 0.37).collect();
        let h = StationaryHistogram::from_samples(samples, 0.1, 100.0, 50).unwrap();
        let mass: f64 = h
            .densities
            .iter()
            .zip(h.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
        assert_eq!(h.n_samples, 1000);
    }

    #[test]
    fn merge_is_commutative() {
        let a = StationaryHistogram::from_samples(vec![0.5, 1.0, 7.0], 0.1, 10.0, 8).unwrap();
        let b = StationaryHistogram::from_samples(vec![0.05, 3.0, 40.0], 0.1, 10.0, 8).unwrap();
        let ab = a.merge(&b).unwrap();
        assert_eq!(ab, b.merge(&a).unwrap());
        assert_eq!(ab.n_samples, 6);
        let all = StationaryHistogram::from_samples(vec![0.5, 1.0, 7.0, 0.05, 3.0, 40.0], 0.1, 10.0, 8)
            .unwrap();
        assert_eq!(ab.counts(), all.counts());
    }
}
