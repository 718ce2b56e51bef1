//! Income records and the rank-based (Weibull) empirical exceedance curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where an income record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Survey,
    RichList,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Survey => "survey",
            Source::RichList => "rich_list",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "survey" => Ok(Source::Survey),
            "rich_list" => Ok(Source::RichList),
            other => Err(format!(
                "unknown source `{other}` (expected `survey` or `rich_list`)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeRecord {
    /// Annual income, EUR/year.
    pub income: f64,
    pub source: Source,
    pub year: i32,
}

/// A set of annual household incomes. Every income is finite and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeSample {
    records: Vec<IncomeRecord>,
    pub metadata: String,
}

impl IncomeSample {
    pub fn new(records: Vec<IncomeRecord>, metadata: impl Into<String>) -> Result<Self> {
        if let Some((i, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.income.is_finite() && r.income > 0.0))
        {
            return Err(Error::InvalidParams(format!(
                "record {i} has non-positive income {}",
                r.income
            )));
        }
        Ok(IncomeSample {
            records,
            metadata: metadata.into(),
        })
    }

    /// Builds a sample with one source and year from bare incomes.
    pub fn from_incomes(incomes: &[f64], source: Source, year: i32) -> Result<Self> {
        Self::new(
            incomes
                .iter()
                .map(|&income| IncomeRecord {
                    income,
                    source,
                    year,
                })
                .collect(),
            String::new(),
        )
    }

    pub fn records(&self) -> &[IncomeRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<IncomeRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn incomes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.income).collect()
    }

    pub fn count(&self, source: Source) -> usize {
        self.records.iter().filter(|r| r.source == source).count()
    }

    pub fn max_income(&self) -> Option<f64> {
        self.records.iter().map(|r| r.income).max_by(f64::total_cmp)
    }

    /// Multiplies every income by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.records
                .iter()
                .map(|r| IncomeRecord {
                    income: r.income * factor,
                    ..*r
                })
                .collect(),
            self.metadata.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub income: f64,
    pub exceedance: f64,
}

/// Exceedance curve in rank order: richest first, exceedance increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    points: Vec<CcdfPoint>,
}

impl CcdfCurve {
    /// Accepts any curve whose incomes do not increase and whose exceedances
    /// strictly increase inside `(0, 1)` along the rank order.
    pub fn from_points(points: Vec<CcdfPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample("exceedance curve has no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.income.is_finite() && p.income > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "point {i}: income {} is not positive",
                    p.income
                )));
            }
            if !(p.exceedance > 0.0 && p.exceedance < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "point {i}: exceedance {} outside (0, 1)",
                    p.exceedance
                )));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].income > w[0].income || w[1].exceedance <= w[0].exceedance {
                return Err(Error::InvalidParams(format!(
                    "points {i} and {} are not in rank order",
                    i + 1
                )));
            }
        }
        Ok(CcdfCurve { points })
    }

    pub fn points(&self) -> &[CcdfPoint] {
        &self.points
    }

    /// Underlying record count.
    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// Ranks incomes from richest to poorest and assigns the `l`-th record the
/// exceedance `l / (n + 1)`. Equal incomes keep distinct ranks in input order.
pub fn build_ccdf(sample: &IncomeSample) -> Result<CcdfCurve> {
    if sample.is_empty() {
        return Err(Error::EmptySample("cannot rank an empty sample".into()));
    }
    let mut incomes = sample.incomes();
    // stable: ties stay in input order
    incomes.sort_by(|a, b| b.total_cmp(a));
    let denom = (incomes.len() + 1) as f64;
    let points = incomes
        .into_iter()
        .enumerate()
        .map(|(i, income)| CcdfPoint {
            income,
            exceedance: (i + 1) as f64 / denom,
        })
        .collect();
    Ok(CcdfCurve { points })
}

/// Number of richest points that are never decimated.
pub const UNDECIMATED_TOP: usize = 100;

/// `(log10 income, log10 exceedance)` rows for plotting: the 100 richest
/// points, then every `decimation`-th remaining point.
pub fn loglog_points(curve: &CcdfCurve, decimation: usize) -> Result<Vec<(f64, f64)>> {
    if decimation == 0 {
        return Err(Error::Config("decimation must be at least 1".into()));
    }
    Ok(curve
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < UNDECIMATED_TOP || (i - UNDECIMATED_TOP).is_multiple_of(decimation))
        .map(|(_, p)| (p.income.log10(), p.exceedance.log10()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> IncomeSample {
        IncomeSample::from_incomes(v, Source::Survey, 2008).unwrap()
    }

    #[test]
    fn three_records() {
        let c = build_ccdf(&sample(&[10.0, 20.0, 30.0])).unwrap();
        let got: Vec<(f64, f64)> = c.points().iter().map(|p| (p.income, p.exceedance)).collect();
        assert_eq!(got, vec![(30.0, 0.25), (20.0, 0.5), (10.0, 0.75)]);
    }

    #[test]
    fn single_record() {
        let c = build_ccdf(&sample(&[42.0])).unwrap();
        assert_eq!(c.points(), &[CcdfPoint { income: 42.0, exceedance: 0.5 }]);
    }

    #[test]
    fn empty_rejected() {
        let s = IncomeSample::new(vec![], "").unwrap();
        assert!(matches!(build_ccdf(&s), Err(Error::EmptySample(_))));
    }

    #[test]
    fn non_positive_income_rejected() {
        assert!(IncomeSample::from_incomes(&[1.0, 0.0], Source::Survey, 1).is_err());
    }

    #[test]
    fn ties_keep_distinct_ranks() {
        let c = build_ccdf(&sample(&[5.0, 5.0, 5.0])).unwrap();
        let ex: Vec<f64> = c.points().iter().map(|p| p.exceedance).collect();
        assert_eq!(ex, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn decimation_one_is_identity() {
        let c = build_ccdf(&sample(&(1..=300).map(f64::from).collect::<Vec<_>>())).unwrap();
        let pts = loglog_points(&c, 1).unwrap();
        assert_eq!(pts.len(), 300);
        for (p, q) in pts.iter().zip(c.points()) {
            assert_eq!(*p, (q.income.log10(), q.exceedance.log10()));
        }
        assert!(loglog_points(&c, 0).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut v in prop::collection::hash_set(1u32..1_000_000, 1..200)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>()), seed in any::<u64>()) {
            let a = build_ccdf(&sample(&v)).unwrap();
            // deterministic shuffle
            let n = v.len();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                v.swap(i, (state >> 33) as usize % (i + 1));
            }
            let b = build_ccdf(&sample(&v)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn extreme_ranks(v in prop::collection::vec(1.0f64..1e9, 1..300)) {
            let c = build_ccdf(&sample(&v)).unwrap();
            let n = v.len() as f64;
            prop_assert_eq!(c.points()[0].exceedance, 1.0 / (n + 1.0));
            prop_assert_eq!(c.points().last().unwrap().exceedance, n / (n + 1.0));
            prop_assert!(c.points().windows(2).all(|w| w[0].income >= w[1].income));
        }

        #[test]
        fn new_maximum_shifts_ranks(v in prop::collection::vec(1.0f64..1e6, 1..200)) {
            let c = build_ccdf(&sample(&v)).unwrap();
            let mut w = v.clone();
            w.push(1e7);
            let d = build_ccdf(&sample(&w)).unwrap();
            let n = v.len() as f64;
            for (l, p) in c.points().iter().enumerate() {
                let q = d.points()[l + 1];
                prop_assert_eq!(q.income, p.income);
                prop_assert!((q.exceedance - (l as f64 + 2.0) / (n + 2.0)).abs() < 1e-15);
            }
        }

        #[test]
        fn decimated_count(n in 101usize..3000, dec in 1usize..50) {
            let v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let c = build_ccdf(&sample(&v)).unwrap();
            let pts = loglog_points(&c, dec).unwrap();
            prop_assert_eq!(pts.len(), (n - 100).div_ceil(dec) + 100);
            prop_assert!(pts.windows(2).all(|w| w[0].0 >= w[1].0 && w[0].1 < w[1].1));
        }
    }
}
