use incomeflow::empirical::{build_ccdf, CcdfCurve, CcdfPoint, IncomeSample, Source};
use incomeflow::fit::{crossover_guess, fit, format_table, objective, FitConfig, FitFlag, Param};
use incomeflow::matching::find_factor;
use incomeflow::model::{mds_row, normalize, sample, EyDistribution, EyShape, InverseCdf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;

fn exact_curve(shape: &EyShape, n: usize) -> CcdfCurve {
    let d = EyDistribution::from_shape(shape).unwrap();
    let pts = (0..n)
        .map(|i| {
            let m = 1e8 * (1e3f64 / 1e8).powf(i as f64 / (n - 1) as f64);
            CcdfPoint {
                income: m,
                exceedance: d.ccdf(m).unwrap(),
            }
        })
        .collect();
    CcdfCurve::from_points(pts).unwrap()
}

fn drawn_curve(shape: &EyShape, n: usize, seed: u64) -> CcdfCurve {
    let p = normalize(shape).unwrap();
    build_ccdf(&sample(&p, n, seed, 2008).unwrap()).unwrap()
}

#[test]
fn noise_free_curve_returns_its_parameters() {
    for shape in [mds_row(2008).unwrap(), mds_row(2010).unwrap()] {
        let r = fit(&exact_curve(&shape, 400), &FitConfig::default()).unwrap();
        assert!(r.converged);
        for (name, (got, want)) in ["T", "T1", "m0", "m1", "alpha", "alpha1"]
            .iter()
            .zip(r.params.shape().to_array().iter().zip(shape.to_array()))
        {
            assert!((got / want - 1.0).abs() < 1e-3, "{name}: {got} vs {want}");
        }
        assert!(r.residual_rms < 1e-5);
    }
}

#[test]
fn fixed_parameters_stay_fixed() {
    let shape = mds_row(2008).unwrap();
    let mut start = shape;
    start.alpha = 2.5;
    start.m0 = 100_000.0;
    let cfg = FitConfig {
        free_params: vec![Param::M0, Param::Alpha],
        initial_guess: Some(normalize(&start).unwrap()),
        ..FitConfig::default()
    };
    let r = fit(&exact_curve(&shape, 300), &cfg).unwrap();
    let got = r.params.shape();
    assert_eq!((got.t, got.t1, got.m1, got.alpha1), (shape.t, shape.t1, shape.m1, shape.alpha1));
    assert!((got.alpha - shape.alpha).abs() < 1e-4);
    assert!((got.m0 / shape.m0 - 1.0).abs() < 1e-4);
}

#[test]
fn deterministic() {
    let c = drawn_curve(&mds_row(2008).unwrap(), 20_000, 11);
    let a = fit(&c, &FitConfig::default()).unwrap();
    let b = fit(&c, &FitConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fit_beats_generating_parameters() {
    let shape = mds_row(2008).unwrap();
    let c = drawn_curve(&shape, 100_000, 21);
    let r = fit(&c, &FitConfig::default()).unwrap();
    assert!(r.converged);
    let truth = objective(&normalize(&shape).unwrap(), &c).unwrap();
    assert!(r.objective <= truth * (1.0 + 1e-9), "{} > {truth}", r.objective);
}

#[test]
fn regime_with_close_exponents() {
    let shape = mds_row(2009).unwrap();
    for seed in 31..34 {
        let r = fit(&drawn_curve(&shape, 100_000, seed), &FitConfig::default()).unwrap();
        assert!(
            (r.params.alpha1 - shape.alpha1).abs() < 0.15,
            "seed {seed}: alpha1 = {}",
            r.params.alpha1
        );
    }
}

#[test]
fn exponential_sample_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let v: Vec<f64> = (0..100_000)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            -40_000.0 * u.ln()
        })
        .collect();
    let c = build_ccdf(&IncomeSample::from_incomes(&v, Source::Survey, 2008).unwrap()).unwrap();
    let r = fit(&c, &FitConfig::default()).unwrap();
    assert!(r.params.m0 > 0.5 * c.points()[0].income, "m0 = {}", r.params.m0);
    assert!(r.has(FitFlag::DegenerateTail));
    assert!(r.has(FitFlag::CrossoverBeyondBulk));
    assert!((r.params.t / 40_000.0 - 1.0).abs() < 0.05);
}

#[test]
fn knees_of_drawn_curve_bracket_the_medium_class() {
    let c = drawn_curve(&mds_row(2008).unwrap(), 100_000, 51);
    let g = crossover_guess(&c).unwrap();
    assert!(!g.low_confidence);
    assert!(g.m0 < g.m1);
    assert!(g.slopes[1] < g.slopes[0] && g.slopes[2] > g.slopes[1]);
}

#[test]
fn merged_pareto_tail_sets_alpha1() {
    let p = normalize(&mds_row(2008).unwrap()).unwrap();
    let dist = EyDistribution::new(&p).unwrap();
    let inv = InverseCdf::new(&dist).unwrap();
    let n = 100_000;
    let cut = inv.income_at_exceedance(1e-3);
    let v: Vec<f64> = sample(&p, n, 61, 2008)
        .unwrap()
        .incomes()
        .into_iter()
        .filter(|&x| x <= cut)
        .collect();
    let survey = IncomeSample::from_incomes(&v, Source::Survey, 2008).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let k = (dist.ccdf(p.m1).unwrap() * n as f64) as usize;
    let tail: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            p.m1 * u.powf(-1.0 / 0.890) * 100.0
        })
        .collect();
    let rich = IncomeSample::from_incomes(&tail, Source::RichList, 2008).unwrap();
    let m = find_factor(&survey, &rich).unwrap();
    assert!(m.junction_gap < 0.15);
    let r = fit(&build_ccdf(&m.merged).unwrap(), &FitConfig::default()).unwrap();
    assert!((r.params.alpha1 - 0.890).abs() < 0.1, "alpha1 = {}", r.params.alpha1);
}

#[test]
fn report_table_and_json() {
    let shape = mds_row(2008).unwrap();
    let mut r = fit(&exact_curve(&shape, 200), &FitConfig::default()).unwrap();
    r.year = Some(2008);
    let table = format_table(&[r.clone()]);
    assert!(table.lines().next().unwrap().split_whitespace().eq(
        ["Year", "T", "T1", "m0", "m1", "alpha", "alpha1", "residual"]
    ));
    assert!(table.contains("2008") && table.contains("2.965"));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["params"]["alpha1"].as_f64().map(|a| (a * 1e3).round()), Some(890.0));
    assert!(json["residual_rms"].as_f64().unwrap() >= 0.0);
}
