use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use incomeflow::empirical::{build_ccdf, IncomeSample, Source};
use incomeflow::fit::FitReport;
use incomeflow::io::{read_ccdf, read_incomes, write_incomes};
use incomeflow::model::{ccdf_eq, mds_row, normalize, sample};
use incomeflow::sim::SimConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incomeflow"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn three_row_ccdf() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("three.csv");
    fs::write(&input, "income,source,year\n10,survey,2008\n20,survey,2008\n30,survey,2008\n").unwrap();
    let o = run(&["ccdf", "--input", input.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = fs::read_to_string(dir.path().join("three.ccdf.tsv")).unwrap();
    assert_eq!(tsv, "income\texceedance\n30\t0.25\n20\t0.5\n10\t0.75\n");

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("three.ccdf.tsv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "ccdf");
    assert_eq!(manifest["inputs"][0], input.to_str().unwrap());
}

#[test]
fn empty_file_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let o = run(&["ccdf", "--input", input.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty.csv"), "{}", stderr(&o));

    fs::write(&input, "income,source,year\n").unwrap();
    let o = run(&["ccdf", "--input", input.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty.csv"), "{}", stderr(&o));
}

#[test]
fn malformed_row_aborts_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "income,source,year\n10,survey,2008\nten,survey,2008\n").unwrap();
    let o = run(&["ccdf", "--input", input.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.csv:3:"), "{}", stderr(&o));
    assert!(!dir.path().join("bad.ccdf.tsv").exists());
}

#[test]
fn large_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("big.csv");
    let s = sample(&normalize(&mds_row(2008).unwrap()).unwrap(), 100_000, 5, 2008).unwrap();
    write_incomes(&input, &s).unwrap();
    assert_eq!(read_incomes(&input).unwrap().records(), s.records());

    let o = run(&["ccdf", "--input", input.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let back = read_ccdf(&dir.path().join("big.ccdf.tsv")).unwrap();
    assert_eq!(back, build_ccdf(&s).unwrap());
}

/// Survey of 2008 draws plus a rich list whose income is a hundred times the
/// survey's top decile.
fn match_inputs(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf, usize, usize) {
    let survey = sample(&normalize(&mds_row(2008).unwrap()).unwrap(), 20_000, 3, 2008).unwrap();
    let survey_path = dir.join("survey.csv");
    write_incomes(&survey_path, &survey).unwrap();

    let mut incomes = survey.incomes();
    incomes.sort_by(f64::total_cmp);
    let top = &incomes[incomes.len() * 9 / 10..];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut text = String::from("person_id,year,wealth_eur\n");
    let mut gains = 0;
    for (i, &m) in top.iter().enumerate() {
        let w0 = 1e9 * (1.0 + rng.sample::<f64, _>(Open01));
        text.push_str(&format!("p{i},2007,{w0}\np{i},2008,{}\n", w0 + 100.0 * m));
        gains += 1;
    }
    text.push_str("loser,2007,5e9\nloser,2008,4e9\nnewcomer,2008,3e9\n");
    let wealth_path = dir.join("wealth.csv");
    fs::write(&wealth_path, text).unwrap();
    (survey_path, wealth_path, survey.len(), gains)
}

#[test]
fn match_recovers_planted_factor() {
    let dir = tempfile::tempdir().unwrap();
    let (survey, wealth, n_survey, n_rich) = match_inputs(dir.path());
    let o = run(
        &["match", "--input", survey.to_str().unwrap(), "--wealth", wealth.to_str().unwrap(), "--year", "2008"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("factor 1.00e-2"), "{}", stdout(&o));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("match_2008.json")).unwrap()).unwrap();
    let factor = summary["factor"].as_f64().unwrap();
    assert!((factor / 1e-2 - 1.0).abs() < 0.01, "{factor}");
    assert_eq!(summary["year"], 2008);

    let merged = read_incomes(&dir.path().join("merged_2008.csv")).unwrap();
    assert_eq!(merged.len(), n_survey + n_rich);
    assert_eq!(merged.count(Source::RichList), n_rich);
    assert!(dir.path().join("merged_2008.csv.manifest.json").exists());
}

#[test]
fn match_without_previous_year_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (survey, _, _, _) = match_inputs(dir.path());
    let wealth = dir.path().join("only2008.csv");
    fs::write(&wealth, "person_id,year,wealth_eur\na,2008,1e9\nb,2008,2e9\n").unwrap();
    let o = run(
        &["match", "--input", survey.to_str().unwrap(), "--wealth", wealth.to_str().unwrap(), "--year", "2008"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("only2008.csv") && err.contains("2007"), "{err}");
}

#[test]
fn fit_overlay_matches_reported_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("draws.csv");
    let s = sample(&normalize(&mds_row(2008).unwrap()).unwrap(), 20_000, 9, 2008).unwrap();
    write_incomes(&input, &s).unwrap();
    let o = run(
        &["fit", "--input", input.to_str().unwrap(), "--decimate", "20", "--allow-nonconverged"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let report: FitReport = serde_json::from_str(&fs::read_to_string(dir.path().join("fit_2008.json")).unwrap()).unwrap();
    assert_eq!(report.year, Some(2008));
    let overlay = fs::read_to_string(dir.path().join("overlay_2008.tsv")).unwrap();
    let mut lines = overlay.lines();
    assert_eq!(lines.next(), Some("income\tempirical\tmodel"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split('\t').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[2], ccdf_eq(v[0], &report.params).unwrap(), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 100 + (20_000 - 100 + 19) / 20);

    let script = fs::read_to_string(dir.path().join("overlay_2008.gp")).unwrap();
    assert!(script.contains(&format!("set arrow from {}, graph 0", report.params.m0)));
    assert!(script.contains(&format!("set arrow from {}, graph 0", report.params.m1)));

    let table = fs::read_to_string(dir.path().join("fits.txt")).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["Year", "T", "T1", "m0", "m1", "alpha", "alpha1", "residual"]);
    assert_eq!(table.lines().nth(1).unwrap().split_whitespace().count(), 8);
}

#[test]
fn fit_on_exceedance_tsv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let draws = dir.path().join("draws.csv");
    let s = sample(&normalize(&mds_row(2010).unwrap()).unwrap(), 5_000, 2, 2010).unwrap();
    write_incomes(&draws, &s).unwrap();
    assert!(run(&["ccdf", "--input", draws.to_str().unwrap()], dir.path()).status.success());
    let tsv = dir.path().join("draws.ccdf.tsv");
    let o = run(
        &["fit", "--input", tsv.to_str().unwrap(), "--year", "2010", "--allow-nonconverged"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit_json = dir.path().join("fit_2010.json");
    let o = run(&["report", "--input", fit_json.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("Year") && out.lines().nth(1).unwrap().starts_with("2010"), "{out}");
}

#[test]
fn nonconvergence_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("draws.csv");
    let s = sample(&normalize(&mds_row(2008).unwrap()).unwrap(), 5_000, 1, 2008).unwrap();
    write_incomes(&input, &s).unwrap();
    let cfg = dir.path().join("fit.json");
    fs::write(&cfg, r#"{"max_evals": 5}"#).unwrap();
    let args = ["fit", "--input", input.to_str().unwrap(), "--config", cfg.to_str().unwrap()];
    assert_eq!(run(&args, dir.path()).status.code(), Some(3));
    let mut allowed = args.to_vec();
    allowed.push("--allow-nonconverged");
    assert!(run(&allowed, dir.path()).status.success());
}

#[test]
fn simulate_default_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--seed", "7"], a.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("simulation.json")).unwrap()).unwrap();
    assert!(summary["ks_distance"].as_f64().unwrap() < 0.03, "{summary}");
    assert!(summary["n_samples"].as_u64().unwrap() >= 100_000);
    assert_eq!(summary["config"]["seed"], 7);

    assert!(run(&["simulate", "--seed", "7", "--jobs", "2"], b.path()).status.success());
    let ha = fs::read(a.path().join("histogram.tsv")).unwrap();
    let hb = fs::read(b.path().join("histogram.tsv")).unwrap();
    assert_eq!(ha, hb);
}

#[test]
fn simulate_rejects_unstable_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig {
        dt: 0.5,
        ..SimConfig::default()
    };
    let path = dir.path().join("sim.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unstable"), "{}", stderr(&o));
    assert!(!dir.path().join("histogram.tsv").exists());
}

#[test]
fn sample_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--table", "survey", "--year", "2009", "--count", "1000", "--seed", "4"];
    assert!(run(&args, dir.path()).status.success());
    let first = fs::read(dir.path().join("sample_2009.csv")).unwrap();
    assert!(run(&args, dir.path()).status.success());
    assert_eq!(first, fs::read(dir.path().join("sample_2009.csv")).unwrap());
    let s: IncomeSample = read_incomes(&dir.path().join("sample_2009.csv")).unwrap();
    assert_eq!(s.len(), 1000);
    assert!(s.records().iter().all(|r| r.year == 2009));
}
