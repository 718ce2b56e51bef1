use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use incomeflow::empirical::{build_ccdf, CcdfCurve, IncomeSample, Source, UNDECIMATED_TOP};
use incomeflow::fit::{format_table, FitConfig, FitReport};
use incomeflow::io::{
    read_ccdf, read_incomes, read_json, read_wealth, write_ccdf_file, write_incomes, write_json,
    write_text,
};
use incomeflow::matching::{estimate_incomes, find_factor_with, MatchConfig, MatchSummary};
use incomeflow::model::{mds_row, normalize, sample as draw, survey_row, EyDistribution, EyParams, EyShape};
use incomeflow::sim::{simulate_against_closed_form, SimConfig};
use incomeflow::{Error, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::{Command, RunManifest};
use crate::{Common, Table};

/// Exit status of a fit that stopped before converging.
const NOT_CONVERGED: u8 = 3;

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).map_err(|e| Error::File {
        path: common.out.clone(),
        message: e.to_string(),
    })?;
    Ok(&common.out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Makes sure an error mentions the file it came from.
fn in_file(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parse { .. } | Error::File { .. } => e,
        other => Error::File {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn config_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

pub fn ccdf(inputs: &[PathBuf], decimate: usize, common: &Common) -> Result<ExitCode> {
    let dir = out_dir(common)?;
    let mut manifest = RunManifest::new(
        Command::Ccdf,
        inputs.to_vec(),
        serde_json::json!({ "decimate": decimate }),
        None,
    );
    for input in inputs {
        let sample = read_incomes(input)?;
        let curve = build_ccdf(&sample).map_err(in_file(input))?;
        let out = dir.join(format!("{}.ccdf.tsv", stem(input)));
        write_ccdf_file(&out, &curve, decimate)?;
        info!("{}: {} points -> {}", input.display(), curve.n(), out.display());
        manifest.outputs.push(out);
    }
    manifest.write_sidecars()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MatchOutput {
    year: i32,
    #[serde(flatten)]
    summary: MatchSummary,
}

fn match_year(
    survey: &IncomeSample,
    survey_path: &Path,
    wealth: &[incomeflow::matching::WealthRecord],
    wealth_path: &Path,
    year: i32,
    cfg: &MatchConfig,
) -> Result<(MatchOutput, IncomeSample)> {
    let records: Vec<_> = survey
        .records()
        .iter()
        .filter(|r| r.year == year && r.source == Source::Survey)
        .copied()
        .collect();
    if records.is_empty() {
        return Err(Error::File {
            path: survey_path.to_path_buf(),
            message: format!("no survey records for {year}"),
        });
    }
    for y in [year - 1, year] {
        if !wealth.iter().any(|w| w.year == y) {
            return Err(Error::File {
                path: wealth_path.to_path_buf(),
                message: format!("no wealth entries for {y}; incomes for {year} need {} and {year}", year - 1),
            });
        }
    }
    let survey = IncomeSample::new(records, survey.metadata.clone())?;
    let rich = estimate_incomes(wealth, year).map_err(in_file(wealth_path))?;
    let m = find_factor_with(&survey, &rich, cfg)?;
    Ok((
        MatchOutput {
            year,
            summary: m.summary(),
        },
        m.merged,
    ))
}

pub fn matching(
    input: &Path,
    wealth_path: &Path,
    years: &[i32],
    config: Option<&Path>,
    common: &Common,
) -> Result<ExitCode> {
    let dir = out_dir(common)?;
    let cfg: MatchConfig = config.map_or_else(|| Ok(MatchConfig::default()), read_json)?;
    let survey = read_incomes(input)?;
    let wealth = read_wealth(wealth_path)?;
    let results = pool(common.jobs)?.install(|| {
        years
            .par_iter()
            .map(|&y| match_year(&survey, input, &wealth, wealth_path, y, &cfg))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut manifest = RunManifest::new(
        Command::Match,
        vec![input.to_path_buf(), wealth_path.to_path_buf()],
        config_json(&cfg)?,
        None,
    );
    for (summary, merged) in &results {
        let y = summary.year;
        let json = dir.join(format!("match_{y}.json"));
        let csv = dir.join(format!("merged_{y}.csv"));
        write_json(&json, summary)?;
        write_incomes(&csv, merged)?;
        println!(
            "{y}: factor {:.2e}, junction gap {:.3} decades (unscaled {:.3})",
            summary.summary.factor, summary.summary.junction_gap, summary.summary.gap_before
        );
        if summary.summary.junction_gap >= cfg.gap_tolerance {
            warn!("{y}: junction gap {:.3} exceeds {}", summary.summary.junction_gap, cfg.gap_tolerance);
        }
        manifest.outputs.extend([json, csv]);
    }
    manifest.write_sidecars()?;
    Ok(ExitCode::SUCCESS)
}

struct FitJob {
    label: String,
    year: Option<i32>,
    curve: CcdfCurve,
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

fn fit_jobs(inputs: &[PathBuf], years: &[i32]) -> Result<Vec<FitJob>> {
    let mut jobs = Vec::new();
    for input in inputs {
        if is_tsv(input) {
            let year = match years {
                [y] => Some(*y),
                _ => None,
            };
            jobs.push(FitJob {
                label: year.map_or_else(|| stem(input), |y| y.to_string()),
                year,
                curve: read_ccdf(input)?,
            });
            continue;
        }
        let sample = read_incomes(input)?;
        let mut by_year: BTreeMap<i32, Vec<_>> = BTreeMap::new();
        for r in sample.records() {
            by_year.entry(r.year).or_default().push(*r);
        }
        for y in years {
            if !by_year.contains_key(y) {
                return Err(Error::File {
                    path: input.clone(),
                    message: format!("no records for {y}"),
                });
            }
        }
        for (y, records) in by_year {
            if !years.is_empty() && !years.contains(&y) {
                continue;
            }
            let s = IncomeSample::new(records, input.display().to_string())?;
            jobs.push(FitJob {
                label: y.to_string(),
                year: Some(y),
                curve: build_ccdf(&s).map_err(in_file(input))?,
            });
        }
        if jobs.is_empty() {
            return Err(Error::EmptySample(input.display().to_string()));
        }
    }
    Ok(jobs)
}

/// `income\tempirical\tmodel` rows, thinned like the exceedance TSV.
fn overlay(curve: &CcdfCurve, params: &EyParams, decimate: usize) -> Result<String> {
    let dist = EyDistribution::new(params)?;
    let mut out = String::from("income\tempirical\tmodel\n");
    for (i, p) in curve.points().iter().enumerate() {
        if i < UNDECIMATED_TOP || (i - UNDECIMATED_TOP).is_multiple_of(decimate) {
            let _ = writeln!(out, "{}\t{}\t{}", p.income, p.exceedance, dist.ccdf(p.income)?);
        }
    }
    Ok(out)
}

fn gnuplot(data: &str, params: &EyParams) -> String {
    format!(
        "set logscale xy\n\
         set xlabel 'income'\n\
         set ylabel 'exceedance'\n\
         set arrow from {m0}, graph 0 to {m0}, graph 1 nohead dashtype 3\n\
         set arrow from {m1}, graph 0 to {m1}, graph 1 nohead dashtype 2\n\
         plot '{data}' skip 1 using 1:2 with points pointtype 7 pointsize 0.4 title 'data', \\\n\
         \x20    '{data}' skip 1 using 1:3 with lines title 'model'\n",
        m0 = params.m0,
        m1 = params.m1,
    )
}

pub fn fit(
    inputs: &[PathBuf],
    years: &[i32],
    config: Option<&Path>,
    allow_nonconverged: bool,
    decimate: usize,
    common: &Common,
) -> Result<ExitCode> {
    if decimate == 0 {
        return Err(Error::Config("decimation must be at least 1".into()));
    }
    let dir = out_dir(common)?;
    let cfg: FitConfig = config.map_or_else(|| Ok(FitConfig::default()), read_json)?;
    cfg.validate()?;
    let jobs = fit_jobs(inputs, years)?;
    let reports = pool(common.jobs)?.install(|| {
        jobs.par_iter()
            .map(|job| {
                info!("fitting {} ({} points)", job.label, job.curve.n());
                let mut r = incomeflow::fit::fit(&job.curve, &cfg)?;
                r.year = job.year;
                Ok(r)
            })
            .collect::<Result<Vec<FitReport>>>()
    })?;

    let mut manifest = RunManifest::new(Command::Fit, inputs.to_vec(), config_json(&cfg)?, None);
    for (job, r) in jobs.iter().zip(&reports) {
        let json = dir.join(format!("fit_{}.json", job.label));
        let data = dir.join(format!("overlay_{}.tsv", job.label));
        let script = dir.join(format!("overlay_{}.gp", job.label));
        write_json(&json, r)?;
        write_text(&data, &overlay(&job.curve, &r.params, decimate)?)?;
        let data_name = data.file_name().unwrap_or_default().to_string_lossy();
        write_text(&script, &gnuplot(&data_name, &r.params))?;
        manifest.outputs.extend([json, data, script]);
        for flag in &r.flags {
            warn!("{}: {flag:?}", job.label);
        }
    }
    let table = format_table(&reports);
    let table_path = dir.join("fits.txt");
    write_text(&table_path, &table)?;
    manifest.outputs.push(table_path);
    manifest.write_sidecars()?;
    print!("{table}");

    if !allow_nonconverged && reports.iter().any(|r| !r.converged) {
        eprintln!("error: a fit did not converge (pass --allow-nonconverged to accept it)");
        return Ok(ExitCode::from(NOT_CONVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SimulationSummary {
    ks_distance: f64,
    n_samples: usize,
    config: SimConfig,
}

pub fn simulate(config: Option<&Path>, seed: Option<u64>, common: &Common) -> Result<ExitCode> {
    let dir = out_dir(common)?;
    let mut cfg: SimConfig = config.map_or_else(|| Ok(SimConfig::default()), read_json)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (hist, ks) = pool(common.jobs)?.install(|| simulate_against_closed_form(&cfg))?;
    let tsv = dir.join("histogram.tsv");
    let json = dir.join("simulation.json");
    write_text(&tsv, &hist.to_tsv())?;
    write_json(
        &json,
        &SimulationSummary {
            ks_distance: ks,
            n_samples: hist.n_samples,
            config: cfg,
        },
    )?;
    println!("{} samples, KS distance {ks:.4}", hist.n_samples);
    let mut manifest = RunManifest::new(
        Command::Simulate,
        config.into_iter().map(Path::to_path_buf).collect(),
        config_json(&cfg)?,
        Some(cfg.seed),
    );
    manifest.outputs = vec![tsv, json];
    manifest.write_sidecars()?;
    Ok(ExitCode::SUCCESS)
}

pub fn sample(
    table: Table,
    years: &[i32],
    config: Option<&Path>,
    count: usize,
    seed: u64,
    common: &Common,
) -> Result<ExitCode> {
    let dir = out_dir(common)?;
    let mut draws: Vec<(String, i32, EyShape)> = Vec::new();
    if let Some(path) = config {
        let shape: EyShape = read_json(path)?;
        let year = years.first().copied().unwrap_or(0);
        draws.push(("sample.csv".into(), year, shape));
    } else {
        if years.is_empty() {
            return Err(Error::Config("give --year or --config".into()));
        }
        for &y in years {
            let row = u16::try_from(y).ok().and_then(|y| match table {
                Table::Mds => mds_row(y),
                Table::Survey => survey_row(y),
            });
            let shape = row.ok_or_else(|| Error::Config(format!("no tabulated row for {y}")))?;
            draws.push((format!("sample_{y}.csv"), y, shape));
        }
    }

    let mut manifest = RunManifest::new(
        Command::Sample,
        config.into_iter().map(Path::to_path_buf).collect(),
        serde_json::json!({ "count": count, "rows": draws.iter().map(|d| (d.1, d.2)).collect::<Vec<_>>() }),
        Some(seed),
    );
    for (name, year, shape) in &draws {
        let s = draw(&normalize(shape)?, count, seed, *year)?;
        let out = dir.join(name);
        write_incomes(&out, &s)?;
        info!("{} incomes -> {}", s.len(), out.display());
        manifest.outputs.push(out);
    }
    manifest.write_sidecars()?;
    Ok(ExitCode::SUCCESS)
}

pub fn report(inputs: &[PathBuf], common: &Common) -> Result<ExitCode> {
    let dir = out_dir(common)?;
    let mut reports = inputs
        .iter()
        .map(|p| read_json::<FitReport>(p))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by_key(|r| r.year);
    let table = format_table(&reports);
    let out = dir.join("report.txt");
    write_text(&out, &table)?;
    print!("{table}");
    let mut manifest = RunManifest::new(Command::Report, inputs.to_vec(), serde_json::Value::Null, None);
    manifest.outputs.push(out);
    manifest.write_sidecars()?;
    Ok(ExitCode::SUCCESS)
}
