//! Readers and writers for the on-disk formats.
//!
//! | file | columns |
//! |------|---------|
//! | income CSV | `income,source,year` |
//! | wealth CSV | `person_id,year,wealth_eur` |
//! | exceedance TSV | `income\texceedance` |
//!
//! Malformed rows abort the read with the offending line number.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::empirical::{CcdfCurve, CcdfPoint, IncomeRecord, IncomeSample, Source, UNDECIMATED_TOP};
use crate::error::{Error, Result};
use crate::matching::WealthRecord;

#[derive(Deserialize)]
struct IncomeRow {
    income: f64,
    source: String,
    year: i32,
}

#[derive(Deserialize)]
struct WealthRow {
    person_id: String,
    year: i32,
    wealth_eur: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Deserializes every row of a CSV with exactly the `expected` header,
/// handing each row and its line number to `convert`.
fn read_rows<T, R, U>(
    reader: R,
    path: &Path,
    expected: &[&str],
    mut convert: impl FnMut(T, u64) -> std::result::Result<U, String>,
) -> Result<Vec<U>>
where
    T: DeserializeOwned,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if !header.iter().eq(expected.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec
            .deserialize(Some(&header))
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => parse_err(line, err.to_string()),
                _ => parse_err(line, e.to_string()),
            })?;
        out.push(convert(row, line).map_err(|m| parse_err(line, m))?);
    }
    Ok(out)
}

/// Reads an income CSV from any reader; `path` only labels errors.
pub fn read_incomes_from<R: Read>(reader: R, path: &Path) -> Result<IncomeSample> {
    let records = read_rows(reader, path, &["income", "source", "year"], |r: IncomeRow, _| {
        let source: Source = r.source.parse()?;
        if !(r.income.is_finite() && r.income > 0.0) {
            return Err(format!("income must be positive, got {}", r.income));
        }
        Ok(IncomeRecord {
            income: r.income,
            source,
            year: r.year,
        })
    })?;
    IncomeSample::new(records, path.display().to_string())
}

pub fn read_incomes(path: &Path) -> Result<IncomeSample> {
    read_incomes_from(open(path)?, path)
}

pub fn write_incomes(path: &Path, sample: &IncomeSample) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "income,source,year")?;
    for r in sample.records() {
        writeln!(w, "{},{},{}", r.income, r.source.as_str(), r.year)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wealth_from<R: Read>(reader: R, path: &Path) -> Result<Vec<WealthRecord>> {
    let mut seen = std::collections::HashSet::new();
    read_rows(
        reader,
        path,
        &["person_id", "year", "wealth_eur"],
        |r: WealthRow, _| {
            if !(r.wealth_eur.is_finite() && r.wealth_eur > 0.0) {
                return Err(format!("wealth must be positive, got {}", r.wealth_eur));
            }
            if !seen.insert((r.person_id.clone(), r.year)) {
                return Err(format!("duplicate entry for {} in {}", r.person_id, r.year));
            }
            Ok(WealthRecord {
                person_id: r.person_id,
                year: r.year,
                wealth: r.wealth_eur,
            })
        },
    )
}

pub fn read_wealth(path: &Path) -> Result<Vec<WealthRecord>> {
    read_wealth_from(open(path)?, path)
}

/// Writes `income\texceedance` rows in rank order: the 100 richest points,
/// then every `decimation`-th point.
pub fn write_ccdf<W: Write>(mut w: W, curve: &CcdfCurve, decimation: usize) -> Result<()> {
    if decimation == 0 {
        return Err(Error::Config("decimation must be at least 1".into()));
    }
    writeln!(w, "income\texceedance")?;
    for (i, p) in curve.points().iter().enumerate() {
        if i < UNDECIMATED_TOP || (i - UNDECIMATED_TOP).is_multiple_of(decimation) {
            writeln!(w, "{}\t{}", p.income, p.exceedance)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an `income\texceedance` TSV written by [`write_ccdf`].
pub fn read_ccdf_from<R: Read>(reader: R, path: &Path) -> Result<CcdfCurve> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if !header.iter().eq(["income", "exceedance"]) {
        return Err(parse_err(1, "expected header `income<TAB>exceedance`".into()));
    }
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let p: CcdfPoint = rec
            .deserialize(Some(&header))
            .map_err(|e| parse_err(line, e.to_string()))?;
        points.push(p);
    }
    CcdfCurve::from_points(points).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_ccdf(path: &Path) -> Result<CcdfCurve> {
    read_ccdf_from(open(path)?, path)
}

pub fn write_ccdf_file(path: &Path, curve: &CcdfCurve, decimation: usize) -> Result<()> {
    write_ccdf(create(path)?, curve, decimation)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Deserializes a JSON file, naming the file in errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open(path)?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
