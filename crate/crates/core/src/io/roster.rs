//! Roster CSV: `id,age,gender,disadvantaged,tenure,pre_rate,post_rate,treatment,clicked,attrited`.
//!
//! Rates are percentage points, gender is `M`/`F`, booleans are `0`/`1`, and
//! an empty `treatment` or `post_rate` means "not yet known". Rows below the
//! minimum contribution rate are floored to it and listed in the report.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::experiment::{Arm, EmployeeRecord, MIN_RATE};
use crate::projection::Gender;

pub const ROSTER_HEADER: [&str; 10] = [
    "id",
    "age",
    "gender",
    "disadvantaged",
    "tenure",
    "pre_rate",
    "post_rate",
    "treatment",
    "clicked",
    "attrited",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line in the file; the header is line 1.
    pub line: u64,
    pub field: Option<String>,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "line {}: {}: {}", self.line, field, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RosterError {
    #[error("bad roster header: {0}")]
    Schema(String),
    #[error("{} malformed rows (limit {limit}); first: {}", errors.len(), errors[0])]
    TooManyRowErrors { limit: usize, errors: Vec<RowError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlooredRow {
    pub id: String,
    pub original: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub floored: Vec<FlooredRow>,
    pub attrited: Vec<String>,
    pub rejected: Vec<RowError>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Malformed rows tolerated (skipped and reported) before loading fails.
    pub max_row_errors: usize,
}

/// Floors pre-experiment rates below the minimum. Applying it twice changes
/// nothing the second time.
pub fn clean(roster: &mut [EmployeeRecord]) -> Vec<FlooredRow> {
    let mut floored = Vec::new();
    for r in roster.iter_mut() {
        if r.pre_rate < MIN_RATE {
            floored.push(FlooredRow {
                id: r.id.clone(),
                original: r.pre_rate,
            });
            r.pre_rate = MIN_RATE;
        }
    }
    floored
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("expected 0 or 1, got {other:?}")),
    }
}

fn parse_number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("not a number: {s:?}"))
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<EmployeeRecord, Vec<RowError>> {
    let mut errors = Vec::new();
    let field = |i: usize| -> &str { rec.get(i).unwrap_or("") };
    let err = |name: &str, message: String| RowError {
        line,
        field: Some(name.to_string()),
        message,
    };
    macro_rules! take {
        ($idx:expr, $parse:expr) => {
            match $parse(field($idx)) {
                Ok(v) => Some(v),
                Err(m) => {
                    errors.push(err(ROSTER_HEADER[$idx], m));
                    None
                }
            }
        };
    }
    let id = field(0).to_string();
    let age = take!(1, parse_number::<u32>);
    let gender = take!(2, |s: &str| match s.trim() {
        "M" => Ok(Gender::Male),
        "F" => Ok(Gender::Female),
        other => Err(format!("expected M or F, got {other:?}")),
    });
    let disadvantaged = take!(3, parse_bool);
    let tenure = take!(4, parse_number::<f64>);
    let pre_rate = take!(5, parse_number::<f64>);
    let post_rate = take!(6, |s: &str| {
        if s.trim().is_empty() {
            Ok(None)
        } else {
            parse_number::<f64>(s).map(Some)
        }
    });
    let treatment = take!(7, |s: &str| {
        if s.trim().is_empty() {
            Ok(None)
        } else {
            s.trim().parse::<Arm>().map(Some)
        }
    });
    let clicked = take!(8, parse_bool);
    let attrited = take!(9, parse_bool);
    if !errors.is_empty() {
        return Err(errors);
    }
    let record = EmployeeRecord {
        id,
        age: age.unwrap(),
        gender: gender.unwrap(),
        disadvantaged: disadvantaged.unwrap(),
        tenure: tenure.unwrap(),
        pre_rate: pre_rate.unwrap(),
        post_rate: post_rate.unwrap(),
        treatment: treatment.unwrap(),
        clicked: clicked.unwrap(),
        attrited: attrited.unwrap(),
    };
    let problems = record.check();
    if problems.is_empty() {
        Ok(record)
    } else {
        Err(problems.into_iter().map(|(f, m)| err(f, m)).collect())
    }
}

/// Parses, validates and cleans a roster.
pub fn read_roster<R: Read>(
    reader: R,
    opts: &LoadOptions,
) -> Result<(Vec<EmployeeRecord>, CleaningReport), RosterError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != ROSTER_HEADER {
        return Err(RosterError::Schema(format!(
            "expected {:?}, got {:?}",
            ROSTER_HEADER.join(","),
            got.join(",")
        )));
    }
    let mut roster = Vec::new();
    let mut report = CleaningReport::default();
    let mut seen = HashSet::new();
    for result in rdr.records() {
        let rec = match result {
            Ok(rec) => rec,
            Err(e) if !e.is_io_error() => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RowError {
                    line,
                    field: None,
                    message: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != ROSTER_HEADER.len() {
            report.rejected.push(RowError {
                line,
                field: None,
                message: format!("expected {} fields, got {}", ROSTER_HEADER.len(), rec.len()),
            });
            continue;
        }
        match parse_row(&rec, line) {
            Ok(record) if !seen.insert(record.id.clone()) => report.rejected.push(RowError {
                line,
                field: Some("id".into()),
                message: format!("duplicate id {:?}", record.id),
            }),
            Ok(record) => roster.push(record),
            Err(errs) => report.rejected.extend(errs),
        }
    }
    let bad_lines: HashSet<u64> = report.rejected.iter().map(|e| e.line).collect();
    if bad_lines.len() > opts.max_row_errors {
        return Err(RosterError::TooManyRowErrors {
            limit: opts.max_row_errors,
            errors: report.rejected,
        });
    }
    report.floored = clean(&mut roster);
    report.attrited = roster
        .iter()
        .filter(|r| r.attrited)
        .map(|r| r.id.clone())
        .collect();
    Ok((roster, report))
}

pub fn parse_roster_str(
    text: &str,
    opts: &LoadOptions,
) -> Result<(Vec<EmployeeRecord>, CleaningReport), RosterError> {
    read_roster(text.as_bytes(), opts)
}

pub fn load_roster(
    path: &Path,
    opts: &LoadOptions,
) -> Result<(Vec<EmployeeRecord>, CleaningReport), RosterError> {
    read_roster(File::open(path)?, opts)
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_roster<W: Write>(writer: W, roster: &[EmployeeRecord]) -> Result<(), RosterError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ROSTER_HEADER)?;
    for r in roster {
        w.write_record([
            r.id.clone(),
            r.age.to_string(),
            match r.gender {
                Gender::Male => "M".into(),
                Gender::Female => "F".into(),
            },
            bit(r.disadvantaged).into(),
            r.tenure.to_string(),
            r.pre_rate.to_string(),
            r.post_rate.map(|p| p.to_string()).unwrap_or_default(),
            r.treatment.map(|a| a.as_str().to_string()).unwrap_or_default(),
            bit(r.clicked).into(),
            bit(r.attrited).into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn roster_to_csv(roster: &[EmployeeRecord]) -> String {
    let mut buf = Vec::new();
    write_roster(&mut buf, roster).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn save_roster(path: &Path, roster: &[EmployeeRecord]) -> Result<(), RosterError> {
    write_roster(File::create(path)?, roster)
}
