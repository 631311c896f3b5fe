//! Append-only scenario store: one JSON document per line in
//! `scenarios.jsonl`, with writers serialized through an advisory lock on
//! `scenarios.lock`. Readers take no lock and ignore a trailing line that has
//! not been terminated yet.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::projection::{project_retirement_income, Assumptions, EmployeeProfile, IncomeProjection};
use crate::ValidationError;

pub const SCENARIO_VERSION: u32 = 1;
const DATA_FILE: &str = "scenarios.jsonl";
const LOCK_FILE: &str = "scenarios.lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("scenario {0} not found")]
    NotFound(String),
    #[error("scenario store corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub v: u32,
    pub id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub profile: EmployeeProfile,
    pub assumptions: Assumptions,
    pub result: IncomeProjection,
}

impl Scenario {
    /// Validates the inputs and snapshots their projection.
    pub fn new(
        profile: EmployeeProfile,
        assumptions: Assumptions,
        label: Option<String>,
    ) -> Result<Self, ValidationError> {
        let result = project_retirement_income(&profile, &assumptions)?;
        Ok(Self {
            v: SCENARIO_VERSION,
            id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: Utc::now(),
            label,
            profile,
            assumptions,
            result,
        })
    }

    /// Recomputes the projection and compares it with the stored snapshot.
    pub fn check_consistent(&self) -> Result<(), String> {
        if self.v != SCENARIO_VERSION {
            return Err(format!("unsupported scenario version {}", self.v));
        }
        let fresh = project_retirement_income(&self.profile, &self.assumptions)
            .map_err(|e| e.to_string())?;
        let pairs = [
            (fresh.fund_lo, self.result.fund_lo),
            (fresh.fund_hi, self.result.fund_hi),
            (fresh.income_lo, self.result.income_lo),
            (fresh.income_hi, self.result.income_hi),
            (fresh.replacement_lo, self.result.replacement_lo),
            (fresh.replacement_hi, self.result.replacement_hi),
            (fresh.final_salary, self.result.final_salary),
            (fresh.drawdown_rate, self.result.drawdown_rate),
        ];
        for (a, b) in pairs {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(format!("stored result {b} differs from recomputed {a}"));
            }
        }
        if fresh.years != self.result.years {
            return Err("stored years differ from recomputed".into());
        }
        Ok(())
    }

    pub fn summary(&self) -> ScenarioSummary {
        ScenarioSummary {
            id: self.id.clone(),
            created_at: self.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            label: self.label.clone(),
            replacement_lo: self.result.replacement_lo,
            replacement_hi: self.result.replacement_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub created_at: String,
    pub label: Option<String>,
    pub replacement_lo: f64,
    pub replacement_hi: f64,
}

/// Parses and checks one stored line.
pub fn parse_scenario_line(line: &str) -> Result<Scenario, String> {
    let s: Scenario = serde_json::from_str(line).map_err(|e| e.to_string())?;
    s.check_consistent()?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct ScenarioStore {
    dir: PathBuf,
}

impl ScenarioStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn save(&self, scenario: &Scenario) -> Result<String, StoreError> {
        scenario
            .check_consistent()
            .map_err(|m| ValidationError::single("result", m))?;
        let mut line = serde_json::to_string(scenario).expect("scenario serializes");
        line.push('\n');
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(LOCK_FILE))?;
        lock.lock()?;
        let mut data = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(DATA_FILE))?;
        data.write_all(line.as_bytes())?;
        data.sync_data()?;
        lock.unlock()?;
        Ok(scenario.id.clone())
    }

    fn read_all(&self) -> Result<Vec<Scenario>, StoreError> {
        let text = match fs::read_to_string(self.dir.join(DATA_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let complete = match text.rfind('\n') {
            Some(end) => &text[..end],
            None => return Ok(Vec::new()),
        };
        complete
            .split('\n')
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                parse_scenario_line(l).map_err(|message| StoreError::Corrupt { line: i + 1, message })
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<Scenario, StoreError> {
        self.read_all()?
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Summaries in insertion order.
    pub fn list(&self) -> Result<Vec<ScenarioSummary>, StoreError> {
        Ok(self.read_all()?.iter().map(Scenario::summary).collect())
    }
}
