//! Field-experiment tooling: roster records, stratified block randomization,
//! synthetic rosters, and the estimators used to read the experiment.

mod assign;
mod bootstrap;
mod estimators;
pub mod regression;
mod simulate;
mod strata;

pub use assign::{apply_assignment, assign, Assignment, REMAINDER_LABELS};
pub use bootstrap::{bootstrap_mean_diff, percentile, BootstrapResult, DEFAULT_RESAMPLES};
pub use estimators::{
    het_effects, itt, late, ArmCoding, EstimatorOptions, GroupIndicator, RegressionFit,
};
pub use regression::CovarianceKind;
pub use simulate::{generate_roster, simulate_outcomes, simulate_population, DgpParams};
pub use strata::{stratify, AgeBucket, AgeCutpoints, StratumKey};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::projection::Gender;

/// Company minimum contribution rate in percentage points.
pub const MIN_RATE: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Email,
    EmailPhone,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Control, Arm::Email, Arm::EmailPhone];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Email => "email",
            Arm::EmailPhone => "email_phone",
        }
    }

    pub fn is_treated(self) -> bool {
        self != Arm::Control
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "control" => Ok(Arm::Control),
            "email" => Ok(Arm::Email),
            "email_phone" => Ok(Arm::EmailPhone),
            other => Err(format!(
                "unknown treatment {other:?} (expected control, email or email_phone)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Contribution rate after the intervention.
    PostRate,
    /// Post rate minus pre rate.
    #[default]
    Change,
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "post_rate" => Ok(Outcome::PostRate),
            "change" => Ok(Outcome::Change),
            other => Err(format!("unknown outcome {other:?} (expected post_rate or change)")),
        }
    }
}

/// One roster row. Rates are in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmployeeRecord {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub disadvantaged: bool,
    pub tenure: f64,
    pub pre_rate: f64,
    /// `None` for leavers and for rosters whose outcomes are not yet observed.
    pub post_rate: Option<f64>,
    /// `None` before randomization.
    pub treatment: Option<Arm>,
    pub clicked: bool,
    pub attrited: bool,
}

impl EmployeeRecord {
    pub fn min_saver(&self) -> bool {
        self.pre_rate == MIN_RATE
    }

    pub fn is_treated(&self) -> bool {
        self.treatment.is_some_and(Arm::is_treated)
    }

    pub fn outcome(&self, outcome: Outcome) -> Option<f64> {
        let post = self.post_rate?;
        Some(match outcome {
            Outcome::PostRate => post,
            Outcome::Change => post - self.pre_rate,
        })
    }

    /// Structural invariants of a single row, as a list of (field, message).
    pub fn check(&self) -> Vec<(&'static str, String)> {
        let mut problems = Vec::new();
        if self.id.is_empty() {
            problems.push(("id", "id must not be empty".to_string()));
        }
        if self.age == 0 {
            problems.push(("age", "age must be positive".to_string()));
        }
        if !self.tenure.is_finite() || self.tenure < 0.0 {
            problems.push(("tenure", "tenure must be a non-negative number".to_string()));
        }
        if !self.pre_rate.is_finite() || self.pre_rate < 0.0 || self.pre_rate > 100.0 {
            problems.push(("pre_rate", "pre_rate must be in [0, 100]".to_string()));
        }
        if let Some(post) = self.post_rate {
            if !post.is_finite() || !(0.0..=100.0).contains(&post) {
                problems.push(("post_rate", "post_rate must be in [0, 100]".to_string()));
            }
        }
        if self.attrited && self.post_rate.is_some() {
            problems.push(("post_rate", "post_rate must be empty when attrited=1".to_string()));
        }
        if self.clicked && !self.is_treated() {
            problems.push(("clicked", "clicked=1 requires a treated arm".to_string()));
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("record {0} has no treatment assigned")]
    Unassigned(String),
    #[error("record {0} is not attrited but has no post_rate")]
    MissingOutcome(String),
    #[error("no usable observations for {0}")]
    EmptyGroup(String),
    #[error("nobody in a treated arm clicked; the first stage is degenerate")]
    NoCompliers,
    #[error("too few observations: {0}")]
    TooFewObservations(String),
    #[error("invalid parameter {field}: {message}")]
    InvalidParam { field: String, message: String },
}
