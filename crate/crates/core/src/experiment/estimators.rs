//! Intention-to-treat, LATE and heterogeneity regressions on a roster.
//!
//! Leavers (`attrited`) are dropped listwise. Strata enter as fixed effects;
//! strata with a single observation are pooled into one catch-all stratum.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::regression::{self, CovarianceKind, LinearFit};
use super::{AgeCutpoints, Arm, EmployeeRecord, ExperimentError, Outcome, StratumKey};
use crate::projection::Gender;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmCoding {
    /// One indicator per treatment arm.
    #[default]
    Separate,
    /// A single indicator for either treatment arm.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub outcome: Outcome,
    pub covariance: CovarianceKind,
    pub fixed_effects: bool,
    pub arms: ArmCoding,
    pub cutpoints: AgeCutpoints,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            outcome: Outcome::Change,
            covariance: CovarianceKind::Hc1,
            fixed_effects: true,
            arms: ArmCoding::Separate,
            cutpoints: AgeCutpoints::default(),
        }
    }
}

impl EstimatorOptions {
    /// Defaults for [`het_effects`]: no strata dummies, since the groups of
    /// interest are themselves stratification variables.
    pub fn for_heterogeneity() -> Self {
        Self {
            fixed_effects: false,
            ..Self::default()
        }
    }
}

/// Binary characteristic interacted with treatment in [`het_effects`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GroupIndicator {
    Male,
    Female,
    Disadvantaged,
    White,
    MinSaver,
    AgeAtLeast(u32),
}

impl GroupIndicator {
    pub fn of(&self, r: &EmployeeRecord) -> bool {
        match *self {
            GroupIndicator::Male => r.gender == Gender::Male,
            GroupIndicator::Female => r.gender == Gender::Female,
            GroupIndicator::Disadvantaged => r.disadvantaged,
            GroupIndicator::White => !r.disadvantaged,
            GroupIndicator::MinSaver => r.min_saver(),
            GroupIndicator::AgeAtLeast(a) => r.age >= a,
        }
    }
}

impl fmt::Display for GroupIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupIndicator::Male => f.write_str("male"),
            GroupIndicator::Female => f.write_str("female"),
            GroupIndicator::Disadvantaged => f.write_str("disadvantaged"),
            GroupIndicator::White => f.write_str("white"),
            GroupIndicator::MinSaver => f.write_str("min_saver"),
            GroupIndicator::AgeAtLeast(a) => write!(f, "age_ge_{a}"),
        }
    }
}

impl FromStr for GroupIndicator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "male" => GroupIndicator::Male,
            "female" => GroupIndicator::Female,
            "disadvantaged" => GroupIndicator::Disadvantaged,
            "white" => GroupIndicator::White,
            "min_saver" => GroupIndicator::MinSaver,
            other => {
                let age = other
                    .strip_prefix("age_ge_")
                    .or_else(|| other.strip_prefix("age>="))
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| {
                        format!(
                            "unknown group {other:?} (expected male, female, disadvantaged, \
                             white, min_saver or age_ge_N)"
                        )
                    })?;
                GroupIndicator::AgeAtLeast(age)
            }
        })
    }
}

impl TryFrom<String> for GroupIndicator {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GroupIndicator> for String {
    fn from(g: GroupIndicator) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub estimator: String,
    pub outcome: Outcome,
    pub coefficients: IndexMap<String, f64>,
    pub robust_se: IndexMap<String, f64>,
    pub ci95: IndexMap<String, (f64, f64)>,
    pub r_squared: f64,
    pub rmse: f64,
    pub n_obs: usize,
    pub n_attrited: usize,
    /// Mean outcome among non-attrited control rows.
    pub control_mean: Option<f64>,
    /// Homoskedastic first-stage F on the excluded instruments (LATE only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_stage_f: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

struct Sample<'a> {
    rows: Vec<&'a EmployeeRecord>,
    y: DVector<f64>,
    arms: Vec<Arm>,
    stratum: Vec<usize>,
    n_strata: usize,
    n_attrited: usize,
    control_mean: Option<f64>,
    warnings: Vec<String>,
}

fn prepare<'a>(
    roster: &'a [EmployeeRecord],
    opts: &EstimatorOptions,
) -> Result<Sample<'a>, ExperimentError> {
    let n_attrited = roster.iter().filter(|r| r.attrited).count();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut arms = Vec::new();
    for r in roster.iter().filter(|r| !r.attrited) {
        let arm = r.treatment.ok_or_else(|| ExperimentError::Unassigned(r.id.clone()))?;
        let value = r
            .outcome(opts.outcome)
            .ok_or_else(|| ExperimentError::MissingOutcome(r.id.clone()))?;
        rows.push(r);
        y.push(value);
        arms.push(arm);
    }
    if rows.is_empty() {
        return Err(ExperimentError::EmptyGroup("analysis sample".into()));
    }

    let mut warnings = Vec::new();
    let keys: Vec<StratumKey> = rows.iter().map(|r| StratumKey::of(r, &opts.cutpoints)).collect();
    let mut sizes: BTreeMap<StratumKey, usize> = BTreeMap::new();
    for k in &keys {
        *sizes.entry(*k).or_default() += 1;
    }
    // singletons share one catch-all stratum (None)
    let merged: Vec<Option<StratumKey>> = keys
        .iter()
        .map(|k| (sizes[k] > 1).then_some(*k))
        .collect();
    let singletons = sizes.values().filter(|&&s| s == 1).count();
    if singletons > 0 && opts.fixed_effects {
        warnings.push(format!(
            "{singletons} single-observation strata merged into one catch-all stratum"
        ));
    }
    let mut index: BTreeMap<Option<StratumKey>, usize> = BTreeMap::new();
    for k in &merged {
        let next = index.len();
        index.entry(*k).or_insert(next);
    }
    // renumber in key order so the baseline stratum does not depend on row order
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let stratum: Vec<usize> = merged.iter().map(|k| index[k]).collect();

    if opts.fixed_effects {
        let mut arms_in: BTreeMap<usize, [bool; 3]> = BTreeMap::new();
        for (s, a) in stratum.iter().zip(&arms) {
            arms_in.entry(*s).or_default()[*a as usize] = true;
        }
        let single_arm = arms_in
            .values()
            .filter(|present| present.iter().filter(|&&p| p).count() == 1)
            .count();
        if single_arm > 0 {
            warnings.push(format!(
                "{single_arm} strata contain a single arm and do not inform the treatment contrast"
            ));
        }
    }

    let controls: Vec<f64> = y
        .iter()
        .zip(&arms)
        .filter(|(_, a)| **a == Arm::Control)
        .map(|(v, _)| *v)
        .collect();
    let control_mean =
        (!controls.is_empty()).then(|| controls.iter().sum::<f64>() / controls.len() as f64);

    Ok(Sample {
        n_strata: index.len(),
        rows,
        y: DVector::from_vec(y),
        arms,
        stratum,
        n_attrited,
        control_mean,
        warnings,
    })
}

/// Column builder: names plus column vectors, assembled into a matrix at the end.
#[derive(Default)]
struct Columns {
    names: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.names.push(name.into());
        self.data.push(column);
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.data.first().map_or(0, Vec::len);
        DMatrix::from_fn(n, self.data.len(), |i, j| self.data[j][i])
    }
}

fn arm_columns(sample: &Sample, coding: ArmCoding) -> Vec<(String, Vec<f64>)> {
    let indicator = |pred: &dyn Fn(Arm) -> bool| -> Vec<f64> {
        sample.arms.iter().map(|a| f64::from(u8::from(pred(*a)))).collect()
    };
    match coding {
        ArmCoding::Pooled => {
            if sample.arms.iter().any(|a| a.is_treated()) {
                vec![("treated".to_string(), indicator(&|a| a.is_treated()))]
            } else {
                Vec::new()
            }
        }
        ArmCoding::Separate => [Arm::Email, Arm::EmailPhone]
            .into_iter()
            .filter(|arm| sample.arms.contains(arm))
            .map(|arm| (arm.to_string(), indicator(&|a| a == arm)))
            .collect(),
    }
}

fn fixed_effect_columns(sample: &Sample, cols: &mut Columns) {
    for s in 1..sample.n_strata {
        let col = sample.stratum.iter().map(|&g| f64::from(u8::from(g == s))).collect();
        cols.push(format!("stratum_{s}"), col);
    }
}

fn summarize(
    estimator: &str,
    opts: &EstimatorOptions,
    sample: Sample,
    fit: &LinearFit,
    names: &[String],
    reported: impl Fn(&str) -> bool,
) -> RegressionFit {
    let mut coefficients = IndexMap::new();
    let mut robust_se = IndexMap::new();
    let mut ci95 = IndexMap::new();
    for (j, name) in names.iter().enumerate() {
        if !reported(name) {
            continue;
        }
        let b = fit.beta[j];
        let se = fit.se(j);
        coefficients.insert(name.clone(), b);
        robust_se.insert(name.clone(), se);
        ci95.insert(name.clone(), (b - Z_95 * se, b + Z_95 * se));
    }
    RegressionFit {
        estimator: estimator.to_string(),
        outcome: opts.outcome,
        coefficients,
        robust_se,
        ci95,
        r_squared: fit.r_squared(&sample.y),
        rmse: fit.rmse(),
        n_obs: fit.n,
        n_attrited: sample.n_attrited,
        control_mean: sample.control_mean,
        first_stage_f: None,
        warnings: sample.warnings,
    }
}

fn is_reported(fixed_effects: bool) -> impl Fn(&str) -> bool {
    move |name: &str| !name.starts_with("stratum_") && !(fixed_effects && name == "intercept")
}

/// OLS of the outcome on arm indicators plus stratum fixed effects.
pub fn itt(roster: &[EmployeeRecord], opts: &EstimatorOptions) -> Result<RegressionFit, ExperimentError> {
    let sample = prepare(roster, opts)?;
    let mut cols = Columns::default();
    cols.push("intercept", vec![1.0; sample.rows.len()]);
    for (name, col) in arm_columns(&sample, opts.arms) {
        cols.push(name, col);
    }
    if opts.fixed_effects {
        fixed_effect_columns(&sample, &mut cols);
    }
    let fit = regression::ols(&cols.matrix(), &sample.y, &cols.names, opts.covariance)?;
    Ok(summarize("itt", opts, sample, &fit, &cols.names, is_reported(opts.fixed_effects)))
}

/// Two-stage least squares with `clicked` instrumented by the arm indicators;
/// stratum dummies are exogenous.
pub fn late(roster: &[EmployeeRecord], opts: &EstimatorOptions) -> Result<RegressionFit, ExperimentError> {
    let sample = prepare(roster, opts)?;
    if !sample.rows.iter().any(|r| r.clicked && r.is_treated()) {
        return Err(ExperimentError::NoCompliers);
    }
    let n = sample.rows.len();
    let clicked: Vec<f64> = sample.rows.iter().map(|r| f64::from(u8::from(r.clicked))).collect();

    let mut exog = Columns::default();
    exog.push("intercept", vec![1.0; n]);
    if opts.fixed_effects {
        fixed_effect_columns(&sample, &mut exog);
    }

    let mut x = Columns::default();
    x.push("intercept", vec![1.0; n]);
    x.push("clicked", clicked.clone());
    let mut z = Columns::default();
    z.push("intercept", vec![1.0; n]);
    let instruments = arm_columns(&sample, opts.arms);
    if instruments.is_empty() {
        return Err(ExperimentError::EmptyGroup("treated arms".into()));
    }
    for (name, col) in instruments {
        z.push(name, col);
    }
    for (name, col) in exog.names.iter().zip(&exog.data).skip(1) {
        x.push(name.clone(), col.clone());
        z.push(name.clone(), col.clone());
    }

    let x_mat = x.matrix();
    let z_mat = z.matrix();
    let fit = regression::tsls(&x_mat, &z_mat, &sample.y, &x.names, &z.names, opts.covariance)?;
    let first_stage = regression::partial_f(
        &DVector::from_vec(clicked),
        &z_mat,
        &z.names,
        &exog.matrix(),
        &exog.names,
    )?;

    let mut out = summarize("late", opts, sample, &fit, &x.names, is_reported(opts.fixed_effects));
    if first_stage.is_finite() {
        out.first_stage_f = Some(first_stage);
        if first_stage < 10.0 {
            out.warnings
                .push(format!("weak instrument: first-stage F = {first_stage:.2} < 10"));
        }
    } else {
        out.warnings.push("first stage fits exactly (full compliance)".into());
    }
    Ok(out)
}

/// OLS with arm indicators, a group indicator and their interactions.
pub fn het_effects(
    roster: &[EmployeeRecord],
    opts: &EstimatorOptions,
    group: GroupIndicator,
) -> Result<RegressionFit, ExperimentError> {
    let sample = prepare(roster, opts)?;
    let g: Vec<f64> = sample.rows.iter().map(|r| f64::from(u8::from(group.of(r)))).collect();
    if g.iter().all(|&v| v == g[0]) {
        return Err(ExperimentError::RankDeficient(format!(
            "group indicator {group} is constant in the analysis sample"
        )));
    }
    let mut cols = Columns::default();
    cols.push("intercept", vec![1.0; g.len()]);
    let arms = arm_columns(&sample, opts.arms);
    for (name, col) in &arms {
        cols.push(name.clone(), col.clone());
    }
    if opts.fixed_effects {
        fixed_effect_columns(&sample, &mut cols);
    }
    cols.push(group.to_string(), g.clone());
    for (name, col) in &arms {
        let inter = col.iter().zip(&g).map(|(a, b)| a * b).collect();
        cols.push(format!("{name}:{group}"), inter);
    }
    let fit = regression::ols(&cols.matrix(), &sample.y, &cols.names, opts.covariance)?;
    Ok(summarize(
        &format!("het:{group}"),
        opts,
        sample,
        &fit,
        &cols.names,
        is_reported(opts.fixed_effects),
    ))
}
