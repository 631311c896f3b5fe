//! Synthetic rosters. The real experiment data is confidential, so every
//! estimator is exercised against rosters drawn from a known process:
//! `post = max(7.5, pre + effect * clicked + noise)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{apply_assignment, assign, stratify, AgeCutpoints, Arm, EmployeeRecord, ExperimentError, MIN_RATE};
use crate::projection::Gender;

const STREAM_COVARIATES: u64 = 0;
const STREAM_ASSIGNMENT: u64 = 1;
const STREAM_OUTCOMES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpParams {
    pub n: usize,
    /// Effect of clicking for the email arm, in percentage points.
    pub effect_email: f64,
    pub effect_email_phone: f64,
    /// Extra effect of clicking for men, on top of the arm effect.
    pub male_extra_effect: f64,
    pub uptake_email: f64,
    pub uptake_email_phone: f64,
    pub noise_sd: f64,
    pub share_at_minimum: f64,
    /// Range of pre rates for employees above the minimum (drawn in half-point steps).
    pub above_minimum_range: (f64, f64),
    pub share_male: f64,
    pub share_disadvantaged: f64,
    pub age_range: (u32, u32),
    pub attrition: f64,
}

impl Default for DgpParams {
    /// Shaped like the company roster: 775 employees, about 60% at the
    /// minimum, 27% / 65% uptake, ten leavers in expectation.
    fn default() -> Self {
        Self {
            n: 775,
            effect_email: 0.0,
            effect_email_phone: 0.0,
            male_extra_effect: 0.0,
            uptake_email: 0.27,
            uptake_email_phone: 0.65,
            noise_sd: 1.0,
            share_at_minimum: 0.6,
            above_minimum_range: (8.0, 20.0),
            share_male: 0.5,
            share_disadvantaged: 0.6,
            age_range: (21, 60),
            attrition: 10.0 / 775.0,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field: &str, message: &str| {
            Err(ExperimentError::InvalidParam {
                field: field.to_string(),
                message: message.to_string(),
            })
        };
        if self.n < 8 {
            return bad("n", "at least 8 employees are required");
        }
        for (p, field) in [
            (self.uptake_email, "uptake_email"),
            (self.uptake_email_phone, "uptake_email_phone"),
            (self.share_at_minimum, "share_at_minimum"),
            (self.share_male, "share_male"),
            (self.share_disadvantaged, "share_disadvantaged"),
            (self.attrition, "attrition"),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(field, "must be a probability in [0, 1]");
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd", "must be a non-negative number");
        }
        for (v, field) in [
            (self.effect_email, "effect_email"),
            (self.effect_email_phone, "effect_email_phone"),
            (self.male_extra_effect, "male_extra_effect"),
        ] {
            if !v.is_finite() {
                return bad(field, "must be finite");
            }
        }
        let (lo, hi) = self.above_minimum_range;
        if !(lo > MIN_RATE && lo <= hi && hi <= 100.0) {
            return bad("above_minimum_range", "must satisfy 7.5 < lo <= hi <= 100");
        }
        let (a, b) = self.age_range;
        if a == 0 || a > b {
            return bad("age_range", "must satisfy 0 < lo <= hi");
        }
        Ok(())
    }

    fn uptake(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => 0.0,
            Arm::Email => self.uptake_email,
            Arm::EmailPhone => self.uptake_email_phone,
        }
    }

    fn effect(&self, arm: Arm, gender: Gender) -> f64 {
        let base = match arm {
            Arm::Control => 0.0,
            Arm::Email => self.effect_email,
            Arm::EmailPhone => self.effect_email_phone,
        };
        base + if gender == Gender::Male { self.male_extra_effect } else { 0.0 }
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Covariates only: no treatment, no outcomes.
pub fn generate_roster(dgp: &DgpParams, seed: u64) -> Result<Vec<EmployeeRecord>, ExperimentError> {
    dgp.validate()?;
    let mut rng = stream(seed, STREAM_COVARIATES);
    let width = (dgp.n.max(1) as f64).log10().floor() as usize + 1;
    let (lo, hi) = dgp.above_minimum_range;
    let steps = ((hi - lo) * 2.0).floor() as u32;
    Ok((0..dgp.n)
        .map(|i| {
            let pre_rate = if rng.random_bool(dgp.share_at_minimum) {
                MIN_RATE
            } else {
                lo + 0.5 * f64::from(rng.random_range(0..=steps))
            };
            EmployeeRecord {
                id: format!("E{:0width$}", i + 1),
                age: rng.random_range(dgp.age_range.0..=dgp.age_range.1),
                gender: if rng.random_bool(dgp.share_male) {
                    Gender::Male
                } else {
                    Gender::Female
                },
                disadvantaged: rng.random_bool(dgp.share_disadvantaged),
                tenure: f64::from(rng.random_range(0..=300u32)) / 10.0,
                pre_rate,
                post_rate: None,
                treatment: None,
                clicked: false,
                attrited: false,
            }
        })
        .collect())
}

/// Draws uptake, attrition and post rates for an already randomized roster.
pub fn simulate_outcomes(
    roster: &[EmployeeRecord],
    dgp: &DgpParams,
    seed: u64,
) -> Result<Vec<EmployeeRecord>, ExperimentError> {
    dgp.validate()?;
    let mut rng = stream(seed, STREAM_OUTCOMES);
    let noise = Normal::new(0.0, dgp.noise_sd).map_err(|e| ExperimentError::InvalidParam {
        field: "noise_sd".into(),
        message: e.to_string(),
    })?;
    roster
        .iter()
        .map(|r| {
            let arm = r.treatment.ok_or_else(|| ExperimentError::Unassigned(r.id.clone()))?;
            // draw every variate for every row so streams stay aligned across parameter changes
            let click_draw: f64 = rng.random();
            let leave_draw: f64 = rng.random();
            let eps = noise.sample(&mut rng);
            let clicked = click_draw < dgp.uptake(arm);
            let attrited = leave_draw < dgp.attrition;
            let post_rate = (!attrited).then(|| {
                let effect = if clicked { dgp.effect(arm, r.gender) } else { 0.0 };
                (r.pre_rate + effect + eps).max(MIN_RATE)
            });
            Ok(EmployeeRecord {
                clicked,
                attrited,
                post_rate,
                ..r.clone()
            })
        })
        .collect()
}

/// Covariates, stratified assignment and outcomes in one go.
pub fn simulate_population(
    dgp: &DgpParams,
    cutpoints: &AgeCutpoints,
    seed: u64,
) -> Result<Vec<EmployeeRecord>, ExperimentError> {
    let mut roster = generate_roster(dgp, seed)?;
    let mut assign_rng = stream(seed, STREAM_ASSIGNMENT);
    let assignment = assign(&stratify(&roster, cutpoints), assign_rng.random());
    apply_assignment(&mut roster, &assignment)?;
    simulate_outcomes(&roster, dgp, seed)
}
