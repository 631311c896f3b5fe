use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Arm, EmployeeRecord, ExperimentError, Outcome};

pub const DEFAULT_RESAMPLES: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub treated: Arm,
    pub control: Arm,
    pub outcome: Outcome,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_treated: usize,
    pub n_control: usize,
    /// Resampled mean differences, in resample order.
    pub draws: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn resample_mean(values: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = values.len();
    (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
}

/// Non-parametric bootstrap of `mean(treated) - mean(control)` with a 95%
/// percentile interval. Each group is resampled with replacement on its own.
/// Resample `b` draws from stream `b` of the seeded generator, so the output
/// does not depend on how the work is split across threads.
pub fn bootstrap_mean_diff(
    roster: &[EmployeeRecord],
    arms: (Arm, Arm),
    outcome: Outcome,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult, ExperimentError> {
    let (treated, control) = arms;
    if resamples < 1000 {
        return Err(ExperimentError::InvalidParam {
            field: "resamples".into(),
            message: "at least 1000 resamples are required".into(),
        });
    }
    let values = |arm: Arm| -> Vec<f64> {
        roster
            .iter()
            .filter(|r| !r.attrited && r.treatment == Some(arm))
            .filter_map(|r| r.outcome(outcome))
            .collect()
    };
    let t = values(treated);
    let c = values(control);
    if t.is_empty() {
        return Err(ExperimentError::EmptyGroup(treated.to_string()));
    }
    if c.is_empty() {
        return Err(ExperimentError::EmptyGroup(control.to_string()));
    }

    let draws: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            resample_mean(&t, &mut rng) - resample_mean(&c, &mut rng)
        })
        .collect();
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        treated,
        control,
        outcome,
        point: mean(&t) - mean(&c),
        ci_lo: percentile(&sorted, 0.025),
        ci_hi: percentile(&sorted, 0.975),
        n_treated: t.len(),
        n_control: c.len(),
        draws,
    })
}
