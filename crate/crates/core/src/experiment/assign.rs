use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

use super::{Arm, EmployeeRecord, ExperimentError, StratumKey};

/// Labels a stratum's leftover employees are drawn from, without replacement,
/// once full blocks of four are used up.
pub const REMAINDER_LABELS: [Arm; 4] = [Arm::Control, Arm::Control, Arm::Email, Arm::EmailPhone];

/// Treatment arm per record id.
pub type Assignment = BTreeMap<String, Arm>;

/// Block randomization within strata: a stratum of `4k + m` gets `2k`
/// control, `k` email and `k` email+phone, plus `m` labels drawn without
/// replacement from [`REMAINDER_LABELS`]. Labels are then shuffled over the
/// stratum's members. Strata are visited in key order from one seeded
/// stream, so the result depends only on `(strata, seed)`.
pub fn assign(strata: &BTreeMap<StratumKey, Vec<String>>, seed: u64) -> Assignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Assignment::new();
    for ids in strata.values() {
        let blocks = ids.len() / 4;
        let remainder = ids.len() % 4;
        let mut labels = Vec::with_capacity(ids.len());
        for _ in 0..blocks {
            labels.extend_from_slice(&REMAINDER_LABELS);
        }
        let mut pool = REMAINDER_LABELS;
        pool.shuffle(&mut rng);
        labels.extend_from_slice(&pool[..remainder]);
        labels.shuffle(&mut rng);
        for (id, arm) in ids.iter().zip(labels) {
            out.insert(id.clone(), arm);
        }
    }
    out
}

/// Writes the assignment into the roster. Every record must be covered.
pub fn apply_assignment(
    roster: &mut [EmployeeRecord],
    assignment: &Assignment,
) -> Result<(), ExperimentError> {
    let lookup: HashMap<&str, Arm> = assignment.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    for record in roster.iter_mut() {
        let arm = lookup
            .get(record.id.as_str())
            .ok_or_else(|| ExperimentError::Unassigned(record.id.clone()))?;
        record.treatment = Some(*arm);
        if !arm.is_treated() {
            record.clicked = false;
        }
    }
    Ok(())
}
