use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use super::EmployeeRecord;
use crate::projection::Gender;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBucket {
    #[serde(rename = "le27")]
    Youngest,
    #[serde(rename = "28_32")]
    Young,
    #[serde(rename = "33_38")]
    Middle,
    #[serde(rename = "ge39")]
    Oldest,
}

impl AgeBucket {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Inclusive upper bounds of the first three age buckets. The default
/// `[27, 32, 38]` gives `<=27, 28-32, 33-38, 39+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeCutpoints(pub [u32; 3]);

impl Default for AgeCutpoints {
    fn default() -> Self {
        AgeCutpoints([27, 32, 38])
    }
}

impl AgeCutpoints {
    pub fn bucket(&self, age: u32) -> AgeBucket {
        let [a, b, c] = self.0;
        if age <= a {
            AgeBucket::Youngest
        } else if age <= b {
            AgeBucket::Young
        } else if age <= c {
            AgeBucket::Middle
        } else {
            AgeBucket::Oldest
        }
    }

    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.0;
        a < b && b < c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub min_saver: bool,
    pub gender: Gender,
    pub age_bucket: AgeBucket,
    pub disadvantaged: bool,
}

impl StratumKey {
    pub fn of(record: &EmployeeRecord, cutpoints: &AgeCutpoints) -> Self {
        StratumKey {
            min_saver: record.min_saver(),
            gender: record.gender,
            age_bucket: cutpoints.bucket(record.age),
            disadvantaged: record.disadvantaged,
        }
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bucket = match self.age_bucket {
            AgeBucket::Youngest => "le27",
            AgeBucket::Young => "28_32",
            AgeBucket::Middle => "33_38",
            AgeBucket::Oldest => "ge39",
        };
        write!(
            f,
            "{}|{}|{}|{}",
            if self.min_saver { "min" } else { "above" },
            self.gender,
            bucket,
            if self.disadvantaged { "disadv" } else { "adv" }
        )
    }
}

/// Partitions the roster into strata. Ids keep roster order within a stratum.
pub fn stratify(
    roster: &[EmployeeRecord],
    cutpoints: &AgeCutpoints,
) -> BTreeMap<StratumKey, Vec<String>> {
    let mut strata: BTreeMap<StratumKey, Vec<String>> = BTreeMap::new();
    for record in roster {
        strata
            .entry(StratumKey::of(record, cutpoints))
            .or_default()
            .push(record.id.clone());
    }
    strata
}
