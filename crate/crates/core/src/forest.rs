//! Honest causal forests.
//!
//! Each tree draws two disjoint subsamples: one chooses the splits, the other
//! estimates the treatment effect (treated mean minus control mean) in every
//! leaf. A split is scored by the size-weighted variance of the two
//! children's effect estimates minus `within_leaf_penalty` times the
//! size-weighted mean of their sampling variances, and is only taken when
//! that score is positive. A leaf whose estimation sample has too few treated
//! or control rows reports its closest qualifying ancestor's estimate and is
//! flagged as inherited.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::experiment::{AgeCutpoints, EmployeeRecord, ExperimentError, Outcome};
use crate::projection::Gender;

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Covariates used by [`ForestData::from_roster`], in column order.
pub const ROSTER_FEATURES: [&str; 4] = ["age_bucket", "male", "white", "pre_rate"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("covariates have {got} columns, forest expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("a child of the split has too few treated or control rows")]
    InfeasibleSplit,
    #[error("no rows to train or predict on")]
    Empty,
    #[error("forest document is invalid: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub num_trees: usize,
    pub split_fraction: f64,
    pub estimate_fraction: f64,
    pub min_leaf_treated: usize,
    pub min_leaf_control: usize,
    pub within_leaf_penalty: f64,
    /// Fraction of features considered at each split (at least one).
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: 2000,
            split_fraction: 0.25,
            estimate_fraction: 0.25,
            min_leaf_treated: 5,
            min_leaf_control: 5,
            within_leaf_penalty: 1.0,
            feature_subsample: 0.5,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        let bad = |m: &str| Err(ForestError::InvalidParams(m.to_string()));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1");
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.split_fraction) || !frac_ok(self.estimate_fraction) {
            return bad("split_fraction and estimate_fraction must lie in (0, 1]");
        }
        if self.split_fraction + self.estimate_fraction > 1.0 + 1e-12 {
            return bad("split_fraction + estimate_fraction must not exceed 1");
        }
        if self.min_leaf_treated == 0 || self.min_leaf_control == 0 {
            return bad("leaf minimums must be at least 1");
        }
        if self.within_leaf_penalty.is_nan() || self.within_leaf_penalty < 0.0 {
            return bad("within_leaf_penalty must be non-negative");
        }
        if !frac_ok(self.feature_subsample) {
            return bad("feature_subsample must lie in (0, 1]");
        }
        Ok(())
    }

    fn features_per_split(&self, p: usize) -> usize {
        ((self.feature_subsample * p as f64).round() as usize).clamp(1, p.max(1))
    }
}

/// Training matrix: covariates, binary treatment and outcome per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestData {
    pub ids: Vec<String>,
    pub features: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub treated: Vec<bool>,
    pub y: Vec<f64>,
}

impl ForestData {
    pub fn new(
        features: Vec<String>,
        x: Vec<Vec<f64>>,
        treated: Vec<bool>,
        y: Vec<f64>,
    ) -> Result<Self, ForestError> {
        let n = x.len();
        if treated.len() != n || y.len() != n {
            return Err(ForestError::InvalidParams("x, treated and y lengths differ".into()));
        }
        for row in &x {
            if row.len() != features.len() {
                return Err(ForestError::SchemaMismatch {
                    expected: features.len(),
                    got: row.len(),
                });
            }
        }
        Ok(Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            features,
            x,
            treated,
            y,
        })
    }

    /// Covariates of one record in [`ROSTER_FEATURES`] order.
    pub fn covariates(record: &EmployeeRecord, cutpoints: &AgeCutpoints) -> Vec<f64> {
        vec![
            cutpoints.bucket(record.age).index() as f64,
            f64::from(u8::from(record.gender == Gender::Male)),
            f64::from(u8::from(!record.disadvantaged)),
            record.pre_rate,
        ]
    }

    /// Non-attrited rows; both treatment arms pooled into one indicator.
    pub fn from_roster(
        roster: &[EmployeeRecord],
        outcome: Outcome,
        cutpoints: &AgeCutpoints,
    ) -> Result<Self, ForestError> {
        let mut data = ForestData {
            ids: Vec::new(),
            features: ROSTER_FEATURES.iter().map(|s| s.to_string()).collect(),
            x: Vec::new(),
            treated: Vec::new(),
            y: Vec::new(),
        };
        for r in roster.iter().filter(|r| !r.attrited) {
            let arm = r.treatment.ok_or_else(|| ExperimentError::Unassigned(r.id.clone()))?;
            let y = r
                .outcome(outcome)
                .ok_or_else(|| ExperimentError::MissingOutcome(r.id.clone()))?;
            data.ids.push(r.id.clone());
            data.x.push(Self::covariates(r, cutpoints));
            data.treated.push(arm.is_treated());
            data.y.push(y);
        }
        Ok(data)
    }

    /// Covariates of every non-attrited row, for prediction. Treatment and
    /// outcome are left at zero.
    pub fn covariates_only(roster: &[EmployeeRecord], cutpoints: &AgeCutpoints) -> Self {
        let rows: Vec<&EmployeeRecord> = roster.iter().filter(|r| !r.attrited).collect();
        ForestData {
            ids: rows.iter().map(|r| r.id.clone()).collect(),
            features: ROSTER_FEATURES.iter().map(|s| s.to_string()).collect(),
            x: rows.iter().map(|r| Self::covariates(r, cutpoints)).collect(),
            treated: vec![false; rows.len()],
            y: vec![0.0; rows.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafEstimate {
    pub effect: f64,
    /// Estimation rows reaching this node.
    pub n_treated: usize,
    pub n_control: usize,
    /// The effect was taken from an ancestor because this node's estimation
    /// sample was too small.
    pub inherited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        estimate: LeafEstimate,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        estimate: LeafEstimate,
    },
}

impl Node {
    pub fn estimate(&self) -> &LeafEstimate {
        match self {
            Node::Split { estimate, .. } | Node::Leaf { estimate } => estimate,
        }
    }

    /// Rows with `x[feature] <= threshold` go left.
    pub fn route(&self, x: &[f64]) -> &LeafEstimate {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { estimate } => return estimate,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> Vec<&LeafEstimate> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                Node::Leaf { estimate } => out.push(estimate),
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// `(feature, threshold)` of splits in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = n
            {
                out.push((*feature, *threshold));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTree {
    pub split_ids: Vec<usize>,
    pub estimate_ids: Vec<usize>,
    pub root: Node,
}

impl CausalTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.root.route(x).effect
    }

    /// Honesty and leaf-minimum invariants.
    pub fn check(&self, params: &ForestParams, n_features: usize) -> Result<(), String> {
        let split: HashSet<_> = self.split_ids.iter().collect();
        if self.estimate_ids.iter().any(|i| split.contains(i)) {
            return Err("split and estimation samples overlap".into());
        }
        fn walk(node: &Node, ancestors: &mut Vec<f64>, params: &ForestParams, p: usize) -> Result<(), String> {
            let est = node.estimate();
            let enough =
                est.n_treated >= params.min_leaf_treated && est.n_control >= params.min_leaf_control;
            match node {
                Node::Leaf { estimate } => {
                    if !estimate.inherited && !enough {
                        return Err("leaf below estimation minimums is not flagged".into());
                    }
                    if estimate.inherited && !ancestors.is_empty() && !ancestors.contains(&estimate.effect) {
                        return Err("inherited leaf does not carry an ancestor estimate".into());
                    }
                    Ok(())
                }
                Node::Split {
                    feature,
                    threshold,
                    estimate,
                    left,
                    right,
                } => {
                    if *feature >= p || !threshold.is_finite() {
                        return Err(format!("bad split on feature {feature}"));
                    }
                    ancestors.push(estimate.effect);
                    walk(left, ancestors, params, p)?;
                    walk(right, ancestors, params, p)?;
                    ancestors.pop();
                    Ok(())
                }
            }
        }
        walk(&self.root, &mut Vec::new(), params, n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
struct ChildStats {
    n: usize,
    effect: f64,
    variance: f64,
}

fn group_moments(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        sum += v;
        sq += v * v;
    }
    if n == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = if n > 1 {
        ((sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    (n, mean, var)
}

fn child_stats(rows: &[usize], data: &ForestData, params: &ForestParams) -> Option<ChildStats> {
    let (nt, mt, vt) = group_moments(rows.iter().filter(|&&i| data.treated[i]).map(|&i| data.y[i]));
    let (nc, mc, vc) = group_moments(rows.iter().filter(|&&i| !data.treated[i]).map(|&i| data.y[i]));
    if nt < params.min_leaf_treated || nc < params.min_leaf_control {
        return None;
    }
    Some(ChildStats {
        n: nt + nc,
        effect: mt - mc,
        variance: vt / nt as f64 + vc / nc as f64,
    })
}

/// Score of splitting `rows` at `candidate`; larger is better and only
/// positive scores are worth splitting.
pub fn split_score(
    rows: &[usize],
    data: &ForestData,
    candidate: Candidate,
    params: &ForestParams,
) -> Result<f64, ForestError> {
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| data.x[i][candidate.feature] <= candidate.threshold);
    let l = child_stats(&left, data, params).ok_or(ForestError::InfeasibleSplit)?;
    let r = child_stats(&right, data, params).ok_or(ForestError::InfeasibleSplit)?;
    let total = (l.n + r.n) as f64;
    let (wl, wr) = (l.n as f64 / total, r.n as f64 / total);
    let mean_effect = wl * l.effect + wr * r.effect;
    let across = wl * (l.effect - mean_effect).powi(2) + wr * (r.effect - mean_effect).powi(2);
    let within = wl * l.variance + wr * r.variance;
    let penalty = params.within_leaf_penalty;
    Ok(if within == 0.0 { across } else { across - penalty * within })
}

/// Midpoints between consecutive distinct values of `feature` among `rows`.
pub fn candidate_thresholds(rows: &[usize], data: &ForestData, feature: usize) -> Vec<f64> {
    let mut values: Vec<f64> = rows.iter().map(|&i| data.x[i][feature]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
}

/// Best feasible split over `features`; ties go to the lowest feature index,
/// then the lowest threshold.
pub fn best_split(
    rows: &[usize],
    data: &ForestData,
    features: &[usize],
    params: &ForestParams,
) -> Option<(Candidate, f64)> {
    let mut best: Option<(Candidate, f64)> = None;
    for &feature in features {
        for threshold in candidate_thresholds(rows, data, feature) {
            let c = Candidate { feature, threshold };
            if let Ok(score) = split_score(rows, data, c, params) {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((c, score));
                }
            }
        }
    }
    best
}

/// Split structure before estimation.
enum Shape {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Shape>,
        right: Box<Shape>,
    },
}

fn grow_shape(rows: &[usize], data: &ForestData, params: &ForestParams, rng: &mut ChaCha8Rng) -> Shape {
    let p = data.features.len();
    let mut features = index::sample(rng, p, params.features_per_split(p)).into_vec();
    features.sort_unstable();
    match best_split(rows, data, &features, params) {
        Some((c, score)) if score > 0.0 => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| data.x[i][c.feature] <= c.threshold);
            Shape::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: Box::new(grow_shape(&left, data, params, rng)),
                right: Box::new(grow_shape(&right, data, params, rng)),
            }
        }
        _ => Shape::Leaf,
    }
}

fn raw_estimate(rows: &[usize], data: &ForestData) -> (usize, usize, Option<f64>) {
    let (nt, mt, _) = group_moments(rows.iter().filter(|&&i| data.treated[i]).map(|&i| data.y[i]));
    let (nc, mc, _) = group_moments(rows.iter().filter(|&&i| !data.treated[i]).map(|&i| data.y[i]));
    (nt, nc, (nt > 0 && nc > 0).then_some(mt - mc))
}

fn estimate_node(
    shape: &Shape,
    rows: &[usize],
    data: &ForestData,
    params: &ForestParams,
    fallback: Option<f64>,
) -> Node {
    let (nt, nc, raw) = raw_estimate(rows, data);
    let enough = nt >= params.min_leaf_treated && nc >= params.min_leaf_control;
    let estimate = match (enough, raw, fallback) {
        (true, Some(effect), _) => LeafEstimate {
            effect,
            n_treated: nt,
            n_control: nc,
            inherited: false,
        },
        (_, _, Some(effect)) => LeafEstimate {
            effect,
            n_treated: nt,
            n_control: nc,
            inherited: true,
        },
        // root without a qualifying estimate: best available, flagged
        (_, raw, None) => LeafEstimate {
            effect: raw.unwrap_or(0.0),
            n_treated: nt,
            n_control: nc,
            inherited: true,
        },
    };
    let carried = if estimate.inherited { fallback } else { Some(estimate.effect) };
    match shape {
        Shape::Leaf => Node::Leaf { estimate },
        Shape::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| data.x[i][*feature] <= *threshold);
            Node::Split {
                feature: *feature,
                threshold: *threshold,
                estimate,
                left: Box::new(estimate_node(left, &l, data, params, carried)),
                right: Box::new(estimate_node(right, &r, data, params, carried)),
            }
        }
    }
}

/// Grows on `split_ids` and estimates leaves on `estimate_ids`.
pub fn grow_tree_with_samples(
    data: &ForestData,
    split_ids: Vec<usize>,
    estimate_ids: Vec<usize>,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> CausalTree {
    let min_rows = 2 * (params.min_leaf_treated + params.min_leaf_control);
    let shape = if split_ids.len() >= min_rows {
        grow_shape(&split_ids, data, params, rng)
    } else {
        Shape::Leaf
    };
    let root = estimate_node(&shape, &estimate_ids, data, params, None);
    CausalTree {
        split_ids,
        estimate_ids,
        root,
    }
}

fn tree_rng(seed: u64, tree_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index);
    rng
}

/// Grows tree number `tree_index`; its randomness comes only from
/// `(params.seed, tree_index)`.
pub fn grow_tree(data: &ForestData, params: &ForestParams, tree_index: u64) -> CausalTree {
    let mut rng = tree_rng(params.seed, tree_index);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_split = ((n as f64 * params.split_fraction).round() as usize).min(n);
    let n_est = ((n as f64 * params.estimate_fraction).round() as usize).min(n - n_split);
    let mut split_ids = order[..n_split].to_vec();
    let mut estimate_ids = order[n_split..n_split + n_est].to_vec();
    split_ids.sort_unstable();
    estimate_ids.sort_unstable();
    grow_tree_with_samples(data, split_ids, estimate_ids, params, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub schema: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<CausalTree>,
}

pub fn train_forest(data: &ForestData, params: &ForestParams) -> Result<Forest, ForestError> {
    params.validate()?;
    if data.is_empty() {
        return Err(ForestError::Empty);
    }
    let trees = (0..params.num_trees as u64)
        .into_par_iter()
        .map(|t| grow_tree(data, params, t))
        .collect();
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        schema: data.features.clone(),
        params: params.clone(),
        trees,
    })
}

/// Mean of the leaf estimates reached in every tree.
pub fn predict_cate(forest: &Forest, covariates: &[f64]) -> Result<f64, ForestError> {
    if covariates.len() != forest.schema.len() {
        return Err(ForestError::SchemaMismatch {
            expected: forest.schema.len(),
            got: covariates.len(),
        });
    }
    if forest.trees.is_empty() {
        return Err(ForestError::Empty);
    }
    let total: f64 = forest.trees.iter().map(|t| t.predict(covariates)).sum();
    Ok(total / forest.trees.len() as f64)
}

impl Forest {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    /// Parses and checks a serialized forest.
    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        let forest: Forest =
            serde_json::from_str(text).map_err(|e| ForestError::Corrupt(e.to_string()))?;
        forest.check()?;
        Ok(forest)
    }

    pub fn check(&self) -> Result<(), ForestError> {
        if self.version != FOREST_FORMAT_VERSION {
            return Err(ForestError::Corrupt(format!("unsupported version {}", self.version)));
        }
        self.params
            .validate()
            .map_err(|e| ForestError::Corrupt(e.to_string()))?;
        for (i, t) in self.trees.iter().enumerate() {
            t.check(&self.params, self.schema.len())
                .map_err(|e| ForestError::Corrupt(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn predict_all(&self, data: &ForestData) -> Result<Vec<f64>, ForestError> {
        if data.features.len() != self.schema.len() {
            return Err(ForestError::SchemaMismatch {
                expected: self.schema.len(),
                got: data.features.len(),
            });
        }
        data.x.par_iter().map(|x| predict_cate(self, x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub bins: Vec<HistogramBin>,
    pub predictions: Vec<(String, f64)>,
}

impl CateSummary {
    pub fn share_within(&self, lo: f64, hi: f64) -> f64 {
        let inside = self
            .predictions
            .iter()
            .filter(|(_, c)| (lo..=hi).contains(c))
            .count();
        inside as f64 / self.predictions.len() as f64
    }

    /// `id,cate` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,cate\n");
        for (id, cate) in &self.predictions {
            out.push_str(&format!("{id},{cate}\n"));
        }
        out
    }
}

/// Per-row predictions binned into `bins` equal-width bins over `[min, max]`.
pub fn cate_summary(forest: &Forest, data: &ForestData, bins: usize) -> Result<CateSummary, ForestError> {
    if data.is_empty() {
        return Err(ForestError::Empty);
    }
    let preds = forest.predict_all(data)?;
    let min = preds.iter().copied().fold(f64::INFINITY, f64::min);
    let max = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = preds.iter().sum::<f64>() / preds.len() as f64;
    let bins = if min == max {
        vec![HistogramBin {
            lo: min,
            hi: max,
            count: preds.len(),
        }]
    } else {
        let k = bins.max(1);
        let width = (max - min) / k as f64;
        let mut out: Vec<HistogramBin> = (0..k)
            .map(|b| HistogramBin {
                lo: min + width * b as f64,
                hi: if b + 1 == k { max } else { min + width * (b + 1) as f64 },
                count: 0,
            })
            .collect();
        for p in &preds {
            let b = (((p - min) / width) as usize).min(k - 1);
            out[b].count += 1;
        }
        out
    };
    Ok(CateSummary {
        min,
        max,
        mean,
        bins,
        predictions: data.ids.iter().cloned().zip(preds).collect(),
    })
}
