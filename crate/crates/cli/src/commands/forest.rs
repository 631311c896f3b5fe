use std::fmt::Write as _;

use ontrack_core::forest::{cate_summary, train_forest, CateSummary, Forest, ForestData, ForestParams};

use super::experiment::{cutpoints, load, outcome};
use super::{emit, read_text, write_output};
use crate::error::{CliError, CliResult};
use crate::ForestCommand;

fn render_summary(s: &CateSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} employees, CATE min {:.4}, mean {:.4}, max {:.4}",
        s.predictions.len(),
        s.min,
        s.mean,
        s.max
    );
    let widest = s.bins.iter().map(|b| b.count).max().unwrap_or(1).max(1);
    for b in &s.bins {
        let bar = "#".repeat((b.count * 40).div_ceil(widest));
        let _ = writeln!(out, "[{:>8.4}, {:>8.4}] {:>5} {bar}", b.lo, b.hi, b.count);
    }
    out
}

fn load_forest(path: &std::path::Path) -> CliResult<Forest> {
    Forest::from_json(&read_text(path)?).map_err(|e| {
        CliError::invalid(format!("{}: {e}", path.display())).hint("train one with `ontrack forest train`")
    })
}

pub fn run(cmd: ForestCommand, json: bool) -> CliResult<()> {
    match cmd {
        ForestCommand::Train {
            input,
            seed,
            params,
            outcome: o,
            cutpoints: c,
            out,
        } => {
            let data = ForestData::from_roster(&load(&input)?, outcome(o), &cutpoints(&c)?)?;
            let params = ForestParams {
                num_trees: params.trees,
                split_fraction: params.split_fraction,
                estimate_fraction: params.estimate_fraction,
                min_leaf_treated: params.min_leaf_treated,
                min_leaf_control: params.min_leaf_control,
                within_leaf_penalty: params.within_leaf_penalty,
                feature_subsample: params.feature_subsample,
                seed,
            };
            let forest = train_forest(&data, &params)?;
            let text = forest.to_json().map_err(anyhow::Error::from)?;
            write_output(Some(&out), &text)?;
            tracing::info!(trees = forest.trees.len(), rows = data.len(), "forest trained");
            Ok(())
        }
        ForestCommand::Predict {
            forest,
            input,
            cutpoints: c,
            out,
        } => {
            let forest = load_forest(&forest)?;
            let data = ForestData::covariates_only(&load(&input)?, &cutpoints(&c)?);
            let preds = forest.predict_all(&data)?;
            let rows: Vec<(String, f64)> = data.ids.into_iter().zip(preds).collect();
            if json && out.is_none() {
                return emit(true, &rows, |_| String::new());
            }
            let mut text = String::from("id,cate\n");
            for (id, cate) in &rows {
                let _ = writeln!(text, "{id},{cate}");
            }
            write_output(out.as_deref(), &text)
        }
        ForestCommand::Summary {
            forest,
            input,
            cutpoints: c,
            bins,
        } => {
            let forest = load_forest(&forest)?;
            let data = ForestData::covariates_only(&load(&input)?, &cutpoints(&c)?);
            let summary = cate_summary(&forest, &data, bins)?;
            emit(json, &summary, render_summary)
        }
    }
}
