use std::fmt::Write as _;
use std::path::Path;

use ontrack_core::experiment::{
    apply_assignment, assign, bootstrap_mean_diff, generate_roster, het_effects, itt, late,
    simulate_outcomes, stratify, AgeCutpoints, Arm, ArmCoding, BootstrapResult, CovarianceKind,
    DgpParams, EmployeeRecord, EstimatorOptions, GroupIndicator, Outcome, RegressionFit,
};
use ontrack_core::io::{load_roster, roster_to_csv, CleaningReport, LoadOptions};

use super::{emit, read_config, write_output};
use crate::error::{CliError, CliResult};
use crate::{
    AnalyzeCommand, CovarianceArg, CutpointArgs, EstimatorArgs, OutcomeArg, RandomizeArgs,
    RosterArgs, SimulateArgs,
};

pub(crate) fn cutpoints(args: &CutpointArgs) -> CliResult<AgeCutpoints> {
    let c = AgeCutpoints([args.cutpoints[0], args.cutpoints[1], args.cutpoints[2]]);
    if c.is_valid() {
        Ok(c)
    } else {
        Err(CliError::invalid("--cutpoints must be strictly increasing, e.g. 27,32,38"))
    }
}

pub(crate) fn outcome(arg: OutcomeArg) -> Outcome {
    match arg {
        OutcomeArg::Change => Outcome::Change,
        OutcomeArg::PostRate => Outcome::PostRate,
    }
}

fn log_report(path: &Path, report: &CleaningReport) {
    if !report.floored.is_empty() {
        tracing::warn!(
            roster = %path.display(),
            rows = report.floored.len(),
            "pre_rate below the minimum was floored to 7.5"
        );
    }
    for r in &report.rejected {
        tracing::warn!(roster = %path.display(), "skipped {r}");
    }
    if !report.attrited.is_empty() {
        tracing::info!(roster = %path.display(), rows = report.attrited.len(), "attrited rows");
    }
}

pub(crate) fn read_roster_file(path: &Path, max_row_errors: usize) -> CliResult<Vec<EmployeeRecord>> {
    if !path.exists() {
        return Err(CliError::invalid(format!("roster {} does not exist", path.display())));
    }
    let (roster, report) = load_roster(path, &LoadOptions { max_row_errors })?;
    log_report(path, &report);
    Ok(roster)
}

pub(crate) fn load(input: &RosterArgs) -> CliResult<Vec<EmployeeRecord>> {
    read_roster_file(&input.roster, input.max_row_errors)
}

fn write_roster_out(out: Option<&Path>, roster: &[EmployeeRecord], json: bool) -> CliResult<()> {
    if json && out.is_none() {
        return emit(true, &roster, |_| String::new());
    }
    write_output(out, &roster_to_csv(roster))
}

pub fn randomize(args: &RandomizeArgs, json: bool) -> CliResult<()> {
    let mut roster = load(&args.input)?;
    let cuts = cutpoints(&args.cutpoints)?;
    let strata = stratify(&roster, &cuts);
    let assignment = assign(&strata, args.seed);
    apply_assignment(&mut roster, &assignment)?;
    tracing::info!(strata = strata.len(), rows = roster.len(), "randomized");
    write_roster_out(args.out.as_deref(), &roster, json)
}

pub fn simulate(args: &SimulateArgs, json: bool) -> CliResult<()> {
    let mut dgp: DgpParams = match &args.dgp {
        Some(path) => read_config(path)?,
        None => DgpParams::default(),
    };
    if let Some(n) = args.n {
        dgp.n = n;
    }
    if let Some(v) = args.effect_email {
        dgp.effect_email = v;
    }
    if let Some(v) = args.effect_email_phone {
        dgp.effect_email_phone = v;
    }
    if let Some(v) = args.male_extra_effect {
        dgp.male_extra_effect = v;
    }
    let roster = match &args.roster {
        Some(path) => simulate_outcomes(&read_roster_file(path, args.max_row_errors)?, &dgp, args.seed)?,
        None => generate_roster(&dgp, args.seed)?,
    };
    write_roster_out(args.out.as_deref(), &roster, json)
}

fn estimator_options(args: &EstimatorArgs, fixed_effects: bool) -> CliResult<EstimatorOptions> {
    Ok(EstimatorOptions {
        outcome: outcome(args.outcome),
        covariance: match args.covariance {
            CovarianceArg::Hc0 => CovarianceKind::Hc0,
            CovarianceArg::Hc1 => CovarianceKind::Hc1,
        },
        fixed_effects,
        arms: if args.pooled { ArmCoding::Pooled } else { ArmCoding::Separate },
        cutpoints: cutpoints(&args.cutpoints)?,
    })
}

pub(crate) fn render_fit(fit: &RegressionFit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} ({:?} outcome)", fit.estimator, fit.outcome);
    let _ = writeln!(s, "{:<24}{:>10}{:>10}{:>22}", "term", "coef", "se", "95% ci");
    for (name, coef) in &fit.coefficients {
        let se = fit.robust_se[name];
        let (lo, hi) = fit.ci95[name];
        let _ = writeln!(s, "{name:<24}{coef:>10.4}{se:>10.4}   [{lo:>8.4}, {hi:>8.4}]");
    }
    let _ = writeln!(
        s,
        "n = {} ({} attrited), r2 = {:.4}, rmse = {:.4}",
        fit.n_obs, fit.n_attrited, fit.r_squared, fit.rmse
    );
    if let Some(m) = fit.control_mean {
        let _ = writeln!(s, "control mean = {m:.4}");
    }
    if let Some(f) = fit.first_stage_f {
        let _ = writeln!(s, "first-stage F = {f:.2}");
    }
    for w in &fit.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn render_bootstrap(results: &Vec<BootstrapResult>) -> String {
    let mut s = String::new();
    for b in results {
        let _ = writeln!(
            s,
            "{} - {}: {:.4} [{:.4}, {:.4}] (n = {} / {}, {} resamples)",
            b.treated,
            b.control,
            b.point,
            b.ci_lo,
            b.ci_hi,
            b.n_treated,
            b.n_control,
            b.draws.len()
        );
    }
    s
}

pub fn analyze(cmd: AnalyzeCommand, json: bool) -> CliResult<()> {
    match cmd {
        AnalyzeCommand::Itt(args) => {
            let fit = itt(&load(&args.input)?, &estimator_options(&args, !args.no_fixed_effects)?)?;
            emit(json, &fit, render_fit)
        }
        AnalyzeCommand::Late(args) => {
            let fit = late(&load(&args.input)?, &estimator_options(&args, !args.no_fixed_effects)?)?;
            emit(json, &fit, render_fit)
        }
        AnalyzeCommand::Het {
            est,
            group,
            fixed_effects,
        } => {
            let group: GroupIndicator = group.parse().map_err(|e: String| {
                CliError::invalid(e).hint("use male, female, disadvantaged, white, min_saver or age>=N")
            })?;
            let fit = het_effects(&load(&est.input)?, &estimator_options(&est, fixed_effects)?, group)?;
            emit(json, &fit, render_fit)
        }
        AnalyzeCommand::Bootstrap {
            input,
            seed,
            resamples,
            outcome: o,
            draws,
        } => {
            let roster = load(&input)?;
            // one seed per comparison so the two arms do not share resampling draws
            let mut results = [Arm::Email, Arm::EmailPhone]
                .into_iter()
                .enumerate()
                .map(|(i, arm)| {
                    bootstrap_mean_diff(&roster, (arm, Arm::Control), outcome(o), resamples, seed.wrapping_add(i as u64))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let text = render_bootstrap(&results);
            if !draws {
                for r in &mut results {
                    r.draws.clear();
                }
            }
            emit(json, &results, |_| text)
        }
    }
}
