use std::fmt::Write as _;

use ontrack_core::projection::{
    generate_rate_table, project_retirement_income, required_contribution_rate,
    required_rate_with_balance, Assumptions, Compounding, DrawdownSchedule, EmployeeProfile,
    Gender, IncomeProjection, Money, RateTable,
};
use serde::Serialize;

use super::{emit, read_config};
use crate::error::{CliError, CliResult};
use crate::{GenderArg, ProfileArgs, RequiredRateArgs, TableArgs, WhatIfArgs};

fn money(value: f64, flag: &str) -> CliResult<Money> {
    Money::from_units(value).ok_or_else(|| CliError::invalid(format!("--{flag} {value} is not a representable amount")))
}

fn load_profile(args: &ProfileArgs) -> CliResult<EmployeeProfile> {
    let mut profile = match &args.profile {
        Some(path) => read_config::<EmployeeProfile>(path)?,
        None => {
            let missing: Vec<&str> = [
                ("--gender", args.gender.is_none()),
                ("--age", args.age.is_none()),
                ("--retirement-age", args.retirement_age.is_none()),
                ("--salary", args.salary.is_none()),
                ("--rate", args.rate.is_none()),
            ]
            .into_iter()
            .filter_map(|(flag, absent)| absent.then_some(flag))
            .collect();
            if !missing.is_empty() {
                return Err(CliError::invalid(format!("missing {}", missing.join(", ")))
                    .hint("give every profile flag, or a JSON file with --profile"));
            }
            EmployeeProfile {
                gender: Gender::Female,
                age: 0,
                retirement_age: 0,
                balance: Money::ZERO,
                salary: Money::ZERO,
                contribution_rate: 0.0,
            }
        }
    };
    if let Some(g) = args.gender {
        profile.gender = match g {
            GenderArg::Male => Gender::Male,
            GenderArg::Female => Gender::Female,
        };
    }
    if let Some(v) = args.age {
        profile.age = v;
    }
    if let Some(v) = args.retirement_age {
        profile.retirement_age = v;
    }
    if let Some(v) = args.balance {
        profile.balance = money(v, "balance")?;
    }
    if let Some(v) = args.salary {
        profile.salary = money(v, "salary")?;
    }
    if let Some(v) = args.rate {
        profile.contribution_rate = v;
    }
    Ok(profile)
}

fn load_assumptions(args: &ProfileArgs) -> CliResult<Assumptions> {
    let mut a = match &args.assumptions {
        Some(path) => read_config::<Assumptions>(path)?,
        None => Assumptions::default(),
    };
    if let Some(d) = args.drawdown {
        a.drawdown = DrawdownSchedule::flat(d);
    }
    if args.monthly {
        a.compounding = Compounding::Monthly;
    }
    Ok(a)
}

#[derive(Serialize)]
struct ProjectionOutput {
    #[serde(flatten)]
    projection: IncomeProjection,
    display: ontrack_core::projection::ProjectionDisplay,
    on_track: bool,
    warnings: Vec<ontrack_core::FieldError>,
}

fn output(profile: &EmployeeProfile, assumptions: &Assumptions, projection: IncomeProjection) -> ProjectionOutput {
    ProjectionOutput {
        display: projection.display(),
        on_track: projection.on_track(assumptions.goal_replacement),
        warnings: profile
            .validate()
            .unwrap_or_default()
            .into_iter()
            .map(|w| w.nested("profile"))
            .collect(),
        projection,
    }
}

fn render(out: &ProjectionOutput) -> String {
    let d = &out.display;
    let mut s = String::new();
    let _ = writeln!(s, "replacement rate   {}% - {}%", d.replacement_pct_lo, d.replacement_pct_hi);
    let _ = writeln!(s, "annual income      {} - {}", d.income_annual_lo, d.income_annual_hi);
    let _ = writeln!(s, "monthly income     {} - {}", d.income_monthly_lo, d.income_monthly_hi);
    let _ = writeln!(s, "fund at retirement {} - {}", d.fund_lo, d.fund_hi);
    let _ = writeln!(s, "years to retire    {}", out.projection.years);
    let _ = writeln!(s, "on track           {}", if out.on_track { "yes" } else { "no" });
    for w in &out.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn project(args: &ProfileArgs, json: bool) -> CliResult<()> {
    let profile = load_profile(args)?;
    let assumptions = load_assumptions(args)?;
    let projection = project_retirement_income(&profile, &assumptions)?;
    emit(json, &output(&profile, &assumptions, projection), render)
}

#[derive(Serialize)]
struct RateOutput {
    rate: f64,
}

pub fn required_rate(args: &RequiredRateArgs, json: bool) -> CliResult<()> {
    let rate = match (args.balance, args.salary) {
        (Some(b), Some(s)) => required_rate_with_balance(
            args.p,
            args.d,
            args.r,
            args.n,
            money(b, "balance")?,
            money(s, "salary")?,
        )?,
        _ => required_contribution_rate(args.p, args.d, args.r, args.n)?,
    };
    emit(json, &RateOutput { rate }, |o| format!("{:.2}%", o.rate * 100.0))
}

pub fn render_table(t: &RateTable) -> String {
    let mut s = String::from("start\\retire");
    for r in &t.retirement_ages {
        let _ = write!(s, "{r:>8}");
    }
    s.push('\n');
    for (start, row) in t.start_ages.iter().zip(&t.cells) {
        let _ = write!(s, "{start:<12}");
        for cell in row {
            match cell {
                Some(c) => {
                    let _ = write!(s, "{:>7.1}%", c * 100.0);
                }
                None => s.push_str("       -"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn table(args: &TableArgs, json: bool) -> CliResult<()> {
    let t = generate_rate_table(&args.start_ages, &args.retirement_ages, args.p, args.d, args.r)?;
    emit(json, &t, render_table)
}

#[derive(Serialize)]
struct WhatIfOutput {
    baseline: ProjectionOutput,
    adjusted: ProjectionOutput,
}

pub fn whatif(args: &WhatIfArgs, json: bool) -> CliResult<()> {
    let profile = load_profile(&args.profile)?;
    let assumptions = load_assumptions(&args.profile)?;
    let w = ontrack_core::projection::whatif(&profile, &assumptions, args.delta_c, money(args.lump_sum, "lump-sum")?)?;
    let mut adjusted = profile.clone();
    adjusted.contribution_rate += args.delta_c;
    let out = WhatIfOutput {
        baseline: output(&profile, &assumptions, w.baseline),
        adjusted: output(&adjusted, &assumptions, w.adjusted),
    };
    emit(json, &out, |o| {
        format!("baseline\n{}\nadjusted\n{}", render(&o.baseline), render(&o.adjusted))
    })
}
