//! Retirement projection: accumulation of savings, drawdown income, replacement
//! rates and the contribution rate required to reach a goal replacement rate.
//!
//! Everything is expressed in real (today's) currency. Nominal returns are
//! converted with [`real_return`] and salary growth is deflated the same way,
//! so with the default assumptions (salary grows with inflation) real salary is
//! constant over the working life.
//!
//! Contributions follow an ordinary annuity: one contribution at the end of
//! each year (or each month under [`Compounding::Monthly`]), so the last
//! contribution earns no return.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::validation::{Collector, ValidationError};

/// Contribution rate above which contributions stop being tax deductible.
pub const TAX_DEDUCTIBLE_CAP: f64 = 0.275;
/// Lowest recommended drawdown rate.
pub const MIN_DRAWDOWN: f64 = 0.025;
/// Highest recommended drawdown rate.
pub const MAX_DRAWDOWN: f64 = 0.08;
/// Drawdown rate calibrated so the reference profile (male, 30, retiring at
/// 65, R70 000 saved, R200 000 salary, 7.5%) lands on a 26%..39% replacement
/// band. The admissible window is [0.04767, 0.04798); see
/// `tests/drawdown_calibration.rs` for the oracle.
pub const CALIBRATED_DRAWDOWN: f64 = 0.0478;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

/// An amount of money held as whole cents.
///
/// Serialized as a decimal number of currency units (`70000.0`, not cents) so
/// that JSON payloads read naturally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    /// Rounds to the nearest cent. Non-finite or out-of-range amounts yield `None`.
    pub fn from_units(units: f64) -> Option<Self> {
        let cents = (units * 100.0).round();
        (cents.is_finite() && cents.abs() < 9.0e15).then_some(Money(cents as i64))
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn checked_add(self, other: Money) -> Option<Money> {
        self.0.checked_add(other.0).map(Money)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{:.2}", self.units())
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.units())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let units = f64::deserialize(d)?;
        Money::from_units(units)
            .ok_or_else(|| serde::de::Error::custom("amount must be a finite number below 9e13"))
    }
}

/// The six calculator inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmployeeProfile {
    pub gender: Gender,
    pub age: u32,
    pub retirement_age: u32,
    pub balance: Money,
    /// Annual gross salary.
    pub salary: Money,
    /// Fraction of salary contributed, e.g. `0.075`.
    pub contribution_rate: f64,
}

impl EmployeeProfile {
    /// Years left until retirement. Zero when the profile is invalid.
    pub fn years_to_retirement(&self) -> u32 {
        self.retirement_age.saturating_sub(self.age)
    }

    /// Validates the profile. On success returns non-fatal warnings (currently
    /// only the tax-deductibility cap).
    pub fn validate(&self) -> Result<Vec<crate::FieldError>, ValidationError> {
        let mut c = Collector::default();
        c.check(
            self.age < self.retirement_age,
            "age",
            "age must be below retirement_age",
        );
        c.check(
            self.retirement_age <= 120,
            "retirement_age",
            "retirement_age must be at most 120",
        );
        c.check(self.balance.cents() >= 0, "balance", "balance must be non-negative");
        c.check(self.salary.cents() > 0, "salary", "salary must be positive");
        if c.finite(self.contribution_rate, "contribution_rate") {
            c.check(
                (0.0..=1.0).contains(&self.contribution_rate),
                "contribution_rate",
                "contribution_rate must be a fraction in [0, 1]",
            );
        }
        c.finish()?;
        let mut warnings = Vec::new();
        if self.contribution_rate > TAX_DEDUCTIBLE_CAP {
            warnings.push(crate::FieldError::new(
                "contribution_rate",
                format!(
                    "contributions above {:.1}% of salary are not tax deductible",
                    TAX_DEDUCTIBLE_CAP * 100.0
                ),
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compounding {
    #[default]
    Annual,
    Monthly,
}

/// Retirement-age band used to key the drawdown schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RetirementAgeBand {
    #[serde(rename = "le55")]
    UpTo55,
    #[serde(rename = "56_60")]
    From56To60,
    #[serde(rename = "61_65")]
    From61To65,
    #[serde(rename = "66_70")]
    From66To70,
    #[serde(rename = "ge71")]
    From71,
}

impl RetirementAgeBand {
    pub fn of(retirement_age: u32) -> Self {
        match retirement_age {
            0..=55 => Self::UpTo55,
            56..=60 => Self::From56To60,
            61..=65 => Self::From61To65,
            66..=70 => Self::From66To70,
            _ => Self::From71,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawdownEntry {
    pub gender: Gender,
    pub band: RetirementAgeBand,
    pub rate: f64,
}

/// Drawdown rate by gender and retirement age, with a fallback so lookups
/// always succeed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawdownSchedule {
    #[serde(default)]
    pub entries: Vec<DrawdownEntry>,
    pub fallback: f64,
}

impl Default for DrawdownSchedule {
    fn default() -> Self {
        Self {
            entries: vec![DrawdownEntry {
                gender: Gender::Male,
                band: RetirementAgeBand::From61To65,
                rate: CALIBRATED_DRAWDOWN,
            }],
            fallback: CALIBRATED_DRAWDOWN,
        }
    }
}

impl DrawdownSchedule {
    /// A schedule that applies one rate to everybody.
    pub fn flat(rate: f64) -> Self {
        Self {
            entries: Vec::new(),
            fallback: rate,
        }
    }

    /// First matching entry, else the fallback.
    pub fn lookup(&self, gender: Gender, retirement_age: u32) -> f64 {
        let band = RetirementAgeBand::of(retirement_age);
        self.entries
            .iter()
            .find(|e| e.gender == gender && e.band == band)
            .map_or(self.fallback, |e| e.rate)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut c = Collector::default();
        let in_band = |r: f64| (MIN_DRAWDOWN..=MAX_DRAWDOWN).contains(&r);
        let msg = format!(
            "drawdown rate must lie in [{MIN_DRAWDOWN}, {MAX_DRAWDOWN}]"
        );
        c.check(in_band(self.fallback), "fallback", msg.clone());
        for (i, e) in self.entries.iter().enumerate() {
            c.check(in_band(e.rate), &format!("entries[{i}].rate"), msg.clone());
        }
        c.finish()
    }
}

/// Economic assumptions; all rates are annual fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Assumptions {
    pub inflation: f64,
    pub nominal_return_lo: f64,
    pub nominal_return_hi: f64,
    /// Nominal salary growth.
    pub salary_growth: f64,
    pub drawdown: DrawdownSchedule,
    pub compounding: Compounding,
    pub goal_replacement: f64,
}

impl Default for Assumptions {
    fn default() -> Self {
        Self {
            inflation: 0.05,
            nominal_return_lo: 0.08,
            nominal_return_hi: 0.10,
            salary_growth: 0.05,
            drawdown: DrawdownSchedule::default(),
            compounding: Compounding::Annual,
            goal_replacement: 0.75,
        }
    }
}

impl Assumptions {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut c = Collector::default();
        for (value, path) in [
            (self.inflation, "inflation"),
            (self.nominal_return_lo, "nominal_return_lo"),
            (self.nominal_return_hi, "nominal_return_hi"),
            (self.salary_growth, "salary_growth"),
        ] {
            if c.finite(value, path) {
                c.check(value > -1.0, path, "rate must exceed -1");
            }
        }
        c.check(
            self.nominal_return_lo <= self.nominal_return_hi,
            "nominal_return_lo",
            "nominal_return_lo must not exceed nominal_return_hi",
        );
        c.check(
            self.goal_replacement > 0.0 && self.goal_replacement <= 1.5,
            "goal_replacement",
            "goal_replacement must lie in (0, 1.5]",
        );
        c.extend("drawdown", self.drawdown.validate());
        c.finish()
    }

    pub fn real_return_band(&self) -> (f64, f64) {
        (
            real_return(self.nominal_return_lo, self.inflation),
            real_return(self.nominal_return_hi, self.inflation),
        )
    }

    pub fn real_salary_growth(&self) -> f64 {
        real_return(self.salary_growth, self.inflation)
    }
}

/// Fund, income and replacement bands at retirement, in real currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeProjection {
    pub fund_lo: f64,
    pub fund_hi: f64,
    /// Annual income in retirement.
    pub income_lo: f64,
    pub income_hi: f64,
    pub replacement_lo: f64,
    pub replacement_hi: f64,
    pub real_return_lo: f64,
    pub real_return_hi: f64,
    pub drawdown_rate: f64,
    /// Annual salary in the final working year.
    pub final_salary: f64,
    pub years: u32,
}

/// Human-facing rounding of a projection: whole percent and thousands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDisplay {
    pub income_annual_lo: i64,
    pub income_annual_hi: i64,
    pub income_monthly_lo: i64,
    pub income_monthly_hi: i64,
    pub replacement_pct_lo: i64,
    pub replacement_pct_hi: i64,
    pub fund_lo: i64,
    pub fund_hi: i64,
}

fn round_to(value: f64, unit: f64) -> i64 {
    ((value / unit).round() * unit) as i64
}

impl IncomeProjection {
    pub fn display(&self) -> ProjectionDisplay {
        let annual_lo = round_to(self.income_lo, 1000.0);
        let annual_hi = round_to(self.income_hi, 1000.0);
        ProjectionDisplay {
            income_annual_lo: annual_lo,
            income_annual_hi: annual_hi,
            income_monthly_lo: (self.income_lo / 12.0).round() as i64,
            income_monthly_hi: (self.income_hi / 12.0).round() as i64,
            replacement_pct_lo: (self.replacement_lo * 100.0).round() as i64,
            replacement_pct_hi: (self.replacement_hi * 100.0).round() as i64,
            fund_lo: round_to(self.fund_lo, 1000.0),
            fund_hi: round_to(self.fund_hi, 1000.0),
        }
    }

    /// Whether the upper end of the band reaches `goal`.
    pub fn on_track(&self, goal: f64) -> bool {
        self.replacement_hi >= goal
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("drawdown rate must be positive")]
    ZeroDrawdown,
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Converts a nominal rate to a real rate: `(1 + nominal) / (1 + inflation) - 1`.
pub fn real_return(nominal: f64, inflation: f64) -> f64 {
    debug_assert!(1.0 + inflation > 0.0, "inflation must exceed -1");
    (1.0 + nominal) / (1.0 + inflation) - 1.0
}

/// `(1 + r)^n`, accurate for small `r`.
fn growth(r: f64, n: f64) -> f64 {
    (n * r.ln_1p()).exp()
}

/// `((1 + r)^n - 1) / r`, with the limit `n` at `r = 0`.
pub fn annuity_factor(r: f64, n: u32) -> f64 {
    let n = f64::from(n);
    if r == 0.0 {
        n
    } else {
        (n * r.ln_1p()).exp_m1() / r
    }
}

/// Value at retirement of end-of-year contributions growing at `g`:
/// `sum_{k=1..n} (1+g)^(k-1) (1+r)^(n-k)`.
fn growing_annuity_factor(r: f64, g: f64, n: u32) -> f64 {
    if g == 0.0 {
        return annuity_factor(r, n);
    }
    let nf = f64::from(n);
    if r == g {
        nf * growth(r, nf - 1.0)
    } else {
        growth(g, nf) * (nf * (r.ln_1p() - g.ln_1p())).exp_m1() / (r - g)
    }
}

/// Ratio between twelve end-of-month contributions and one end-of-year
/// contribution of the same annual total, both valued at year end.
fn monthly_timing_factor(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        let monthly = (r.ln_1p() / 12.0).exp_m1();
        r / (12.0 * monthly)
    }
}

fn accumulate(
    balance: f64,
    salary: f64,
    contribution_rate: f64,
    years: u32,
    real_return: f64,
    real_salary_growth: f64,
    compounding: Compounding,
) -> f64 {
    let mut contributions = salary
        * contribution_rate
        * growing_annuity_factor(real_return, real_salary_growth, years);
    if compounding == Compounding::Monthly {
        contributions *= monthly_timing_factor(real_return);
    }
    balance * growth(real_return, f64::from(years)) + contributions
}

/// Fund value at retirement in real currency, assuming constant real salary.
pub fn accumulate_savings(
    profile: &EmployeeProfile,
    real_return: f64,
    compounding: Compounding,
) -> f64 {
    accumulate_with_growth(profile, real_return, 0.0, compounding)
}

/// Fund value at retirement when real salary grows at `real_salary_growth`.
pub fn accumulate_with_growth(
    profile: &EmployeeProfile,
    real_return: f64,
    real_salary_growth: f64,
    compounding: Compounding,
) -> f64 {
    accumulate(
        profile.balance.units(),
        profile.salary.units(),
        profile.contribution_rate,
        profile.years_to_retirement(),
        real_return,
        real_salary_growth,
        compounding,
    )
}

/// Projects with an explicit drawdown rate and real return band. Only requires
/// `drawdown >= 0`; the recommended band is enforced by [`DrawdownSchedule`].
pub fn project_with_drawdown(
    profile: &EmployeeProfile,
    real_return_lo: f64,
    real_return_hi: f64,
    real_salary_growth: f64,
    drawdown: f64,
    compounding: Compounding,
) -> IncomeProjection {
    let years = profile.years_to_retirement();
    let fund_lo = accumulate_with_growth(profile, real_return_lo, real_salary_growth, compounding);
    let fund_hi = accumulate_with_growth(profile, real_return_hi, real_salary_growth, compounding);
    let final_salary =
        profile.salary.units() * growth(real_salary_growth, f64::from(years.saturating_sub(1)));
    let income_lo = drawdown * fund_lo;
    let income_hi = drawdown * fund_hi;
    IncomeProjection {
        fund_lo,
        fund_hi,
        income_lo,
        income_hi,
        replacement_lo: income_lo / final_salary,
        replacement_hi: income_hi / final_salary,
        real_return_lo,
        real_return_hi,
        drawdown_rate: drawdown,
        final_salary,
        years,
    }
}

/// The calculator result for a profile under the given assumptions.
pub fn project_retirement_income(
    profile: &EmployeeProfile,
    assumptions: &Assumptions,
) -> Result<IncomeProjection, ValidationError> {
    validate_inputs(profile, assumptions)?;
    let (lo, hi) = assumptions.real_return_band();
    let drawdown = assumptions
        .drawdown
        .lookup(profile.gender, profile.retirement_age);
    Ok(project_with_drawdown(
        profile,
        lo,
        hi,
        assumptions.real_salary_growth(),
        drawdown,
        assumptions.compounding,
    ))
}

/// Validates both inputs together, with errors rooted at `profile.` and `assumptions.`.
pub fn validate_inputs(
    profile: &EmployeeProfile,
    assumptions: &Assumptions,
) -> Result<Vec<crate::FieldError>, ValidationError> {
    let mut c = Collector::default();
    let warnings = match profile.validate() {
        Ok(w) => w.into_iter().map(|w| w.nested("profile")).collect(),
        Err(e) => {
            c.extend("profile", Err(e));
            Vec::new()
        }
    };
    c.extend("assumptions", assumptions.validate());
    c.finish().map(|()| warnings)
}

fn rate_input_errors(p: f64, d: f64, r: f64, n: u32) -> Collector {
    let mut c = Collector::default();
    if c.finite(p, "p") {
        c.check(p > 0.0, "p", "goal replacement must be positive");
    }
    if c.finite(d, "d") {
        c.check(d > 0.0, "d", "drawdown rate must be positive");
    }
    if c.finite(r, "r") {
        c.check(r > -1.0, "r", "real return must exceed -1");
    }
    c.check(n >= 1, "n", "at least one year of saving is required");
    c
}

/// A zero drawdown on otherwise valid inputs gets its own error; any other
/// combination reports every bad field.
fn finish_rate_inputs(c: Collector, d: f64) -> Result<(), ProjectionError> {
    match c.finish() {
        Err(e) if d == 0.0 && e.field_errors.len() == 1 => Err(ProjectionError::ZeroDrawdown),
        other => other.map_err(Into::into),
    }
}

/// Contribution rate that funds replacement `p` at drawdown `d` after `n`
/// years at real return `r`, starting from nothing:
/// `c = p r / (d ((1 + r)^n - 1))`, or `p / (d n)` when `r = 0`.
///
/// The result may exceed 1; feasibility is the caller's call.
pub fn required_contribution_rate(p: f64, d: f64, r: f64, n: u32) -> Result<f64, ProjectionError> {
    finish_rate_inputs(rate_input_errors(p, d, r, n), d)?;
    Ok(p / (d * annuity_factor(r, n)))
}

/// Like [`required_contribution_rate`] but crediting an existing balance.
/// Returns 0 when the balance alone already funds the goal.
pub fn required_rate_with_balance(
    p: f64,
    d: f64,
    r: f64,
    n: u32,
    balance: Money,
    salary: Money,
) -> Result<f64, ProjectionError> {
    let mut c = rate_input_errors(p, d, r, n);
    c.check(salary.cents() > 0, "salary", "salary must be positive");
    c.check(balance.cents() >= 0, "balance", "balance must be non-negative");
    finish_rate_inputs(c, d)?;
    let salary = salary.units();
    let target = p * salary / d;
    let grown_balance = balance.units() * growth(r, f64::from(n));
    Ok(((target - grown_balance) / (salary * annuity_factor(r, n))).max(0.0))
}

/// Grid of required contribution rates by start age (rows) and retirement
/// age (columns). Cells where the start age is not below the retirement age
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub start_ages: Vec<u32>,
    pub retirement_ages: Vec<u32>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl RateTable {
    pub fn get(&self, start_age: u32, retirement_age: u32) -> Option<f64> {
        let i = self.start_ages.iter().position(|&a| a == start_age)?;
        let j = self.retirement_ages.iter().position(|&a| a == retirement_age)?;
        self.cells[i][j]
    }
}

pub fn generate_rate_table(
    start_ages: &[u32],
    retirement_ages: &[u32],
    p: f64,
    d: f64,
    r: f64,
) -> Result<RateTable, ProjectionError> {
    let cells = start_ages
        .iter()
        .map(|&start| {
            retirement_ages
                .iter()
                .map(|&retire| {
                    if start < retire {
                        required_contribution_rate(p, d, r, retire - start).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RateTable {
        start_ages: start_ages.to_vec(),
        retirement_ages: retirement_ages.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub baseline: IncomeProjection,
    pub adjusted: IncomeProjection,
}

/// Baseline projection next to one with a changed contribution rate and a
/// lump sum added to the balance.
pub fn whatif(
    profile: &EmployeeProfile,
    assumptions: &Assumptions,
    delta_c: f64,
    lump_sum: Money,
) -> Result<WhatIf, ValidationError> {
    let mut c = Collector::default();
    if c.finite(delta_c, "delta_c") {
        c.check(
            delta_c >= -profile.contribution_rate,
            "delta_c",
            "delta_c would make the contribution rate negative",
        );
    }
    c.check(lump_sum.cents() >= 0, "lump_sum", "lump_sum must be non-negative");
    c.finish()?;

    let baseline = project_retirement_income(profile, assumptions)?;
    let mut adjusted_profile = profile.clone();
    adjusted_profile.contribution_rate = (profile.contribution_rate + delta_c).max(0.0);
    adjusted_profile.balance = profile
        .balance
        .checked_add(lump_sum)
        .ok_or_else(|| ValidationError::single("lump_sum", "lump_sum is too large"))?;
    let adjusted = project_retirement_income(&adjusted_profile, assumptions)
        .map_err(|e| ValidationError {
            field_errors: e
                .field_errors
                .into_iter()
                .map(|mut f| {
                    f.path = f.path.replace("profile.contribution_rate", "delta_c");
                    f
                })
                .collect(),
        })?;
    Ok(WhatIf { baseline, adjusted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_profile() -> EmployeeProfile {
        EmployeeProfile {
            gender: Gender::Male,
            age: 30,
            retirement_age: 65,
            balance: Money::from_cents(7_000_000),
            salary: Money::from_cents(20_000_000),
            contribution_rate: 0.075,
        }
    }

    /// Year-by-year simulation, independent of the closed forms above.
    fn loop_fund(balance: f64, salary: f64, c: f64, r: f64, n: u32) -> f64 {
        let mut fund = balance;
        for _ in 0..n {
            fund = fund * (1.0 + r) + salary * c;
        }
        fund
    }

    #[test]
    fn real_return_examples() {
        assert_eq!(real_return(0.05, 0.05), 0.0);
        assert_relative_eq!(real_return(0.08, 0.05), 0.028_571_428_571_428_6, epsilon = 1e-15);
        assert_relative_eq!(real_return(0.10, 0.05), 0.047_619_047_619_047_6, epsilon = 1e-15);
    }

    #[test]
    fn nothing_saved_accumulates_nothing() {
        let mut p = reference_profile();
        p.balance = Money::ZERO;
        p.contribution_rate = 0.0;
        for r in [-0.02, 0.0, 0.05] {
            assert_eq!(accumulate_savings(&p, r, Compounding::Annual), 0.0);
            assert_eq!(accumulate_savings(&p, r, Compounding::Monthly), 0.0);
        }
    }

    #[test]
    fn fund_for_fifteen_percent_supports_three_quarter_replacement() {
        let p = EmployeeProfile {
            gender: Gender::Male,
            age: 25,
            retirement_age: 65,
            balance: Money::ZERO,
            salary: Money::from_cents(100),
            contribution_rate: 0.1552,
        };
        let fund = accumulate_savings(&p, 0.05, Compounding::Annual);
        assert!((0.04 * fund - 0.75).abs() < 1e-3);
        assert_relative_eq!(fund, loop_fund(0.0, 1.0, 0.1552, 0.05, 40), max_relative = 1e-12);
    }

    #[test]
    fn reference_profile_low_endpoint_fund() {
        let fund = accumulate_savings(&reference_profile(), 0.028571, Compounding::Annual);
        assert!((fund / 1_069_800.0 - 1.0).abs() < 0.005, "{fund}");
        let oracle = loop_fund(70_000.0, 200_000.0, 0.075, 0.028571, 35);
        assert_relative_eq!(fund, oracle, max_relative = 1e-12);
    }

    #[test]
    fn zero_return_uses_the_limit() {
        let p = reference_profile();
        let fund = accumulate_savings(&p, 0.0, Compounding::Annual);
        assert_eq!(fund, 70_000.0 + 200_000.0 * 0.075 * 35.0);
        let monthly = accumulate_savings(&p, 0.0, Compounding::Monthly);
        assert_relative_eq!(monthly, fund, max_relative = 1e-14);
        assert_eq!(required_contribution_rate(0.75, 0.04, 0.0, 40).unwrap(), 0.75 / (0.04 * 40.0));
    }

    #[test]
    fn growing_salary_matches_loop() {
        let p = reference_profile();
        let (r, g) = (0.03, 0.01);
        let mut fund = 70_000.0;
        let mut salary = 200_000.0;
        for _ in 0..35 {
            fund = fund * (1.0 + r) + salary * 0.075;
            salary *= 1.0 + g;
        }
        assert_relative_eq!(
            accumulate_with_growth(&p, r, g, Compounding::Annual),
            fund,
            max_relative = 1e-12
        );
        // r == g takes the limit branch
        let mut fund = 70_000.0;
        let mut salary = 200_000.0;
        for _ in 0..35 {
            fund = fund * 1.03 + salary * 0.075;
            salary *= 1.03;
        }
        assert_relative_eq!(
            accumulate_with_growth(&p, 0.03, 0.03, Compounding::Annual),
            fund,
            max_relative = 1e-12
        );
    }

    #[test]
    fn reference_profile_band() {
        let proj = project_retirement_income(&reference_profile(), &Assumptions::default()).unwrap();
        let shown = proj.display();
        assert_eq!((shown.replacement_pct_lo, shown.replacement_pct_hi), (26, 39));
        assert!(proj.fund_lo <= proj.fund_hi);
        assert_relative_eq!(proj.income_lo, proj.drawdown_rate * proj.fund_lo);
        assert_relative_eq!(proj.replacement_hi, proj.income_hi / 200_000.0);
    }

    #[test]
    fn zero_drawdown_means_zero_income() {
        let proj = project_with_drawdown(&reference_profile(), 0.02, 0.04, 0.0, 0.0, Compounding::Annual);
        assert_eq!((proj.income_lo, proj.income_hi), (0.0, 0.0));
    }

    #[test]
    fn degenerate_band() {
        let a = Assumptions {
            nominal_return_lo: 0.09,
            nominal_return_hi: 0.09,
            ..Assumptions::default()
        };
        let proj = project_retirement_income(&reference_profile(), &a).unwrap();
        assert_eq!(proj.fund_lo, proj.fund_hi);
    }

    #[test]
    fn required_rate_worked_values() {
        let c = required_contribution_rate(0.75, 0.04, 0.05, 40).unwrap();
        assert!((c - 0.1552).abs() < 1e-4, "{c}");
        let c = required_contribution_rate(0.75, 0.04, 0.05, 35).unwrap();
        assert!((c - 0.2075).abs() < 1e-4, "{c}");
        let c = required_contribution_rate(0.75, 0.04, 0.09, 40).unwrap();
        assert!((c - 0.055).abs() <= 5e-4, "{c}");
        assert_eq!(
            required_contribution_rate(0.75, 0.0, 0.05, 40),
            Err(ProjectionError::ZeroDrawdown)
        );
        assert!(matches!(
            required_contribution_rate(0.75, 0.04, 0.05, 0),
            Err(ProjectionError::Invalid(_))
        ));
    }

    #[test]
    fn balance_credit() {
        let plain = required_contribution_rate(0.75, 0.04, 0.05, 35).unwrap();
        let with_zero =
            required_rate_with_balance(0.75, 0.04, 0.05, 35, Money::ZERO, Money::from_cents(20_000_000))
                .unwrap();
        assert_relative_eq!(plain, with_zero, max_relative = 1e-14);
        let rich = required_rate_with_balance(
            0.75,
            0.04,
            0.05,
            35,
            Money::from_cents(100_000_000_000),
            Money::from_cents(20_000_000),
        )
        .unwrap();
        assert_eq!(rich, 0.0);
    }

    #[test]
    fn rate_table_cells() {
        let t = generate_rate_table(&[25, 30, 35, 40], &[55, 60, 65, 70, 75], 0.75, 0.04, 0.05).unwrap();
        assert!((t.get(40, 55).unwrap() - 0.869).abs() < 1e-3);
        assert!((t.get(25, 75).unwrap() - 0.090).abs() < 1e-3);
        assert!((t.get(30, 70).unwrap() - 0.155).abs() < 1e-3);
        assert_eq!(t.get(30, 70), t.get(25, 65));
        let t = generate_rate_table(&[60], &[55, 65], 0.75, 0.04, 0.05).unwrap();
        assert_eq!(t.cells[0][0], None);
        assert!(t.cells[0][1].is_some());
    }

    #[test]
    fn whatif_cases() {
        let a = Assumptions::default();
        let p = reference_profile();
        let same = whatif(&p, &a, 0.0, Money::ZERO).unwrap();
        assert_eq!(same.baseline, same.adjusted);

        let more = whatif(&p, &a, 0.075, Money::ZERO).unwrap();
        assert!(more.adjusted.replacement_lo > more.baseline.replacement_lo);
        assert!(more.adjusted.replacement_hi > more.baseline.replacement_hi);

        let lump = Money::from_cents(5_000_000);
        let w = whatif(&p, &a, 0.0, lump).unwrap();
        let n = f64::from(p.years_to_retirement());
        let (lo, hi) = a.real_return_band();
        assert_relative_eq!(
            w.adjusted.fund_lo - w.baseline.fund_lo,
            50_000.0 * (1.0 + lo).powf(n),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            w.adjusted.fund_hi - w.baseline.fund_hi,
            50_000.0 * (1.0 + hi).powf(n),
            max_relative = 1e-9
        );

        let err = whatif(&p, &a, -0.1, Money::from_cents(-1)).unwrap_err();
        let paths: Vec<_> = err.field_errors.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["delta_c", "lump_sum"]);
    }

    #[test]
    fn validation_reports_every_field() {
        let p = EmployeeProfile {
            gender: Gender::Female,
            age: 70,
            retirement_age: 65,
            balance: Money::from_cents(-1),
            salary: Money::ZERO,
            contribution_rate: 1.5,
        };
        let a = Assumptions {
            nominal_return_lo: 0.2,
            goal_replacement: 0.0,
            drawdown: DrawdownSchedule::flat(0.2),
            ..Assumptions::default()
        };
        let err = validate_inputs(&p, &a).unwrap_err();
        let paths: Vec<_> = err.field_errors.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(
            paths,
            [
                "profile.age",
                "profile.balance",
                "profile.salary",
                "profile.contribution_rate",
                "assumptions.nominal_return_lo",
                "assumptions.goal_replacement",
                "assumptions.drawdown.fallback",
            ]
        );
    }

    #[test]
    fn high_contribution_is_a_warning_only() {
        let mut p = reference_profile();
        p.contribution_rate = 0.30;
        let warnings = p.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].path, "contribution_rate");
    }

    #[test]
    fn schedule_lookup_falls_back() {
        let s = DrawdownSchedule {
            entries: vec![DrawdownEntry {
                gender: Gender::Female,
                band: RetirementAgeBand::From56To60,
                rate: 0.03,
            }],
            fallback: 0.05,
        };
        assert_eq!(s.lookup(Gender::Female, 58), 0.03);
        assert_eq!(s.lookup(Gender::Female, 65), 0.05);
        assert_eq!(s.lookup(Gender::Male, 58), 0.05);
    }

    #[test]
    fn money_json_is_in_units() {
        let m: Money = serde_json::from_str("70000.5").unwrap();
        assert_eq!(m.cents(), 7_000_050);
        assert_eq!(serde_json::to_string(&m).unwrap(), "70000.5");
        assert!(serde_json::from_str::<Money>("1e300").is_err());
    }
}
