//! Employer–employee game over the minimum contribution rate.
//!
//! The employer either imposes a high minimum (both players get 1) or passes
//! the choice to the employee. Nature then draws a yolo employee with
//! probability `y`, a careful one otherwise. Both types prefer the low
//! minimum, so the employer earns 2 against a careful employee and `-delta`
//! against a yolo one. The employer imposes the minimum iff `delta + 2 > 1/y`.
//!
//! Classification is done in exact rational arithmetic. Decimal inputs such
//! as `0.4` are read as the decimal they denote (2/5), not as the nearest
//! binary float, so knife-edge cases like `delta = 0, y = 0.5` are found
//! exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("employee payoffs must rank low above high for both types ({0})")]
    InvalidPayoffs(String),
    #[error("{field} must be {expected}")]
    InvalidParam {
        field: &'static str,
        expected: &'static str,
    },
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
}

/// An exact rational parameter. Parses `"0.4"`, `"-3"`, `"1e-2"` and `"1/3"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Reads a float as the shortest decimal that round-trips to it.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        format!("{value:e}").parse().ok()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl FromStr for Rational {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || GameError::Parse(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Rational(BigRational::new(n, d)));
        }
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (s, 0),
        };
        let (negative, mantissa) = match mantissa.as_bytes().first() {
            Some(b'-') => (true, &mantissa[1..]),
            Some(b'+') => (false, &mantissa[1..]),
            _ => (false, mantissa),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits_ok = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if int_part.is_empty() && frac_part.is_empty()
            || !digits_ok(int_part)
            || !digits_ok(frac_part)
            || exponent.unsigned_abs() > 4000
        {
            return Err(err());
        }
        let digits: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| err())?;
        let scale = exponent - frac_part.len() as i32;
        let ten = BigInt::from(10);
        let mut value = BigRational::from_integer(digits);
        if scale >= 0 {
            value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
        } else {
            value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
        }
        Ok(Rational(if negative { -value } else { value }))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Rational::from_f64(x)
                .ok_or_else(|| serde::de::Error::custom("expected a finite number")),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmployeeType {
    Careful,
    Yolo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinimumChoice {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmployerAction {
    High,
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypePayoffs {
    pub low: f64,
    pub high: f64,
}

/// Employee payoffs after the employer passes. Only the ordering
/// `low > high` matters for the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmployeePayoffs {
    pub careful: TypePayoffs,
    pub yolo: TypePayoffs,
}

impl Default for EmployeePayoffs {
    fn default() -> Self {
        Self {
            careful: TypePayoffs { low: 2.0, high: 1.0 },
            yolo: TypePayoffs { low: 2.0, high: 0.0 },
        }
    }
}

impl EmployeePayoffs {
    pub fn of(&self, kind: EmployeeType) -> TypePayoffs {
        match kind {
            EmployeeType::Careful => self.careful,
            EmployeeType::Yolo => self.yolo,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        for kind in [EmployeeType::Careful, EmployeeType::Yolo] {
            let p = self.of(kind);
            if !(p.low > p.high) {
                return Err(GameError::InvalidPayoffs(format!(
                    "{kind:?}: low {} vs high {}",
                    p.low, p.high
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Reputation damage from a yolo employee under a low minimum.
    pub delta: Rational,
    /// Probability the employee is the yolo type.
    pub y: Rational,
    #[serde(default)]
    pub employee_payoffs: EmployeePayoffs,
}

impl GameParams {
    pub fn new(delta: Rational, y: Rational) -> Result<Self, GameError> {
        let params = Self {
            delta,
            y,
            employee_payoffs: EmployeePayoffs::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn from_f64(delta: f64, y: f64) -> Result<Self, GameError> {
        let delta = Rational::from_f64(delta).ok_or(GameError::InvalidParam {
            field: "delta",
            expected: "a finite number",
        })?;
        let y = Rational::from_f64(y).ok_or(GameError::InvalidParam {
            field: "y",
            expected: "a finite number",
        })?;
        Self::new(delta, y)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.delta.0.is_negative() {
            return Err(GameError::InvalidParam {
                field: "delta",
                expected: "non-negative",
            });
        }
        if self.y.0.is_negative() || self.y.0 > BigRational::one() {
            return Err(GameError::InvalidParam {
                field: "y",
                expected: "a probability in [0, 1]",
            });
        }
        self.employee_payoffs.validate()
    }
}

fn exact_payoff(action: EmployerAction, params: &GameParams) -> BigRational {
    match action {
        EmployerAction::High => BigRational::one(),
        EmployerAction::Pass => {
            let y = &params.y.0;
            let two = BigRational::from_integer(BigInt::from(2));
            y * -&params.delta.0 + (BigRational::one() - y) * two
        }
    }
}

/// Employer's expected payoff: 1 for high, `y(-delta) + (1-y)2` for pass.
pub fn employer_expected_payoff(action: EmployerAction, params: &GameParams) -> f64 {
    exact_payoff(action, params).to_f64().unwrap_or(f64::NAN)
}

/// Low is dominant for both types whenever the payoff ordering holds.
pub fn employee_best_response(
    kind: EmployeeType,
    payoffs: &EmployeePayoffs,
) -> Result<MinimumChoice, GameError> {
    payoffs.validate()?;
    let p = payoffs.of(kind);
    Ok(if p.low > p.high {
        MinimumChoice::Low
    } else {
        MinimumChoice::High
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    High,
    Pass,
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::High => "high",
            Regime::Pass => "pass",
            Regime::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EmployerStrategy {
    High,
    Pass,
    /// Any probability `q` of high within the closed interval.
    Mixed { q_lo: f64, q_hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub regime: Regime,
    pub employer_strategy: EmployerStrategy,
    /// Strategy of the (careful, yolo) employee.
    pub employee_strategy: (MinimumChoice, MinimumChoice),
    /// Range of `q`, the probability the employer plays high.
    pub q_range: (f64, f64),
    pub employer_value: f64,
}

/// Subgame-perfect equilibrium. `y = 0` is pass (the `1/y -> inf` limit).
pub fn spe(params: &GameParams) -> Result<Equilibrium, GameError> {
    params.validate()?;
    let careful = employee_best_response(EmployeeType::Careful, &params.employee_payoffs)?;
    let yolo = employee_best_response(EmployeeType::Yolo, &params.employee_payoffs)?;
    // delta + 2 > 1/y  <=>  y (delta + 2) > 1 for y > 0, and y = 0 falls on the pass side.
    let two = BigRational::from_integer(BigInt::from(2));
    let lhs = &params.y.0 * (&params.delta.0 + two);
    let (regime, employer_strategy, q_range) = match lhs.cmp(&BigRational::one()) {
        std::cmp::Ordering::Greater => (Regime::High, EmployerStrategy::High, (1.0, 1.0)),
        std::cmp::Ordering::Less => (Regime::Pass, EmployerStrategy::Pass, (0.0, 0.0)),
        std::cmp::Ordering::Equal => (
            Regime::Mixed,
            EmployerStrategy::Mixed { q_lo: 0.0, q_hi: 1.0 },
            (0.0, 1.0),
        ),
    };
    let high = exact_payoff(EmployerAction::High, params);
    let pass = exact_payoff(EmployerAction::Pass, params);
    let value = if high > pass { high } else { pass };
    Ok(Equilibrium {
        regime,
        employer_strategy,
        employee_strategy: (careful, yolo),
        q_range,
        employer_value: value.to_f64().unwrap_or(f64::NAN),
    })
}

/// Reputation damage above which the employer imposes the minimum, `1/y - 2`.
/// `None` for `y = 0` (never).
pub fn delta_threshold(y: &Rational) -> Option<Rational> {
    if y.0.is_zero() {
        None
    } else {
        let two = BigRational::from_integer(BigInt::from(2));
        Some(Rational(y.0.recip() - two))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub y: f64,
    pub regime: Regime,
    pub employer_value: f64,
}

/// Evaluates the equilibrium over the grid `deltas x ys`, row-major in delta.
pub fn sweep(deltas: &[Rational], ys: &[Rational]) -> Result<Vec<SweepPoint>, GameError> {
    let mut out = Vec::with_capacity(deltas.len() * ys.len());
    for delta in deltas {
        for y in ys {
            let params = GameParams::new(delta.clone(), y.clone())?;
            let eq = spe(&params)?;
            out.push(SweepPoint {
                delta: delta.to_f64(),
                y: y.to_f64(),
                regime: eq.regime,
                employer_value: eq.employer_value,
            });
        }
    }
    Ok(out)
}

/// `steps + 1` evenly spaced exact values from `lo` to `hi`.
pub fn linspace(lo: &Rational, hi: &Rational, steps: u32) -> Vec<Rational> {
    if steps == 0 {
        return vec![lo.clone()];
    }
    let width = (&hi.0 - &lo.0) / BigRational::from_integer(BigInt::from(steps));
    (0..=steps)
        .map(|i| Rational(&lo.0 + &width * BigRational::from_integer(BigInt::from(i))))
        .collect()
}
