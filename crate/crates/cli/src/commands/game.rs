use std::fmt::Write as _;

use ontrack_core::game::{linspace, spe, sweep, GameParams, Rational};
use serde::Serialize;

use super::{emit, write_output};
use crate::error::{CliError, CliResult};
use crate::GameCommand;

fn rational(flag: &str, text: &str) -> CliResult<Rational> {
    text.parse()
        .map_err(|_| CliError::invalid(format!("--{flag} {text:?} is not a number")).hint("use a decimal like 0.4 or a fraction like 1/3"))
}

#[derive(Serialize)]
struct SpeOutput {
    delta: String,
    y: String,
    regime: ontrack_core::game::Regime,
    q_range: (f64, f64),
    employer_value: f64,
    employee_strategy: (ontrack_core::game::MinimumChoice, ontrack_core::game::MinimumChoice),
}

pub fn run(cmd: GameCommand, json: bool) -> CliResult<()> {
    match cmd {
        GameCommand::Spe { delta, y } => {
            let params = GameParams::new(rational("delta", &delta)?, rational("y", &y)?)?;
            let eq = spe(&params)?;
            let out = SpeOutput {
                delta: params.delta.to_string(),
                y: params.y.to_string(),
                regime: eq.regime,
                q_range: eq.q_range,
                employer_value: eq.employer_value,
                employee_strategy: eq.employee_strategy,
            };
            emit(json, &out, |o| {
                format!(
                    "regime {} (q in [{}, {}]), employer value {}",
                    o.regime, o.q_range.0, o.q_range.1, o.employer_value
                )
            })
        }
        GameCommand::Sweep {
            delta_min,
            delta_max,
            y_min,
            y_max,
            steps,
            out,
        } => {
            if steps == 0 {
                return Err(CliError::invalid("--steps must be at least 1"));
            }
            let deltas = linspace(&rational("delta-min", &delta_min)?, &rational("delta-max", &delta_max)?, steps);
            let ys = linspace(&rational("y-min", &y_min)?, &rational("y-max", &y_max)?, steps);
            let grid = sweep(&deltas, &ys)?;
            if json && out.is_none() {
                return emit(true, &grid, |_| String::new());
            }
            let mut text = String::from("delta,y,regime,employer_value\n");
            for p in &grid {
                let _ = writeln!(text, "{},{},{},{}", p.delta, p.y, p.regime, p.employer_value);
            }
            write_output(out.as_deref(), &text)
        }
    }
}
