use std::process::ExitCode;

use ontrack_core::experiment::ExperimentError;
use ontrack_core::forest::ForestError;
use ontrack_core::game::GameError;
use ontrack_core::io::RosterError;
use ontrack_core::projection::ProjectionError;
use ontrack_core::ValidationError;

/// Failure of a subcommand. Bad input exits 2, everything else 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Validation { message: String, hint: Option<String> },
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            hint: None,
        }
    }

    pub fn hint(self, hint: impl Into<String>) -> Self {
        match self {
            CliError::Validation { message, .. } => CliError::Validation {
                message,
                hint: Some(hint.into()),
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation { .. } => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }

    pub fn report(&self) {
        match self {
            CliError::Validation { message, hint } => {
                eprintln!("error: {message}");
                if let Some(h) = hint {
                    eprintln!("hint: {h}");
                }
            }
            CliError::Internal(e) => eprintln!("internal error: {e:#}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        let lines: Vec<String> = e.field_errors.iter().map(ToString::to_string).collect();
        CliError::invalid(lines.join("\n  "))
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::Invalid(v) => v.into(),
            other => CliError::invalid(other.to_string()).hint("pass a drawdown rate above zero with --d"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let hint = match &e {
            ExperimentError::Unassigned(_) => Some("run `ontrack randomize` on the roster first"),
            ExperimentError::MissingOutcome(_) => Some("run `ontrack simulate --roster` to draw outcomes"),
            _ => None,
        };
        let err = CliError::invalid(e.to_string());
        match hint {
            Some(h) => err.hint(h),
            None => err,
        }
    }
}

impl From<RosterError> for CliError {
    fn from(e: RosterError) -> Self {
        match e {
            RosterError::TooManyRowErrors { limit, errors } => {
                let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
                CliError::invalid(format!(
                    "roster has more than {limit} malformed rows:\n  {}",
                    lines.join("\n  ")
                ))
                .hint("fix the rows listed, or raise --max-row-errors to skip them")
            }
            RosterError::Schema(m) => CliError::invalid(m),
            RosterError::Csv(e) => CliError::invalid(e.to_string()),
            RosterError::Io(e) => CliError::invalid(e.to_string()),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::Experiment(e) => e.into(),
            other => CliError::invalid(other.to_string()),
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}
