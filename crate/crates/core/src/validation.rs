use serde::{Deserialize, Serialize};
use std::fmt;

/// One offending input field, addressed by a dotted path such as `profile.age`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Re-root the path under `prefix` (`age` becomes `profile.age`).
    pub fn nested(mut self, prefix: &str) -> Self {
        if !prefix.is_empty() {
            self.path = format!("{prefix}.{}", self.path);
        }
        self
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every field that failed validation. Never empty when returned as an error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ValidationError {
    pub field_errors: Vec<FieldError>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid input")?;
        for (i, e) in self.field_errors.iter().enumerate() {
            f.write_str(if i == 0 { ": " } else { "; " })?;
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl ValidationError {
    pub fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field_errors: vec![FieldError::new(path, message)],
        }
    }

    pub fn nested(self, prefix: &str) -> Self {
        Self {
            field_errors: self
                .field_errors
                .into_iter()
                .map(|e| e.nested(prefix))
                .collect(),
        }
    }
}

/// Accumulates field errors so that a single validation pass reports all of them.
#[derive(Debug, Default)]
pub(crate) struct Collector {
    errors: Vec<FieldError>,
}

impl Collector {
    pub(crate) fn check(&mut self, ok: bool, path: &str, message: impl Into<String>) {
        if !ok {
            self.errors.push(FieldError::new(path, message));
        }
    }

    pub(crate) fn finite(&mut self, value: f64, path: &str) -> bool {
        let ok = value.is_finite();
        self.check(ok, path, "must be a finite number");
        ok
    }

    pub(crate) fn extend(&mut self, prefix: &str, result: Result<(), ValidationError>) {
        if let Err(e) = result {
            self.errors.extend(e.nested(prefix).field_errors);
        }
    }

    pub(crate) fn finish(self) -> Result<(), ValidationError> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationError {
                field_errors: self.errors,
            })
        }
    }
}
