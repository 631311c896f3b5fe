//! Retirement projection engine and experiment toolkit.
//!
//! * [`projection`]: accumulation, drawdown income, replacement rates and
//!   required contribution rates.
//! * [`experiment`]: stratified randomization, synthetic rosters, ITT / LATE
//!   regressions with robust errors, bootstrap mean differences and
//!   interaction-based heterogeneity.
//! * [`forest`]: honest causal forests for conditional treatment effects.
//! * [`game`]: the employer minimum-contribution game and its equilibrium.
//! * [`io`]: roster CSV ingestion and the scenario store.

pub mod experiment;
pub mod forest;
pub mod game;
pub mod io;
pub mod projection;
pub mod validation;

pub use validation::{FieldError, ValidationError};
