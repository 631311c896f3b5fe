//! Roster CSV ingestion and the scenario store.

pub mod roster;
pub mod store;

pub use roster::{
    clean, load_roster, parse_roster_str, read_roster, roster_to_csv, save_roster, write_roster,
    CleaningReport, FlooredRow, LoadOptions, RosterError, RowError, ROSTER_HEADER,
};
pub use store::{parse_scenario_line, Scenario, ScenarioStore, ScenarioSummary, StoreError, SCENARIO_VERSION};
