mod experiment;
mod forest;
mod game;
mod projection;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{Cli, Command};

pub fn run(cli: Cli) -> CliResult<()> {
    let json = cli.json;
    match cli.command {
        Command::Project(args) => projection::project(&args, json),
        Command::RequiredRate(args) => projection::required_rate(&args, json),
        Command::Table(args) => projection::table(&args, json),
        Command::Whatif(args) => projection::whatif(&args, json),
        Command::Randomize(args) => experiment::randomize(&args, json),
        Command::Simulate(args) => experiment::simulate(&args, json),
        Command::Analyze(cmd) => experiment::analyze(cmd, json),
        Command::Forest(cmd) => forest::run(cmd, json),
        Command::Game(cmd) => game::run(cmd, json),
        Command::Serve(args) => serve(args.config.as_deref()),
    }
}

fn serve(config: Option<&Path>) -> CliResult<()> {
    let config = ontrack_service::ServiceConfig::load(config)
        .map_err(|e| CliError::invalid(format!("{e:#}")).hint("check the config file and ONTRACK_* variables"))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ontrack_service::serve(config))?;
    Ok(())
}

/// Prints `value` as pretty JSON, or the human rendering.
pub(crate) fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce(&T) -> String) -> CliResult<()> {
    let text = if json {
        serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?
    } else {
        human(value)
    };
    stdout(&format!("{}\n", text.trim_end()))
}

/// A closed pipe (e.g. `| head`) ends output quietly.
fn stdout(text: &str) -> CliResult<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Writes `text` to `out`, or stdout when absent.
pub(crate) fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display()))),
        None => stdout(text),
    }
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

/// Parses a JSON file, or TOML when the extension says so.
pub(crate) fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let parsed = if is_toml {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}
