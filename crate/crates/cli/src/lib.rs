//! The `windcond` command-line tool as a library, so the pipeline can be
//! driven from tests without spawning a process.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod synth;

use args::{Cli, Command};
use clap::CommandFactory;
use error::CliError;
use serde_json::Value;

/// JSON Schemas for every JSON output, keyed by file name.
pub const SCHEMAS: [(&str, &str); 8] = [
    ("mixture.json", include_str!("../schemas/mixture.schema.json")),
    ("speed_model.json", include_str!("../schemas/speed_model.schema.json")),
    ("band.json", include_str!("../schemas/band.schema.json")),
    ("iv.json", include_str!("../schemas/iv.schema.json")),
    ("pcc.json", include_str!("../schemas/pcc.schema.json")),
    ("summary.json", include_str!("../schemas/summary.schema.json")),
    ("manifest", include_str!("../schemas/manifest.schema.json")),
    ("tables", include_str!("../schemas/tables.schema.json")),
];

/// Runs one subcommand and returns a short JSON description of what was written.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    match &cli.command {
        Command::FitDirection(a) => commands::fit_direction(a),
        Command::FitSpeed(a) => commands::fit_speed(a),
        Command::Bootstrap(a) => commands::bootstrap(a),
        Command::Iv(a) => commands::iv(a),
        Command::Pcc(a) => commands::pcc(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Synth(a) => commands::synth(a),
        Command::Manpage => {
            let mut buf = Vec::new();
            clap_mangen::Man::new(Cli::command())
                .render(&mut buf)
                .map_err(|e| CliError::Data(format!("rendering the manual page: {e}")))?;
            Ok(Value::String(String::from_utf8(buf).expect("roff is UTF-8")))
        }
    }
}
