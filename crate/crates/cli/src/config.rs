//! `--config` files: flat `key = value` lines merged under the command line.

use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

use crate::CliError;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`, found {raw:?}", k + 1))
        })?;
        out.push((key.trim().replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

/// Deepest subcommand and its matches.
fn leaf<'a>(mut cmd: &'a Command, mut m: &'a ArgMatches) -> (&'a Command, &'a ArgMatches) {
    while let Some((name, sub)) = m.subcommand() {
        cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
        m = sub;
    }
    (cmd, m)
}

/// Extra argv tokens for every config entry whose flag was not given on the
/// command line. Unknown keys are a usage error.
pub fn tokens(
    root: &Command,
    matches: &ArgMatches,
    entries: &[(String, String)],
) -> Result<Vec<String>, CliError> {
    let (cmd, m) = leaf(root, matches);
    let mut out = Vec::new();
    for (key, value) in entries {
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| {
                CliError::Usage(format!("config key {key:?} is not a flag of `{}`", cmd.get_name()))
            })?;
        if m.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            let on: bool = value
                .parse()
                .map_err(|_| CliError::Usage(format!("config key {key:?} expects true or false")))?;
            if on {
                out.push(format!("--{key}"));
            }
        } else {
            out.push(format!("--{key}"));
            out.extend(value.split_whitespace().map(String::from));
        }
    }
    Ok(out)
}
