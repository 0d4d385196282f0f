//! Command-line front end for `lowrisk`.

pub mod commands;
pub mod config;

use std::ffi::OsString;

use clap::{Arg, ArgMatches};

use crate::commands::CliError;
use crate::config::{parse_config, parse_config_text, Command, ConfigError, RunConfig};

/// The clap command tree, built from the key table so flags and
/// configuration keys never drift apart.
pub fn cli() -> clap::Command {
    let mut root = clap::Command::new("lowrisk")
        .about("Calibrated low-risk screening on right-censored survival data")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name()).about(cmd.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value configuration file; flags override it"),
        );
        for key in cmd.keys() {
            let help = match key.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", key.help),
                Some(_) => key.help.to_string(),
                None => format!("{} [required]", key.help),
            };
            sub = sub.arg(Arg::new(key.name).long(key.name.replace('_', "-")).value_name("VALUE").help(help));
        }
        root = root.subcommand(sub);
    }
    root
}

fn resolve(cmd: Command, m: &ArgMatches) -> Result<RunConfig, ConfigError> {
    let file_entries = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                key: "config".into(),
                reason: format!("cannot read '{path}': {e}"),
            })?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = cmd
        .keys()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    parse_config(cmd, &file_entries, &flags)
}

/// Parses arguments and resolves the configuration of the chosen command.
pub fn parse_args<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = cli().try_get_matches_from(args)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd = Command::from_name(name).expect("registered subcommand");
    resolve(cmd, sub).map_err(|e| cli().error(clap::error::ErrorKind::ValueValidation, e.to_string()))
}

/// Runs a resolved configuration on a pool of `workers` threads.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.usize("workers"))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    pool.install(|| commands::run(cfg))
}

/// Full entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
