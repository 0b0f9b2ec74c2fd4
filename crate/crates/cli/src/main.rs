//! `madelung-bvp`: presets, boundary value solves and the verification suite
//! from the command line.
//!
//! Exit status: 0 success, 1 usage or input error, 2 numerical failure,
//! 3 verification failure.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use madelung_bvp::Error;
use serde_json::json;

use crate::config::{Params, KEYS};
use crate::output::{OutputDir, OUT_ENV};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalDivergence { .. }
            | Error::TridiagonalFailure { .. }
            | Error::StepSize { .. }
            | Error::OutOfDomain { .. }
            | Error::DegenerateState
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Runner = fn(&Params, &mut OutputDir) -> Result<commands::Finished, CliError>;

const SUBCOMMANDS: &[(&str, &str, Runner)] = &[
    (
        "propagate",
        "Crank-Nicolson propagation of a Gaussian packet",
        commands::propagate,
    ),
    (
        "solve-bvp",
        "Two-time boundary value solve between Gaussian densities",
        commands::solve_bvp,
    ),
    (
        "gaussian-demo",
        "Closed-form spreading Gaussian: envelope, history, residuals, trajectories",
        commands::gaussian_demo,
    ),
    (
        "trajectories",
        "Flow lines of a solved boundary value history",
        commands::trajectories,
    ),
    (
        "caliber",
        "Outcome costs and weights for windows on the propagated density",
        commands::caliber,
    ),
    (
        "node-demo",
        "Two-source interference: cost of a node against an antinode",
        commands::node_demo,
    ),
    ("verify", "Run the invariant suite", commands::verify),
];

fn cli() -> Command {
    let mut cmd = Command::new("madelung-bvp")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Fisher-regularized hydrodynamic action: boundary value solves and checks")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .value_parser(clap::value_parser!(PathBuf))
                .help("flat `key = value` parameter file"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .global(true)
                .value_parser(clap::value_parser!(PathBuf))
                .help(format!("output directory (overrides {OUT_ENV})")),
        )
        .arg(
            Arg::new("quiet")
                .long("quiet")
                .short('q')
                .global(true)
                .action(ArgAction::SetTrue)
                .help("suppress the summary on stdout"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(key.name)
                .long(key.name)
                .value_name("VALUE")
                .global(true)
                .allow_negative_numbers(true)
                .help_heading("Parameters")
                .help(format!("{} [default: {}]", key.help, key.default)),
        );
    }
    for (name, about, _) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn read_config(path: Option<&Path>) -> Result<Vec<(&'static str, String)>, CliError> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    config::parse_file(&text, path)
}

fn run(m: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let runner = SUBCOMMANDS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|s| s.2)
        .expect("registered subcommand");
    let config_path = sub.get_one::<PathBuf>("config");
    let file = read_config(config_path.map(PathBuf::as_path))?;
    let flags: Vec<(&'static str, String)> = KEYS
        .iter()
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect();
    let params = Params::resolve(&file, &flags)?;
    for notice in &params.notices {
        eprintln!("notice: {notice}");
    }
    let env = std::env::var(OUT_ENV).ok();
    let root = OutputDir::resolve(
        sub.get_one::<PathBuf>("out").map(PathBuf::as_path),
        env.as_deref(),
        name,
    );
    let mut out = OutputDir::new(root);
    let finished = runner(&params, &mut out)?;
    let mut order = vec!["defaults".to_string()];
    if let Some(p) = config_path {
        order.push(format!("file:{}", p.display()));
    }
    if !flags.is_empty() {
        order.push("flags".to_string());
    }
    let header = json!({
        "tool": "madelung-bvp",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "resolution_order": order,
        "params": params.entries,
        "notices": params.notices,
        "grid": finished.grid,
        "seeds": finished.seeds,
    });
    let root = out.finish(header)?;
    if !sub.get_flag("quiet") {
        for line in &finished.summary {
            println!("{line}");
        }
        println!("outputs: {}", root.display());
    }
    match finished.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main_with(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn main() -> ExitCode {
    main_with(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn error_codes() {
        let grid = Error::InvalidGrid {
            field: "nt",
            reason: "x".into(),
        };
        assert_eq!(CliError::from(grid).code, 1);
        assert_eq!(CliError::from(Error::NumericalDivergence { iteration: 3 }).code, 2);
    }
}
