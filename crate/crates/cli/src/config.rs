//! Flat `key = value` parameters: registry, file parsing and resolution
//! (defaults, then file, then flags).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Word(&'static [&'static str]),
    FloatList,
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub kind: Kind,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, kind: Kind, help: &'static str) -> Key {
    Key {
        name,
        default,
        kind,
        help,
    }
}

use Kind::{Float, FloatList, Int, Word};

pub const KEYS: &[Key] = &[
    key("mass", "1", Float, "particle mass"),
    key("hbar", "1", Float, "reduced Planck constant"),
    key("potential", "free", Word(&["free", "harmonic"]), "external potential"),
    key("omega", "1", Float, "harmonic angular frequency"),
    key("x_min", "-12", Float, "left edge of the spatial grid"),
    key("x_max", "12", Float, "right edge of the spatial grid"),
    key("nx", "401", Int, "spatial nodes"),
    key("t0", "0", Float, "initial time"),
    key("tf", "2", Float, "final time"),
    key("nt", "201", Int, "time slices"),
    key("sigma0", "1", Float, "initial Gaussian width"),
    key("sigma_dot0", "0", Float, "initial Gaussian width rate"),
    key("center", "0", Float, "Gaussian center"),
    key("sigma_f", "1.4142135623730951", Float, "final Gaussian width of the boundary problem"),
    key("method", "primal_dual", Word(&["primal_dual", "shooting", "bridge"]), "boundary value solver"),
    key("max_outer_iterations", "5000", Int, "solver iteration cap"),
    key("primal_step", "1", Float, "terminal projection relaxation"),
    key("dual_step", "1.5", Float, "initial phase relaxation"),
    key("continuity_tolerance", "1e-6", Float, "continuity residual RMS target"),
    key("stationarity_tolerance", "1e-2", Float, "guidance and QHJ residual RMS target"),
    key("terminal_tolerance", "1e-3", Float, "terminal L1 density mismatch target"),
    key("check_every", "25", Int, "iterations between certification checks"),
    key("seed", "0", Int, "seed of the initial phase perturbation"),
    key("init_perturbation", "0", Float, "initial phase perturbation amplitude (units of hbar)"),
    key("restart_perturbation", "0.05", Float, "perturbation of the restart solve (units of hbar)"),
    key("chebyshev_degree", "8", Int, "shooting phase degree"),
    key("phase_offset", "0", Float, "shooting gauge constant"),
    key("max_evaluations", "6000", Int, "shooting objective evaluation cap"),
    key("substeps", "1", Int, "Crank-Nicolson steps per time slice"),
    key("n_trajectories", "21", Int, "trajectories, started at equal-mass quantiles"),
    key("cost", "positive", Word(&["positive", "signed"]), "outcome cost functional"),
    key("outcome_centers", "-3,0,3", FloatList, "window centers of the caliber outcomes"),
    key("half_width", "0.75", Float, "outcome window half-width"),
    key("separation", "4", Float, "node demo source separation"),
    key("slit_sigma", "0.5", Float, "node demo source width"),
];

pub fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn valid_keys() -> String {
    KEYS.iter().map(|k| k.name).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub value: String,
    pub source: Source,
}

/// Checks that `value` parses as the kind of `key`.
fn check_value(key: &Key, value: &str) -> Result<(), String> {
    let ok = match key.kind {
        Float => value.parse::<f64>().is_ok(),
        Int => value.parse::<u64>().is_ok(),
        Word(words) => words.contains(&value),
        FloatList => value.split(',').all(|v| v.trim().parse::<f64>().is_ok()),
    };
    if ok {
        return Ok(());
    }
    let expected = match key.kind {
        Float => "a number".to_string(),
        Int => "a non-negative integer".to_string(),
        Word(words) => format!("one of {}", words.join(", ")),
        FloatList => "a comma-separated list of numbers".to_string(),
    };
    Err(format!("`{}` expects {expected}, got `{value}`", key.name))
}

/// Parses a config file. Blank lines and `#` comments are ignored.
pub fn parse_file(text: &str, path: &Path) -> Result<Vec<(&'static str, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), n + 1);
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::usage(format!("{at}: expected `key = value`, got `{line}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = lookup(k) else {
            return Err(CliError::usage(format!(
                "{at}: unknown key `{k}`; valid keys: {}",
                valid_keys()
            )));
        };
        check_value(key, v).map_err(|e| CliError::usage(format!("{at}: {e}")))?;
        out.push((key.name, v.to_string()));
    }
    Ok(out)
}

/// Resolved parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub entries: BTreeMap<&'static str, Entry>,
    #[serde(skip)]
    pub notices: Vec<String>,
}

impl Params {
    pub fn resolve(
        file: &[(&'static str, String)],
        flags: &[(&'static str, String)],
    ) -> Result<Self, CliError> {
        let mut entries: BTreeMap<&'static str, Entry> = KEYS
            .iter()
            .map(|k| {
                (
                    k.name,
                    Entry {
                        value: k.default.to_string(),
                        source: Source::Default,
                    },
                )
            })
            .collect();
        for (k, v) in file {
            entries.insert(
                k,
                Entry {
                    value: v.clone(),
                    source: Source::File,
                },
            );
        }
        let mut notices = Vec::new();
        for (k, v) in flags {
            let key = lookup(k).expect("flags come from the registry");
            check_value(key, v).map_err(|e| CliError::usage(format!("--{k}: {e}")))?;
            let previous = entries.get(k).expect("every key has a default");
            if previous.source == Source::File && previous.value != *v {
                notices.push(format!(
                    "--{k}={v} overrides `{k} = {}` from the config file",
                    previous.value
                ));
            }
            entries.insert(
                k,
                Entry {
                    value: v.clone(),
                    source: Source::Flag,
                },
            );
        }
        Ok(Self { entries, notices })
    }

    fn raw(&self, key: &str) -> &str {
        &self.entries.get(key).expect("registered key").value
    }

    pub fn source(&self, key: &str) -> Source {
        self.entries.get(key).expect("registered key").source
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated on resolution")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated on resolution")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on resolution")
    }

    pub fn word(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        self.raw(key)
            .split(',')
            .map(|v| v.trim().parse().expect("validated on resolution"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_as_their_kind() {
        for k in KEYS {
            assert!(check_value(k, k.default).is_ok(), "{}", k.name);
        }
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let p = Path::new("run.cfg");
        let e = parse_file("# c\nhbar = 0.5\nnx 3\n", p).unwrap_err();
        assert!(e.message.contains("run.cfg:3"), "{}", e.message);
        let e = parse_file("bogus = 1\n", p).unwrap_err();
        assert!(e.message.contains("unknown key `bogus`"));
        assert!(e.message.contains("hbar"));
        let e = parse_file("nx = 1.5\n", p).unwrap_err();
        assert!(e.message.contains("run.cfg:1"));
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse_file("hbar = 0.5\nmass = 2 # heavy\n", Path::new("f")).unwrap();
        let p = Params::resolve(&file, &[("hbar", "0.25".into())]).unwrap();
        assert_eq!(p.f64("hbar"), 0.25);
        assert_eq!(p.source("hbar"), Source::Flag);
        assert_eq!(p.f64("mass"), 2.0);
        assert_eq!(p.source("mass"), Source::File);
        assert_eq!(p.source("nx"), Source::Default);
        assert_eq!(p.notices.len(), 1);
    }
}
