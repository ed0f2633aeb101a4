//! Sectioned key=value run configuration.
//!
//! The format is deliberately small: `[section]` headers, one `key = value`
//! per line, `#`/`;` comment lines. Unknown sections or keys are rejected,
//! every required key must be present, and ranges are validated on load so
//! the simulation core only ever sees well-formed input.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use relay_optim::linalg::CMat;
use relay_optim::objectives::Objective;
use relay_optim::sim::SimConfig;

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub output: PathBuf,
    pub threads: usize,
    pub verbosity: u8,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["k_hops", "n_streams", "n_antennas", "snr_db"]),
    ("error_model", &["alpha", "beta", "sigma_e_sq"]),
    ("objective", &["kind", "w_diag", "v"]),
    ("sim", &["trials", "symbols_per_stream", "seed", "threads"]),
    ("output", &["path", "verbosity"]),
];

fn known_keys(section: &str) -> Option<&'static [&'static str]> {
    SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k)
}

struct Raw {
    entries: BTreeMap<(String, String), String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw, String> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {}: malformed section header", lineno + 1))?
                    .trim()
                    .to_string();
                if known_keys(&name).is_none() {
                    return Err(format!("line {}: unknown section [{name}]", lineno + 1));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = section
                .clone()
                .ok_or_else(|| format!("line {}: key `{key}` before any [section]", lineno + 1))?;
            if !known_keys(&section).unwrap().contains(&key.as_str()) {
                return Err(format!("unknown key `{key}` in [{section}]"));
            }
            if entries.insert((section.clone(), key.clone()), value).is_some() {
                return Err(format!("duplicate key `{key}` in [{section}]"));
            }
        }
        Ok(Raw { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<String, String> {
        self.take(section, key)
            .ok_or_else(|| format!("missing key `{key}` in [{section}]"))
    }
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("key `{key}`: cannot parse `{value}` ({e})"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|tok| parse_scalar::<f64>(key, tok.trim()))
        .collect()
}

/// Loads and validates a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
    let mut raw = Raw::parse(&text)?;

    let k_hops: usize = parse_scalar("k_hops", &raw.require("system", "k_hops")?)?;
    let n_streams: usize = parse_scalar("n_streams", &raw.require("system", "n_streams")?)?;
    let n_antennas: usize = parse_scalar("n_antennas", &raw.require("system", "n_antennas")?)?;
    let snr = parse_list("snr_db", &raw.require("system", "snr_db")?)?;
    let snr_db = match snr.len() {
        1 => vec![snr[0]; k_hops],
        n if n == k_hops => snr,
        n => {
            return Err(format!(
                "key `snr_db`: expected 1 or {k_hops} comma-separated values, got {n}"
            ))
        }
    };

    let alpha: f64 = parse_scalar("alpha", &raw.require("error_model", "alpha")?)?;
    let beta: f64 = parse_scalar("beta", &raw.require("error_model", "beta")?)?;
    let sigma_e_sq: f64 = parse_scalar("sigma_e_sq", &raw.require("error_model", "sigma_e_sq")?)?;

    let kind = raw.require("objective", "kind")?;
    let w_diag = raw.take("objective", "w_diag");
    let v = raw.take("objective", "v");
    let objective = match kind.as_str() {
        "weighted_mse" => {
            let w_diag =
                w_diag.ok_or("missing key `w_diag` in [objective] (required for weighted_mse)")?;
            if v.is_some() {
                return Err("key `v` is only valid for kind = weighted_sum_rate".into());
            }
            let diag = parse_list("w_diag", &w_diag)?;
            if diag.len() != n_streams {
                return Err(format!(
                    "key `w_diag`: expected {n_streams} entries, got {}",
                    diag.len()
                ));
            }
            let w = CMat::from_fn(n_streams, n_streams, |i, j| {
                num_complex::Complex64::new(if i == j { diag[i] } else { 0.0 }, 0.0)
            });
            Objective::weighted_mse(w).map_err(|e| format!("key `w_diag`: {e}"))?
        }
        "capacity" | "max_mse" => {
            if w_diag.is_some() {
                return Err("key `w_diag` is only valid for kind = weighted_mse".into());
            }
            if v.is_some() {
                return Err("key `v` is only valid for kind = weighted_sum_rate".into());
            }
            if kind == "capacity" {
                Objective::Capacity
            } else {
                Objective::MaxMse
            }
        }
        "weighted_sum_rate" => {
            if w_diag.is_some() {
                return Err("key `w_diag` is only valid for kind = weighted_mse".into());
            }
            let v = v.ok_or("missing key `v` in [objective] (required for weighted_sum_rate)")?;
            let weights = parse_list("v", &v)?;
            Objective::weighted_sum_rate(weights).map_err(|e| format!("key `v`: {e}"))?
        }
        other => {
            return Err(format!(
                "key `kind`: unknown objective `{other}` (expected weighted_mse, capacity, max_mse or weighted_sum_rate)"
            ))
        }
    };

    let trials: usize = parse_scalar("trials", &raw.require("sim", "trials")?)?;
    let symbols_per_stream: usize =
        parse_scalar("symbols_per_stream", &raw.require("sim", "symbols_per_stream")?)?;
    let seed: u64 = parse_scalar("seed", &raw.require("sim", "seed")?)?;
    let threads: usize = parse_scalar("threads", &raw.require("sim", "threads")?)?;

    let output = PathBuf::from(raw.require("output", "path")?);
    let verbosity: u8 = parse_scalar("verbosity", &raw.require("output", "verbosity")?)?;
    if verbosity > 2 {
        return Err(format!("key `verbosity`: expected 0, 1 or 2, got {verbosity}"));
    }

    debug_assert!(raw.entries.is_empty(), "all known keys consumed");

    let sim = SimConfig {
        k_hops,
        n_streams,
        n_antennas,
        alpha,
        beta,
        sigma_e_sq,
        snr_db,
        trials,
        symbols_per_stream,
        seed,
        objective,
    };
    sim.validate().map_err(|e| e.to_string())?;
    Ok(RunConfig { sim, output, threads, verbosity })
}
