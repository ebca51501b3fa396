//! Scenario files.
//!
//! ```text
//! # outage capacity comparison
//! schemes = df-msc-opt, ddf
//! M = 15
//! K = 3
//! Nr = 3
//! sigma2_sr = 30dB
//! snr_db_start = 0
//! snr_db_stop = 30
//! snr_db_step = 5
//! rate = 2, 4
//! trials = 100000
//! ```
//!
//! One `key = value` per line; `#` starts a comment. Numbers may carry a `dB`
//! suffix, which converts them to linear scale (keys already in dB, such as
//! `snr_db_start`, take the number as written). Lists are comma-separated.
//! Unknown or repeated keys are errors.

use std::collections::HashMap;
use std::path::PathBuf;

use coopnet_core::channel::DEFAULT_CODEWORD_LENGTH;
use coopnet_core::numerics::db_to_linear;
use coopnet_core::{Scheme, SystemParams};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub schemes: Vec<Scheme>,
    /// Base parameters; `rate` and `rho_s` hold the first grid values.
    pub params: SystemParams,
    pub snr_db_start: f64,
    pub snr_db_stop: f64,
    pub snr_db_step: f64,
    pub rates: Vec<f64>,
    pub trials: u64,
    pub master_seed: Option<u64>,
    pub target_pout: f64,
    pub rate_tolerance: f64,
    /// Rate increment for `trt` and `shift`.
    pub delta_r: f64,
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn snr_grid(&self) -> Vec<f64> {
        coopnet_core::engine::snr_grid(self.snr_db_start, self.snr_db_stop, self.snr_db_step)
    }
}

const KEYS: &[&str] = &[
    "schemes",
    "M",
    "K",
    "Nr",
    "N",
    "rate",
    "rho_s",
    "relay_powers",
    "sigma2_sr",
    "sigma2_d",
    "snr_db_start",
    "snr_db_stop",
    "snr_db_step",
    "trials",
    "master_seed",
    "target_pout",
    "rate_tolerance",
    "delta_r",
    "output",
];

struct Entry {
    line: usize,
    value: String,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: HashMap<&'static str, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("expected `key = value`, got {content:?}"),
        })?;
        let key = key.trim();
        let canonical = *KEYS
            .iter()
            .find(|k| **k == key || (key == "scheme" && **k == "schemes"))
            .ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("unknown key {key:?}"),
            })?;
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("missing value for {key}"),
            });
        }
        if let Some(prev) = entries.get(canonical) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("{canonical} already set on line {}", prev.line),
            });
        }
        entries.insert(
            canonical,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    build(&entries)
}

fn parse_number(text: &str, line: usize, linear: bool) -> Result<f64, ConfigError> {
    let t = text.trim();
    let (num, db) = match t.strip_suffix("dB").or_else(|| t.strip_suffix("db")) {
        Some(n) => (n.trim(), true),
        None => (t, false),
    };
    let v: f64 = num.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("not a number: {t:?}"),
    })?;
    if !v.is_finite() {
        return Err(ConfigError::Parse {
            line,
            msg: format!("not finite: {t:?}"),
        });
    }
    Ok(if db && linear { db_to_linear(v) } else { v })
}

fn parse_count<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T, ConfigError> {
    let t = e.value.replace('_', "");
    t.parse().map_err(|_| ConfigError::Parse {
        line: e.line,
        msg: format!("{key} must be a nonnegative integer, got {:?}", e.value),
    })
}

fn parse_list(e: &Entry, linear: bool) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(',')
        .map(|s| parse_number(s, e.line, linear))
        .collect()
}

fn build(entries: &HashMap<&'static str, Entry>) -> Result<ScenarioConfig, ConfigError> {
    let number = |key: &str, linear: bool, default: f64| -> Result<f64, ConfigError> {
        entries
            .get(key)
            .map_or(Ok(default), |e| parse_number(&e.value, e.line, linear))
    };
    let require = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| ConfigError::Invalid(format!("missing required key {key}")))
    };

    let m: usize = parse_count(require("M")?, "M")?;
    let k: usize = parse_count(require("K")?, "K")?;
    let nr: usize = parse_count(require("Nr")?, "Nr")?;
    let n: usize = entries
        .get("N")
        .map_or(Ok(DEFAULT_CODEWORD_LENGTH), |e| parse_count(e, "N"))?;
    if k > m {
        return Err(ConfigError::Invalid(format!(
            "K ≤ M violated: K = {k}, M = {m}"
        )));
    }

    let schemes = match entries.get("schemes") {
        Some(e) => e
            .value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<Scheme>()
                    .map_err(|err| ConfigError::Parse {
                        line: e.line,
                        msg: err.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![Scheme::DfMscOpt],
    };
    let rates = match entries.get("rate") {
        Some(e) => parse_list(e, false)?,
        None => vec![2.0],
    };
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(ConfigError::Invalid("rate must be positive".into()));
    }
    let relay_powers = entries
        .get("relay_powers")
        .map(|e| parse_list(e, true))
        .transpose()?;
    if let Some(p) = &relay_powers {
        if p.len() != m {
            return Err(ConfigError::Invalid(format!(
                "relay_powers needs M = {m} entries, got {}",
                p.len()
            )));
        }
    }

    let snr_db_start = number("snr_db_start", false, 0.0)?;
    let snr_db_stop = number("snr_db_stop", false, snr_db_start)?;
    let snr_db_step = number("snr_db_step", false, 1.0)?;
    if !(snr_db_step > 0.0) || snr_db_stop < snr_db_start {
        return Err(ConfigError::Invalid(
            "SNR grid needs snr_db_step > 0 and snr_db_stop ≥ snr_db_start".into(),
        ));
    }

    let params = SystemParams {
        m,
        k,
        nr,
        n,
        rate: rates[0],
        rho_s: number("rho_s", true, db_to_linear(snr_db_start))?,
        relay_powers,
        sigma2_sr: number("sigma2_sr", true, 1.0)?,
        sigma2_d: number("sigma2_d", true, 1.0)?,
    };
    params
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let trials: u64 = entries
        .get("trials")
        .map_or(Ok(100_000), |e| parse_count(e, "trials"))?;
    if trials == 0 {
        return Err(ConfigError::Invalid("trials must be positive".into()));
    }
    let target_pout = number("target_pout", false, 0.01)?;
    if !(target_pout > 0.0 && target_pout < 1.0) {
        return Err(ConfigError::Invalid("target_pout must be in (0, 1)".into()));
    }
    let rate_tolerance = number("rate_tolerance", false, 0.01)?;
    if !(rate_tolerance > 0.0) {
        return Err(ConfigError::Invalid(
            "rate_tolerance must be positive".into(),
        ));
    }
    let delta_r = number("delta_r", false, 2.0)?;
    if !(delta_r > 0.0) {
        return Err(ConfigError::Invalid("delta_r must be positive".into()));
    }

    Ok(ScenarioConfig {
        schemes,
        params,
        snr_db_start,
        snr_db_stop,
        snr_db_step,
        rates,
        trials,
        master_seed: entries
            .get("master_seed")
            .map(|e| parse_count(e, "master_seed"))
            .transpose()?,
        target_pout,
        rate_tolerance,
        delta_r,
        output: entries.get("output").map(|e| PathBuf::from(&e.value)),
    })
}
