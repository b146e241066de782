//! Flag and file merging. Flags build a base table; keys present in a
//! `--config` file replace it, then the result is deserialised.

use std::fs;
use std::path::Path;

use backbone::adversary::StrategySpec;
use backbone::harness::{BoundsQuery, ExperimentConfig};
use backbone::params::ProtocolParams;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::RunArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Harness(#[from] backbone::harness::HarnessError),
    #[error(transparent)]
    Bounds(#[from] backbone::bounds::BoundsError),
    #[error(transparent)]
    Sim(#[from] backbone::sim::SimError),
    #[error(transparent)]
    Prism(#[from] backbone::prism::PrismError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Bounds(_) => 2,
            Self::Harness(backbone::harness::HarnessError::ConfigInvalid(_)) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BoundsFlags {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta_net: Option<f64>,
    pub delta_typ: Option<f64>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    pub k: Option<f64>,
    pub interval: Option<f64>,
}

fn to_table<T: Serialize>(value: &T) -> Table {
    Table::try_from(value).expect("config types serialise to a table")
}

fn set<T: Into<Value>>(table: &mut Table, key: &str, value: Option<T>) {
    if let Some(v) = value {
        table.insert(key.to_owned(), v.into());
    }
}

/// Top-level keys of `top` replace those of `base` wholesale, so a
/// `[strategy]` table in a file never inherits flag parameters.
fn merge(base: &mut Table, top: Table) {
    base.extend(top);
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<Table>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn finish<T: DeserializeOwned>(mut base: Table, config: Option<&Path>) -> Result<T, CliError> {
    if let Some(path) = config {
        merge(&mut base, read_table(path)?);
    }
    base.try_into().map_err(|e: toml::de::Error| CliError::Usage(e.message().to_owned()))
}

pub fn bounds_query(flags: &BoundsFlags, config: Option<&Path>) -> Result<BoundsQuery, CliError> {
    let mut t = to_table(&BoundsQuery::default());
    set(&mut t, "alpha", flags.alpha);
    set(&mut t, "beta", flags.beta);
    set(&mut t, "delta_net", flags.delta_net);
    set(&mut t, "delta_typ", flags.delta_typ);
    set(&mut t, "m", flags.m.map(|m| m as i64));
    set(&mut t, "eps", flags.eps);
    set(&mut t, "k", flags.k);
    set(&mut t, "interval", flags.interval);
    finish(t, config)
}

/// `key=value`, the value read as JSON when it parses and as a string
/// otherwise.
fn strategy_param(raw: &str) -> Result<(String, serde_json::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--strategy-param expects KEY=VALUE, got {raw:?}")))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_owned()));
    Ok((key.to_owned(), value))
}

/// Experiment configuration from flags, overlaid by `--config`. The seed
/// must come from one of them when `require_seed` is set.
pub fn experiment(run: &RunArgs, trials: Option<u64>, require_seed: bool) -> Result<ExperimentConfig, CliError> {
    let defaults = ProtocolParams::default();
    let mut base = ExperimentConfig { horizon: defaults.horizon, ..ExperimentConfig::default() };
    if let Some(name) = &run.strategy {
        base.strategy = StrategySpec::named(name);
    }
    for raw in &run.strategy_params {
        let (k, v) = strategy_param(raw)?;
        base.strategy.params.insert(k, v);
    }
    let mut t = to_table(&base);
    t.remove("seed");
    let p = &run.params;
    set(&mut t, "alpha", p.alpha);
    set(&mut t, "beta", p.beta);
    set(&mut t, "delta_net", p.delta_net);
    set(&mut t, "delta_typ", p.delta_typ);
    set(&mut t, "m", p.m.map(|m| m as i64));
    set(&mut t, "horizon", p.horizon);
    set(&mut t, "seed", run.seed.map(|s| s as i64));
    set(&mut t, "trials", trials.map(|n| n as i64));
    set(&mut t, "honest_tie_break", run.tie_break.clone());
    if let Some(path) = &run.config {
        merge(&mut t, read_table(path)?);
    }
    if !t.contains_key("seed") {
        if require_seed {
            return Err(CliError::Usage("--seed is required (or set `seed` in the config file)".into()));
        }
        t.insert("seed".into(), Value::Integer(0));
    }
    let config: ExperimentConfig = finish(t, None)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_params_parse_as_json_or_string() {
        assert_eq!(strategy_param("k_confirm=3").unwrap(), ("k_confirm".into(), serde_json::json!(3)));
        assert_eq!(strategy_param("steer=true").unwrap().1, serde_json::json!(true));
        assert_eq!(strategy_param("x=abc").unwrap().1, serde_json::json!("abc"));
        assert!(strategy_param("novalue").is_err());
    }

    #[test]
    fn file_keys_replace_whole_values() {
        let mut base: Table = "a = 1\nb = 2\n[s]\nname = 'null'\nx = 2\n".parse().unwrap();
        merge(&mut base, "a = 5\n[s]\nname = 'private_chain'\n".parse().unwrap());
        assert_eq!(base["a"].as_integer(), Some(5));
        assert_eq!(base["b"].as_integer(), Some(2));
        assert_eq!(base["s"]["name"].as_str(), Some("private_chain"));
        assert!(base["s"].get("x").is_none());
    }

    #[test]
    fn missing_seed_is_a_usage_error() {
        let e = experiment(&RunArgs::default(), None, true).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let c = experiment(&RunArgs { seed: Some(9), ..Default::default() }, Some(3), true).unwrap();
        assert_eq!((c.seed, c.trials, c.horizon), (9, 3, 1000.0));
    }
}
