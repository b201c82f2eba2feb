//! Run configuration.
//!
//! A config file is TOML with one table per subsystem:
//!
//! ```toml
//! [arena]
//! n_food = 5
//!
//! [evolution]
//! strategy = "crossover"
//! mu_mod = 0.05
//!
//! [evolution.init]
//! weight_min = -0.5
//!
//! [experiment]
//! seed = 7
//! max_generations = 3000
//! ```
//!
//! Every key is optional and defaults to the reference parameter set. Keys
//! can be overridden from the environment with `EVOSPIKE_<SECTION>__<KEY>`
//! (nested tables joined by `__`, case-insensitive), e.g.
//! `EVOSPIKE_EVOLUTION__INIT__WEIGHT_MIN=-0.3`, or on the command line with
//! `--set section.key=value`. Precedence: file, then environment, then
//! `--set`, then dedicated flags such as `--seed`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Value;

use crate::analysis::AnalysisConfig;
use crate::arena::ArenaConfig;
use crate::evolution::EvolutionParams;
use crate::experiment::ExperimentSettings;
use crate::snn::SnnParams;

pub const ENV_PREFIX: &str = "EVOSPIKE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid override '{0}': expected section.key=value")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub arena: ArenaConfig,
    pub snn: SnnParams,
    pub evolution: EvolutionParams,
    pub experiment: ExperimentSettings,
    pub analysis: AnalysisConfig,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.arena.validate().map_err(|e| invalid(&e))?;
        self.snn.validate().map_err(|e| invalid(&e))?;
        self.evolution.validate().map_err(|e| invalid(&e))?;
        self.experiment.validate().map_err(|e| invalid(&e))?;
        self.analysis.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = text
            .parse::<toml::Table>()
            .map(Value::Table)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    /// Builds a config from a parsed TOML tree, reporting every unknown key.
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let reference = Value::try_from(Config::default())
            .expect("default config serializes");
        let mut unknown = Vec::new();
        collect_unknown(&value, &reference, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let config: Config = value
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Loads the file (or defaults), then applies environment and explicit
/// `section.key=value` overrides.
pub fn load(
    path: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    overrides: &[String],
) -> Result<Config, ConfigError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Value::Table(
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError::Parse(format!("{}: {e}", p.display())))?,
            )
        }
        None => Value::Table(toml::Table::new()),
    };
    for (key, raw) in env {
        if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
            let path: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
            set_path(&mut value, &path, parse_scalar(&raw));
        }
    }
    for ov in overrides {
        let (k, v) = ov
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(ov.clone()))?;
        let path: Vec<String> = k.trim().split('.').map(str::to_string).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(ConfigError::BadOverride(ov.clone()));
        }
        set_path(&mut value, &path, parse_scalar(v.trim()));
    }
    Config::from_value(value)
}

fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, path: &[String], v: Value) {
    let mut cur = root;
    for (i, seg) in path.iter().enumerate() {
        let table = match cur {
            Value::Table(t) => t,
            other => {
                *other = Value::Table(toml::Table::new());
                match other {
                    Value::Table(t) => t,
                    _ => unreachable!(),
                }
            }
        };
        if i + 1 == path.len() {
            table.insert(seg.clone(), v);
            return;
        }
        cur = table
            .entry(seg.clone())
            .or_insert_with(|| Value::Table(toml::Table::new()));
    }
}

fn collect_unknown(value: &Value, reference: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Table(t), Value::Table(r)) = (value, reference) else {
        return;
    };
    for (k, v) in t {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match r.get(k) {
            None => out.push(key),
            Some(rv) => collect_unknown(v, rv, &key, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Strategy;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = Config::default();
        assert_eq!((c.arena.width, c.arena.height), (500.0, 500.0));
        assert_eq!((c.arena.n_bots, c.arena.n_food), (10, 5));
        assert_eq!(c.arena.capture_dist_sq, 13.0);
        assert_eq!(c.arena.bot_area, 40.0);
        assert_eq!((c.arena.move_step, c.arena.turn_step), (1.0, 0.1));
        assert_eq!(c.arena.radial_bands, [30.0, 60.0, 100.0]);
        assert_eq!((c.snn.n_neurons, c.snn.v_th, c.snn.beta), (30, 0.4, 0.01));
        assert_eq!((c.evolution.mu_mod, c.evolution.mu_visual), (0.05, 0.008));
        assert_eq!(c.experiment.max_generations, 10_000);
        assert_eq!(c.experiment.window, 50);
        assert_eq!(
            (c.analysis.inflection_bin_width, c.analysis.convergence_bin_width),
            (150.0, 100.0)
        );
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = Config::from_toml_str("[arena]\nwidht = 3\n[bogus]\nx = 1\n").unwrap_err();
        match err {
            ConfigError::UnknownKeys(keys) => {
                assert_eq!(keys, vec!["arena.widht".to_string(), "bogus".to_string()])
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn overrides_apply_in_order() {
        let env = vec![
            ("EVOSPIKE_EVOLUTION__MU_MOD".to_string(), "0.03".to_string()),
            ("EVOSPIKE_EXPERIMENT__SEED".to_string(), "9".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = load(
            None,
            env,
            &[
                "experiment.seed=11".to_string(),
                "evolution.strategy=crossover".to_string(),
                "evolution.init.weight_min=-0.25".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(c.evolution.mu_mod, 0.03);
        assert_eq!(c.experiment.seed, 11);
        assert_eq!(c.evolution.strategy, Strategy::Crossover);
        assert_eq!(c.evolution.init.weight_min, -0.25);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(matches!(
            load(None, vec![], &["snn.beta=2.0".to_string()]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            load(None, vec![], &["nonsense".to_string()]),
            Err(ConfigError::BadOverride(_))
        ));
        assert!(matches!(
            load(None, vec![], &["arena.n_bots=\"ten\"".to_string()]),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            load(None, vec![], &["arena.nbots=3".to_string()]),
            Err(ConfigError::UnknownKeys(_))
        ));
    }
}
