//! Run configuration: a flat `key = value` file with `#` comments, overlaid by
//! command-line values.
//!
//! ```text
//! data = readings.csv
//! houses = 2, 13, 14
//! start = 2010-07-01
//! end = 2011-06-30
//! strategies = A, B, C, SELF
//! out = results
//! ```
//!
//! Relative paths in a file resolve against the file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::DEFAULT_STEPS_PER_DAY;
use crate::model::{
    StrategyKind, StrategySpec, UpDownForm, WeightSource, DEFAULT_MIN_DOWN, DEFAULT_MIN_UP,
    DEFAULT_WEIGHT_SCALE,
};
use crate::solver::{Engine, SolveLimits};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: String,
    },
}

/// Every setting as an optional value, so a file and flags can be layered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigLayer {
    pub data: Option<PathBuf>,
    pub houses: Option<String>,
    pub start: Option<String>,
    pub end: Option<String>,
    pub strategies: Option<String>,
    pub min_up: Option<String>,
    pub min_down: Option<String>,
    pub weight_scale: Option<String>,
    pub literal_updown_signs: Option<String>,
    pub steps_per_day: Option<String>,
    pub max_nodes: Option<String>,
    pub max_seconds: Option<String>,
    pub engine: Option<String>,
    pub oracle_check: Option<String>,
    pub jobs: Option<String>,
    pub out: Option<PathBuf>,
}

impl ConfigLayer {
    /// Values from `top` win over values from `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            data: top.data.or(self.data),
            houses: top.houses.or(self.houses),
            start: top.start.or(self.start),
            end: top.end.or(self.end),
            strategies: top.strategies.or(self.strategies),
            min_up: top.min_up.or(self.min_up),
            min_down: top.min_down.or(self.min_down),
            weight_scale: top.weight_scale.or(self.weight_scale),
            literal_updown_signs: top.literal_updown_signs.or(self.literal_updown_signs),
            steps_per_day: top.steps_per_day.or(self.steps_per_day),
            max_nodes: top.max_nodes.or(self.max_nodes),
            max_seconds: top.max_seconds.or(self.max_seconds),
            engine: top.engine.or(self.engine),
            oracle_check: top.oracle_check.or(self.oracle_check),
            jobs: top.jobs.or(self.jobs),
            out: top.out.or(self.out),
        }
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut layer = ConfigLayer::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut layer.data, &mut layer.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(layer)
    }

    pub fn parse(text: &str) -> Result<ConfigLayer, ConfigError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut layer = ConfigLayer::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim().to_string();
            if seen.insert(key.clone(), line).is_some() {
                return Err(ConfigError::DuplicateKey { line, key });
            }
            let slot = match key.as_str() {
                "data" => {
                    layer.data = Some(PathBuf::from(value));
                    continue;
                }
                "out" => {
                    layer.out = Some(PathBuf::from(value));
                    continue;
                }
                "houses" => &mut layer.houses,
                "start" => &mut layer.start,
                "end" => &mut layer.end,
                "strategies" | "strategy" => &mut layer.strategies,
                "min_up" => &mut layer.min_up,
                "min_down" => &mut layer.min_down,
                "weight_scale" => &mut layer.weight_scale,
                "literal_updown_signs" => &mut layer.literal_updown_signs,
                "steps_per_day" => &mut layer.steps_per_day,
                "max_nodes" => &mut layer.max_nodes,
                "max_seconds" => &mut layer.max_seconds,
                "engine" => &mut layer.engine,
                "oracle_check" => &mut layer.oracle_check,
                "jobs" => &mut layer.jobs,
                _ => return Err(ConfigError::UnknownKey { line, key }),
            };
            *slot = Some(value);
        }
        Ok(layer)
    }

    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let house_ids = split_list(&require("houses", self.houses)?);
        if house_ids.is_empty() {
            return Err(invalid("houses", "", "at least one house id is required"));
        }
        let mut sorted = house_ids.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid("houses", &w[0], "house ids must be distinct"));
        }

        let start: NaiveDate = parse_value("start", &require("start", self.start)?)?;
        let end: NaiveDate = parse_value("end", &require("end", self.end)?)?;
        if start > end {
            return Err(invalid("end", &end.to_string(), "end is before start"));
        }

        let strategies = match self.strategies {
            None => StrategyKind::ALL.to_vec(),
            Some(text) => {
                let mut kinds = Vec::new();
                for token in split_list(&text) {
                    let kind: StrategyKind = parse_value("strategies", &token)?;
                    if !kinds.contains(&kind) {
                        kinds.push(kind);
                    }
                }
                kinds.sort();
                kinds
            }
        };
        if strategies.is_empty() {
            return Err(invalid("strategies", "", "at least one strategy is required"));
        }

        let min_up = optional("min_up", self.min_up, DEFAULT_MIN_UP)?;
        let min_down = optional("min_down", self.min_down, DEFAULT_MIN_DOWN)?;
        for (key, m) in [("min_up", min_up), ("min_down", min_down)] {
            if m < 1 {
                return Err(invalid(key, &m.to_string(), "must be at least 1"));
            }
        }
        let weight_scale = optional("weight_scale", self.weight_scale, DEFAULT_WEIGHT_SCALE)?;
        if weight_scale < 1 {
            return Err(invalid("weight_scale", &weight_scale.to_string(), "must be positive"));
        }
        let steps_per_day =
            optional("steps_per_day", self.steps_per_day, DEFAULT_STEPS_PER_DAY)?;
        if steps_per_day < 1 {
            return Err(invalid("steps_per_day", "0", "must be positive"));
        }

        let defaults = SolveLimits::default();
        let max_seconds: f64 = optional("max_seconds", self.max_seconds, defaults.max_seconds)?;
        if !(max_seconds.is_finite() && max_seconds > 0.0) {
            return Err(invalid("max_seconds", &max_seconds.to_string(), "must be a positive number"));
        }
        let limits = SolveLimits {
            max_nodes: optional("max_nodes", self.max_nodes, defaults.max_nodes)?,
            max_seconds,
        };
        let engine = match self.engine.as_deref() {
            None | Some("sweep") => Engine::StageSweep,
            Some("lp") => Engine::LpBranchAndBound,
            Some(other) => return Err(invalid("engine", other, "expected `sweep` or `lp`")),
        };

        Ok(RunConfig {
            data_path: self.data.ok_or(ConfigError::Missing("data"))?,
            house_ids,
            start,
            end,
            strategies,
            min_up,
            min_down,
            weight_scale,
            literal_updown_signs: parse_bool(
                "literal_updown_signs",
                self.literal_updown_signs,
            )?,
            steps_per_day,
            limits,
            engine,
            oracle_check: parse_bool("oracle_check", self.oracle_check)?,
            jobs: optional("jobs", self.jobs, 0)?,
            out_dir: self.out.ok_or(ConfigError::Missing("out"))?,
        })
    }
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn require(key: &'static str, v: Option<String>) -> Result<String, ConfigError> {
    v.ok_or(ConfigError::Missing(key))
}

fn invalid(key: &'static str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_value<T: FromStr>(key: &'static str, text: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    text.trim()
        .parse()
        .map_err(|e: T::Err| invalid(key, text, &e.to_string()))
}

fn optional<T: FromStr>(key: &'static str, v: Option<String>, default: T) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.map_or(Ok(default), |text| parse_value(key, &text))
}

fn parse_bool(key: &'static str, v: Option<String>) -> Result<bool, ConfigError> {
    match v.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None => Ok(false),
        Some("true" | "yes" | "1" | "on") => Ok(true),
        Some("false" | "no" | "0" | "off") => Ok(false),
        Some(other) => Err(invalid(key, other, "expected true or false")),
    }
}

/// A validated run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub house_ids: Vec<String>,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Distinct and in canonical order.
    pub strategies: Vec<StrategyKind>,
    pub min_up: usize,
    pub min_down: usize,
    pub weight_scale: i64,
    pub literal_updown_signs: bool,
    pub steps_per_day: usize,
    pub limits: SolveLimits,
    pub engine: Engine,
    pub oracle_check: bool,
    /// Worker count; 0 uses every available core.
    pub jobs: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn spec(&self, kind: StrategyKind) -> StrategySpec {
        StrategySpec {
            kind,
            min_up: self.min_up,
            min_down: self.min_down,
            weight_scale: self.weight_scale,
            weights: WeightSource::PvToLoadRatio,
            updown: if self.literal_updown_signs {
                UpDownForm::Literal
            } else {
                UpDownForm::Corrected
            },
        }
    }
}
