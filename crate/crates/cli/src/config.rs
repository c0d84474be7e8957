//! Layered tool configuration: optional TOML file, then `--set key=value`
//! overrides applied on top, then strict deserialization (unknown keys are
//! rejected) and range validation.

use std::path::Path;

use iotmon_core::attributes::TimescaleSet;
use iotmon_core::monitor::{lambda_from_policy, MonitorPolicy};
use iotmon_core::oneclass::{default_k_candidates, BoundaryRule, OneClassConfig};
use iotmon_core::supervised::ForestConfig;
use iotmon_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub attributes: AttributesSection,
    pub oneclass: OneClassSection,
    pub monitor: MonitorSection,
    pub forest: ForestSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttributesSection {
    /// `ch5` (1/2/4/8 min), `ch4` (1..64 min), or `custom`.
    pub preset: String,
    /// Scales used when `preset = "custom"`.
    pub scales: Vec<u32>,
    /// Keep every Nth instance per device after synthesis (1 = keep all).
    pub downsample: usize,
}

impl Default for AttributesSection {
    fn default() -> Self {
        AttributesSection {
            preset: "ch5".into(),
            scales: Vec::new(),
            downsample: 1,
        }
    }
}

impl AttributesSection {
    pub fn timescales(&self) -> Result<TimescaleSet> {
        match self.preset.as_str() {
            "ch5" => Ok(TimescaleSet::four_scale()),
            "ch4" => Ok(TimescaleSet::seven_scale()),
            "custom" => TimescaleSet::custom(self.scales.clone()),
            other => Err(Error::invalid(format!(
                "unknown preset {other:?}; expected ch5, ch4, or custom"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneClassSection {
    pub cumvar_target: f64,
    pub k_candidates: Vec<usize>,
    pub deriv_threshold: f64,
    /// `percentile` or `iqr`.
    pub boundary_rule: String,
    pub seed: u64,
    pub fixed_k: Option<usize>,
}

impl Default for OneClassSection {
    fn default() -> Self {
        OneClassSection {
            cumvar_target: 0.95,
            k_candidates: default_k_candidates(),
            deriv_threshold: -0.01,
            boundary_rule: "percentile".into(),
            seed: 0,
            fixed_k: None,
        }
    }
}

impl OneClassSection {
    pub fn to_core(&self) -> Result<OneClassConfig> {
        let boundary_rule = match self.boundary_rule.as_str() {
            "percentile" => BoundaryRule::Percentile,
            "iqr" => BoundaryRule::IqrFence,
            other => {
                return Err(Error::invalid(format!(
                    "unknown boundary_rule {other:?}; expected percentile or iqr"
                )))
            }
        };
        Ok(OneClassConfig {
            cumvar_target: self.cumvar_target,
            k_candidates: self.k_candidates.clone(),
            deriv_threshold: self.deriv_threshold,
            boundary_rule,
            seed: self.seed,
            fixed_k: self.fixed_k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSection {
    /// Sigmoid target (S*, T) pair for runs of positive verdicts.
    pub rise_target: f64,
    pub rise_minutes: f64,
    /// Sigmoid target (S*, T) pair for runs of negative verdicts.
    pub fall_target: f64,
    pub fall_minutes: f64,
    pub accept_threshold: f64,
    pub confidence_floor: f64,
    pub alarm_level: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection {
            rise_target: 0.99,
            rise_minutes: 720.0,
            fall_target: 0.01,
            fall_minutes: 90.0,
            accept_threshold: 0.90,
            confidence_floor: 0.025,
            alarm_level: 0.50,
        }
    }
}

impl MonitorSection {
    pub fn to_policy(&self) -> Result<MonitorPolicy> {
        Ok(MonitorPolicy {
            lambda_rise: lambda_from_policy(self.rise_target, self.rise_minutes)?,
            lambda_fall: lambda_from_policy(self.fall_target, self.fall_minutes)?,
            accept_threshold: self.accept_threshold,
            confidence_floor: self.confidence_floor,
            alarm_level: self.alarm_level,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub trees: usize,
    pub min_leaf: usize,
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestConfig::default();
        ForestSection {
            trees: d.trees,
            min_leaf: d.min_leaf,
            features_per_split: d.features_per_split,
            seed: d.seed,
        }
    }
}

impl ForestSection {
    pub fn to_core(&self) -> ForestConfig {
        ForestConfig {
            trees: self.trees,
            min_leaf: self.min_leaf,
            features_per_split: self.features_per_split,
            seed: self.seed,
        }
    }
}

impl Config {
    /// Loads the optional file, applies `key.path=value` overrides, and
    /// validates ranges.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut value: toml::Value = toml::from_str(&text)
            .map_err(|e| Error::invalid(format!("config parse failed: {e}")))?;
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: Config = value
            .try_into()
            .map_err(|e| Error::invalid(format!("config rejected: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        self.attributes.timescales()?;
        if self.attributes.downsample < 1 {
            return Err(Error::invalid("attributes.downsample must be >= 1"));
        }
        if !(0.0 < self.oneclass.cumvar_target && self.oneclass.cumvar_target <= 1.0) {
            return Err(Error::invalid(format!(
                "oneclass.cumvar_target = {} outside (0, 1]",
                self.oneclass.cumvar_target
            )));
        }
        if self.oneclass.k_candidates.is_empty() && self.oneclass.fixed_k.is_none() {
            return Err(Error::invalid("oneclass.k_candidates must not be empty"));
        }
        self.oneclass.to_core()?;
        unit("monitor.accept_threshold", self.monitor.accept_threshold)?;
        unit("monitor.confidence_floor", self.monitor.confidence_floor)?;
        unit("monitor.alarm_level", self.monitor.alarm_level)?;
        self.monitor.to_policy()?;
        if self.forest.trees == 0 {
            return Err(Error::invalid("forest.trees must be >= 1"));
        }
        Ok(())
    }
}

/// Applies one `section.key=value` override in place. The value side is
/// parsed as a TOML literal when possible, else taken as a bare string.
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<()> {
    let (key_path, raw) = entry
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override {entry:?} is not KEY=VALUE")))?;
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let segments: Vec<&str> = key_path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(Error::invalid(format!("override {entry:?} has empty key segment")));
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::invalid(format!("override {key_path:?}: {seg:?} is not a table")))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("loop returns on last segment")
}
