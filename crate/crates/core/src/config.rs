//! Experiment configuration in sectioned `key = value` form.
//!
//! Every key has a built-in default; a config file only overrides keys that
//! already exist, so unknown sections or keys are errors. Lists are
//! comma-separated.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::detect::{DEFAULT_HORIZON_S, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::features::{FeatureParams, DEFAULT_LEAK_HALO};
use crate::fsio::{read_text, sha256_hex};
use crate::hydraulics::{PipeSpec, DEFAULT_DISCHARGE_COEFFICIENT, DEFAULT_GAUGE_PRESSURE};
use crate::nn::{ArchitectureSpec, TrainConfig, Variant, DEFAULT_DROPOUT};
use crate::quantify::DEFAULT_RANGE_WINDOW_S;
use crate::sim::{DasConfig, SignalModel, TestbedLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads for per-case stages; 0 picks the available parallelism.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    /// Seconds per case.
    pub duration_s: f64,
    /// Case ids to build; empty selects all eleven.
    pub cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    /// `2d` or `3d`.
    pub variant: String,
    pub z: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSection {
    /// Fraction of each case's windows held out for testing.
    pub test_fraction: f64,
    /// Half-width of the leak label around the orifice (m).
    pub leak_halo_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSection {
    pub threshold: f64,
    pub median_horizon_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantifySection {
    /// Used for cases whose truth carries no gauge reading (Pa).
    pub gauge_pressure: f64,
    pub discharge_coefficient: f64,
    pub range_window_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub dataset: DatasetSection,
    pub das: DasConfig,
    pub pipe: PipeSpec,
    pub signal: SignalModel,
    pub layout: TestbedLayout,
    pub features: FeatureParams,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub split: SplitSection,
    pub detect: DetectSection,
    pub quantify: QuantifySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            run: RunSection { seed: 20_240_601, threads: 0 },
            dataset: DatasetSection { duration_s: 120.0, cases: Vec::new() },
            das: DasConfig::default(),
            pipe: PipeSpec::default(),
            signal: SignalModel::default(),
            layout: TestbedLayout::default(),
            features: FeatureParams::default(),
            model: ModelSection { variant: "3d".into(), z: 5, dropout: DEFAULT_DROPOUT },
            train: TrainConfig::default(),
            split: SplitSection { test_fraction: 0.25, leak_halo_m: DEFAULT_LEAK_HALO },
            detect: DetectSection { threshold: DEFAULT_THRESHOLD, median_horizon_s: DEFAULT_HORIZON_S },
            quantify: QuantifySection {
                gauge_pressure: DEFAULT_GAUGE_PRESSURE,
                discharge_coefficient: DEFAULT_DISCHARGE_COEFFICIENT,
                range_window_s: DEFAULT_RANGE_WINDOW_S,
            },
        }
    }
}

fn to_value(cfg: &ExperimentConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serialises") {
        Value::Object(m) => m,
        _ => unreachable!("config serialises to an object"),
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses `text` as the type of `template`.
fn typed(text: &str, template: &Value) -> std::result::Result<Value, String> {
    let text = text.trim();
    match template {
        Value::Bool(_) => text.parse::<bool>().map(Value::Bool).map_err(|_| format!("expected true or false, got {text:?}")),
        Value::Number(n) if n.is_u64() => text.parse::<u64>().map(Value::from).map_err(|_| format!("expected a non-negative integer, got {text:?}")),
        Value::Number(n) if n.is_i64() => text.parse::<i64>().map(Value::from).map_err(|_| format!("expected an integer, got {text:?}")),
        Value::Number(_) => text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::from)
            .ok_or_else(|| format!("expected a finite number, got {text:?}")),
        Value::String(_) => Ok(Value::String(text.to_string())),
        Value::Array(items) => {
            if text.is_empty() {
                return Ok(Value::Array(Vec::new()));
            }
            let elem = items.first().cloned().unwrap_or(Value::String(String::new()));
            text.split(',').map(|t| typed(t, &elem)).collect::<std::result::Result<Vec<_>, _>>().map(Value::Array)
        }
        _ => Err("unsupported value".into()),
    }
}

/// Element template for list keys whose default is empty.
fn list_template(section: &str, key: &str) -> Option<Value> {
    match (section, key) {
        ("dataset", "cases") => Some(Value::Array(vec![Value::String(String::new())])),
        ("layout", _) => Some(Value::Array(vec![Value::from(0u64)])),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut root = to_value(&ExperimentConfig::default());
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key {k:?} appears before any section")));
                }
                continue;
            };
            let Some(Value::Object(fields)) = root.get_mut(section) else {
                return Err(Error::Config(format!("unknown section [{section}]")));
            };
            for (key, raw) in props.iter() {
                let Some(slot) = fields.get_mut(key) else {
                    return Err(Error::Config(format!("unknown key {key:?} in [{section}]")));
                };
                let template = match &*slot {
                    Value::Array(a) if a.is_empty() => list_template(section, key).unwrap_or_else(|| slot.clone()),
                    other => other.clone(),
                };
                *slot = typed(raw, &template).map_err(|e| Error::Config(format!("[{section}] {key}: {e}")))?;
            }
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(Value::Object(root)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Full listing of every key; parsing it yields an equal config.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        for (section, fields) in to_value(self) {
            let _ = writeln!(s, "[{section}]");
            if let Value::Object(fields) = fields {
                for (key, v) in fields {
                    let text = match &v {
                        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(","),
                        other => scalar_text(other),
                    };
                    let _ = writeln!(s, "{key} = {text}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the canonical listing.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_ini().as_bytes())
    }

    pub fn variant(&self) -> Result<Variant> {
        Variant::parse(&self.model.variant)
            .ok_or_else(|| Error::Config(format!("model variant must be 2d or 3d, got {:?}", self.model.variant)))
    }

    pub fn architecture(&self) -> Result<ArchitectureSpec> {
        let mut spec = ArchitectureSpec::for_input(
            self.variant()?,
            self.model.z,
            self.features.mel_bands_kept,
            self.features.frame_count(self.das.sampling_rate),
        )?;
        spec.dropout = self.model.dropout;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.das.validate()?;
        self.pipe.validate()?;
        self.features.validate(self.das.sampling_rate)?;
        self.train.validate()?;
        self.variant()?;
        if self.model.z % 2 == 0 || self.model.z == 0 || self.model.z > crate::sim::MAX_CUBE_DEPTH {
            return bad(format!("model z must be odd and at most {}, got {}", crate::sim::MAX_CUBE_DEPTH, self.model.z));
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.model.dropout));
        }
        if !(self.dataset.duration_s > 0.0) {
            return bad("dataset duration must be positive".into());
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.split.test_fraction));
        }
        if !(self.split.leak_halo_m >= 0.0) {
            return bad("leak_halo_m must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.detect.threshold) {
            return bad(format!("detection threshold must lie in [0, 1), got {}", self.detect.threshold));
        }
        if !(self.detect.median_horizon_s >= self.features.segment_length) {
            return bad("median horizon must cover at least one window".into());
        }
        if !(self.quantify.range_window_s >= self.features.segment_length) {
            return bad("range window must cover at least one window".into());
        }
        if !(self.quantify.gauge_pressure > 0.0) {
            return bad("gauge pressure must be positive".into());
        }
        if !(self.quantify.discharge_coefficient > 0.0 && self.quantify.discharge_coefficient <= 1.0) {
            return bad("discharge coefficient must lie in (0, 1]".into());
        }
        Ok(())
    }
}
