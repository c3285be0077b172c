//! Experiment configuration: TOML files and `key=value` overrides.
//!
//! A configuration file is a flat table. `preset` and `outputDir` are
//! optional; every other key must be one of [`OVERRIDE_KEYS`].
//!
//! ```toml
//! preset = "gengauss-desk"
//! gamma = 0.75
//! runs = 5
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Keys accepted as overrides, in their documented spelling.
pub const OVERRIDE_KEYS: [&str; 10] = [
    "h",
    "steps",
    "burnIn",
    "runs",
    "seed",
    "beta",
    "gamma",
    "dimension",
    "epsilonSinkhorn",
    "points",
];

/// Optional experiment knobs. Missing entries fall back to preset defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_sinkhorn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

/// A scalar read from a file or the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalar {
    Int(i64),
    Float(f64),
}

impl Scalar {
    /// Integers first, then floats (`1e-4`, `0.7`, `inf` is rejected later).
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        if let Ok(i) = t.parse::<i64>() {
            return Some(Self::Int(i));
        }
        t.parse::<f64>().ok().map(Self::Float)
    }

    fn as_f64(self) -> f64 {
        match self {
            Self::Int(i) => i as f64,
            Self::Float(f) => f,
        }
    }

    fn as_count(self, key: &str) -> Result<u64> {
        match self {
            Self::Int(i) if i >= 0 => Ok(i as u64),
            _ => Err(config_error(key, format!("expected a nonnegative integer, got {self:?}"))),
        }
    }
}

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least_one(key: &str, v: u64) -> Result<u64> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(config_error(key, "must be at least 1"))
    }
}

impl Overrides {
    /// Sets one key after checking its type and sign constraint.
    pub fn set(&mut self, key: &str, value: Scalar) -> Result<()> {
        match key {
            "h" => self.h = Some(positive(key, value.as_f64())?),
            "steps" => self.steps = Some(at_least_one(key, value.as_count(key)?)? as usize),
            "burnIn" => self.burn_in = Some(value.as_count(key)? as usize),
            "runs" => {
                let r = at_least_one(key, value.as_count(key)?)?;
                self.runs = Some(u32::try_from(r).map_err(|_| config_error(key, "too many runs"))?);
            }
            "seed" => self.seed = Some(value.as_count(key)?),
            "beta" => {
                let b = value.as_f64();
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(config_error(key, format!("must be nonnegative and finite, got {b}")));
                }
                self.beta = Some(b);
            }
            "gamma" => {
                let g = value.as_f64();
                if !(g > 0.5 && g.is_finite()) {
                    return Err(config_error(key, format!("must exceed 1/2, got {g}")));
                }
                self.gamma = Some(g);
            }
            "dimension" => self.dimension = Some(at_least_one(key, value.as_count(key)?)? as usize),
            "epsilonSinkhorn" => self.epsilon_sinkhorn = Some(positive(key, value.as_f64())?),
            "points" => self.points = Some(at_least_one(key, value.as_count(key)?)? as usize),
            _ => {
                return Err(config_error(
                    key,
                    format!("unknown key; accepted keys are {}", OVERRIDE_KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| config_error(assignment, "expected key=value"))?;
        let key = key.trim();
        let scalar = Scalar::parse(value).ok_or_else(|| config_error(key, format!("`{}` is not a number", value.trim())))?;
        self.set(key, scalar)
    }

    /// Keys that carry a value.
    pub fn keys(&self) -> Vec<&'static str> {
        let present = [
            self.h.is_some(),
            self.steps.is_some(),
            self.burn_in.is_some(),
            self.runs.is_some(),
            self.seed.is_some(),
            self.beta.is_some(),
            self.gamma.is_some(),
            self.dimension.is_some(),
            self.epsilon_sinkhorn.is_some(),
            self.points.is_some(),
        ];
        OVERRIDE_KEYS.iter().zip(present).filter(|(_, p)| *p).map(|(k, _)| *k).collect()
    }

    /// Entries of `other` replace entries of `self`.
    pub fn merged(&self, other: &Overrides) -> Overrides {
        Overrides {
            h: other.h.or(self.h),
            steps: other.steps.or(self.steps),
            burn_in: other.burn_in.or(self.burn_in),
            runs: other.runs.or(self.runs),
            seed: other.seed.or(self.seed),
            beta: other.beta.or(self.beta),
            gamma: other.gamma.or(self.gamma),
            dimension: other.dimension.or(self.dimension),
            epsilon_sinkhorn: other.epsilon_sinkhorn.or(self.epsilon_sinkhorn),
            points: other.points.or(self.points),
        }
    }
}

/// Contents of a configuration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub overrides: Overrides,
}

/// A fully specified experiment request.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub overrides: Overrides,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(preset: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            preset: preset.into(),
            overrides: Overrides::default(),
            output_dir: output_dir.into(),
        }
    }

    pub fn with(mut self, assignment: &str) -> Result<Self> {
        self.overrides.set_assignment(assignment)?;
        Ok(self)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses configuration text; `path` is used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ConfigFile> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        path: path.to_path_buf(),
        message: match e.span() {
            Some(span) => format!("line {}: {}", line_of(text, span.start), e.message()),
            None => e.message().to_string(),
        },
    })?;
    let mut out = ConfigFile::default();
    for (key, value) in &table {
        match (key.as_str(), value) {
            ("preset", toml::Value::String(s)) => out.preset = Some(s.clone()),
            ("outputDir", toml::Value::String(s)) => out.output_dir = Some(PathBuf::from(s)),
            ("preset" | "outputDir", other) => {
                return Err(config_error(key, format!("expected a string, got {}", other.type_str())))
            }
            (_, toml::Value::Integer(i)) => out.overrides.set(key, Scalar::Int(*i))?,
            (_, toml::Value::Float(f)) => out.overrides.set(key, Scalar::Float(*f))?,
            (_, other) if OVERRIDE_KEYS.contains(&key.as_str()) => {
                return Err(config_error(key, format!("expected a number, got {}", other.type_str())))
            }
            _ => out.overrides.set(key, Scalar::Int(0))?,
        }
    }
    Ok(out)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path)
}
