//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificates::ScanOptions;
use crate::dde::InitialHistory;
use crate::error::{Error, Result};
use crate::models::{
    constant_history, random_history, sinusoid_history, tabulated_history, ModelSpec, RandomBox,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub history: HistoryConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HistoryConfig {
    /// Seeded random curves inside a box.
    #[serde(rename_all = "camelCase")]
    Random {
        #[serde(default = "default_position_box")]
        position: [f64; 2],
        #[serde(default = "default_velocity_box")]
        velocity: [f64; 2],
        #[serde(default = "default_control_knots")]
        control_knots: usize,
    },
    /// Constant positions (first order) or uniform motion (second order).
    Constant { positions: Vec<f64>, velocities: Option<Vec<f64>> },
    /// Oscillating preset.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// Full states at increasing times ending at 0.
    Tabulated { times: Vec<f64>, states: Vec<Vec<f64>> },
}

fn default_position_box() -> [f64; 2] {
    RandomBox::default().position
}

fn default_velocity_box() -> [f64; 2] {
    RandomBox::default().velocity
}

fn default_control_knots() -> usize {
    RandomBox::default().control_knots
}

impl Default for HistoryConfig {
    fn default() -> Self {
        let b = RandomBox::default();
        HistoryConfig::Random { position: b.position, velocity: b.velocity, control_knots: b.control_knots }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimConfig {
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub output_every: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Fixed beta for certificates and the Lyapunov functionals.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "yes")]
    pub certificate: bool,
    #[serde(default = "yes")]
    pub lemma_check: bool,
    #[serde(default)]
    pub scan: ScanOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { beta: None, certificate: true, lemma_check: true, scan: ScanOptions::default() }
    }
}

/// `line:column` of the first occurrence of `"key"` in `text`.
fn anchor(text: &str, key: &str) -> Option<(usize, usize)> {
    let pos = text.find(&format!("\"{key}\""))?;
    let before = &text[..pos];
    let line = before.matches('\n').count() + 1;
    let col = pos - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, col))
}

impl RunConfig {
    /// Parses and validates; errors carry `origin:line:column`.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|(key, e)| {
            let msg = match e {
                Error::Config(m) | Error::Domain(m) => m,
                other => other.to_string(),
            };
            match anchor(text, key) {
                Some((l, c)) => Error::Config(format!("{origin}:{l}:{c}: {msg}")),
                None => Error::Config(format!("{origin}: {msg}")),
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, Error)> {
        self.model.validate().map_err(|e| {
            let key = match &e {
                Error::Config(m) if m.contains("sigma") => "sigma",
                Error::Config(m) if m.contains("tau") => "tau",
                Error::Config(m) if m.contains("agents") => "nAgents",
                _ => "model",
            };
            (key, e)
        })?;
        let bad = |key, msg: String| Err((key, Error::Config(msg)));
        if !(self.sim.h > 0.0 && self.sim.h.is_finite()) {
            return bad("h", format!("step h must be positive, got {}", self.sim.h));
        }
        if !(self.sim.horizon > 0.0 && self.sim.horizon.is_finite()) {
            return bad("T", format!("horizon T must be positive, got {}", self.sim.horizon));
        }
        if self.sim.output_every == 0 {
            return bad("outputEvery", "outputEvery must be >= 1".into());
        }
        if let Some(b) = self.analysis.beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad("beta", format!("beta must be positive, got {b}"));
            }
        }
        Ok(())
    }

    /// Builds the initial history for `seed`.
    pub fn build_history(&self, seed: u64) -> Result<InitialHistory> {
        let spec = &self.model;
        match &self.history {
            HistoryConfig::Random { position, velocity, control_knots } => {
                let bounds = RandomBox { position: *position, velocity: *velocity, control_knots: *control_knots };
                random_history(spec, self.sim.h, seed, &bounds)
            }
            HistoryConfig::Constant { positions, velocities } => {
                constant_history(spec, positions, velocities.as_deref())
            }
            HistoryConfig::Sinusoid { amplitude, frequency } => {
                sinusoid_history(spec, *amplitude, *frequency, self.sim.h)
            }
            HistoryConfig::Tabulated { times, states } => tabulated_history(spec, times.clone(), states),
        }
    }
}
