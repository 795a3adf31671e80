//! JSON configuration schemas. Unknown keys are rejected so a typo in a
//! config file fails loudly instead of silently using a default.

use hankel_pencil::density::Grid;
use hankel_pencil::model::ExponentialModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x0: f64,
    pub y0: f64,
    pub delta: f64,
    pub m: usize,
}

impl GridConfig {
    pub fn to_grid(self) -> Result<Grid, CliError> {
        Grid::new(self.x0, self.y0, self.delta, self.m).map_err(CliError::config)
    }

    pub fn default_square() -> Self {
        let g = Grid::default_square();
        GridConfig { x0: g.x0, y0: g.y0, delta: g.delta, m: g.m }
    }

    /// Parse the `x0,y0,delta,m` flag form.
    pub fn parse_flag(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("expected x0,y0,delta,m, got {text:?}"));
        }
        Ok(GridConfig {
            x0: parts[0].trim().parse().map_err(|e| format!("x0: {e}"))?,
            y0: parts[1].trim().parse().map_err(|e| format!("y0: {e}"))?,
            delta: parts[2].trim().parse().map_err(|e| format!("delta: {e}"))?,
            m: parts[3].trim().parse().map_err(|e| format!("m: {e}"))?,
        })
    }
}

/// Model description: components plus the record parameters, the schema of
/// the `synth` config and of `--model` files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub model: ExponentialModel,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(CliError::config)?;
        if self.n < 4 || self.n % 2 != 0 {
            return Err(CliError::config(format!(
                "record length must be even and >= 4, got {}",
                self.n
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(CliError::config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub data: Option<String>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub grid: Option<GridConfig>,
    /// Replicated-potential variant: number of generated records.
    pub mc: Option<usize>,
    /// Generator for the replicated variant.
    pub model: Option<ModelConfig>,
    pub potential: Option<PotentialKind>,
    pub pgm: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Smoothed,
    Exact,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub data: Option<String>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub grid: Option<GridConfig>,
    pub max_candidates: Option<usize>,
    /// Manual override: take the top-q maxima without threshold selection.
    pub p_hat: Option<usize>,
    /// Replicated scoring: number of generated records (needs `model`).
    pub replicates: Option<usize>,
    pub model: Option<ModelConfig>,
    /// Sub-cell quadratic refinement of peak locations before selection.
    pub refine_peaks: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub data: Option<String>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub grid: Option<GridConfig>,
    pub n_breaks: Option<usize>,
    pub pool: Option<usize>,
    pub t_points: Option<usize>,
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{path}: {e}")))
}
