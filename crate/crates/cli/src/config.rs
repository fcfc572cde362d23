//! Experiment configuration, read from TOML.
//!
//! ```toml
//! algorithm = "bessel-ea1"
//! model = "growth"
//! kappa = 1.0
//! omega = 3.0
//! tau = 1.0
//! y0 = 1.0
//! yT = 1.0
//! T = 0.15
//! n_paths = 10000
//! seed = 1
//!
//! [sweep]
//! kappa = [1.0, 10.0]
//! y0 = [10.0, 1.0, 0.5]
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use exactdiff_core::engine::{Algorithm, EngineOptions, Simulator};
use exactdiff_core::layered::LayerScheme;
use exactdiff_core::model::{
    Candidate, GrowthBounds, GrowthModel, GrowthModelParams, JacobiDrift, SineDrift, UnitDiffusion, WideSenseBessel,
    ZeroDrift,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Growth,
    Sine,
    Zero,
    Jacobi,
    WideSenseBessel,
}

/// Which constant bounds the growth model uses for its Girsanov functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bounds {
    #[default]
    Sharp,
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_attempts: u64,
    /// Notional storage for one candidate's Poisson marks.
    pub max_memory_bytes: u64,
    pub max_layer_proposals: u64,
}

impl Default for Limits {
    fn default() -> Self {
        let d = EngineOptions::default();
        Limits {
            max_attempts: d.max_attempts,
            max_memory_bytes: d.max_marks * EngineOptions::BYTES_PER_MARK,
            max_layer_proposals: d.max_layer_proposals,
        }
    }
}

impl Limits {
    pub fn options(&self) -> EngineOptions {
        EngineOptions {
            max_attempts: self.max_attempts,
            max_layer_proposals: self.max_layer_proposals,
            ..EngineOptions::default()
        }
        .with_memory(self.max_memory_bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Fill-in grid `i·T/grid`, `i = 0..=grid`.
    pub grid: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { grid: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub suites: Vec<String>,
    /// Overrides each suite's default sample size.
    pub n: Option<u64>,
    /// Significance level for KS and chi-square p-values.
    pub alpha: f64,
    /// Euler step for the SDE oracles.
    pub euler_dt: Option<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { suites: Vec::new(), n: None, alpha: 0.01, euler_dt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub model: ModelKind,
    pub kappa: f64,
    pub omega: f64,
    pub tau: f64,
    pub nu: f64,
    pub rho: f64,
    /// Bessel candidate dimension; defaults to 4 for the growth model.
    pub delta: Option<f64>,
    /// Jacobi drift strength.
    pub c: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub bounds: Bounds,
    pub y0: f64,
    #[serde(rename = "yT")]
    pub y_end: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub positivity: bool,
    pub n_paths: u64,
    pub seed: u64,
    pub layers: LayerScheme,
    pub limits: Limits,
    pub sweep: Option<Sweep>,
    pub simulate: SimulateConfig,
    pub validate: ValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::BesselEa1,
            model: ModelKind::Growth,
            kappa: 1.0,
            omega: 3.0,
            tau: 1.0,
            nu: 0.0,
            rho: 0.0,
            delta: None,
            c: 2.0,
            lower: None,
            upper: None,
            bounds: Bounds::Sharp,
            y0: 1.0,
            y_end: None,
            horizon: 1.0,
            positivity: false,
            n_paths: 10_000,
            seed: 1,
            layers: LayerScheme::default(),
            limits: Limits::default(),
            sweep: None,
            simulate: SimulateConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !self.y0.is_finite() || self.y_end.is_some_and(|z| !z.is_finite()) {
            return bad("y0 and yT must be finite".into());
        }
        if self.simulate.grid == 0 {
            return bad("simulate.grid must be at least 1".into());
        }
        if !(self.validate.alpha > 0.0 && self.validate.alpha <= 1.0) {
            return bad(format!("validate.alpha must lie in (0, 1], got {}", self.validate.alpha));
        }
        if self.validate.euler_dt.is_some_and(|dt| !(dt > 0.0 && dt < self.horizon.max(1.0))) {
            return bad("validate.euler_dt must be positive and below T".into());
        }
        if self.limits.max_attempts == 0 || self.limits.max_memory_bytes < EngineOptions::BYTES_PER_MARK {
            return bad("resource limits must allow at least one attempt and one mark".into());
        }
        self.layers.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.kappa.iter().chain(&s.y0).any(|v| !v.is_finite()) {
                return bad("sweep values must be finite".into());
            }
        }
        self.model_for(self.kappa)?;
        Ok(())
    }

    /// The configured model with growth rate `kappa`.
    pub fn model_for(&self, kappa: f64) -> Result<Arc<dyn UnitDiffusion>> {
        let cfg = |e: exactdiff_core::Error| CliError::Config(e.to_string());
        Ok(match self.model {
            ModelKind::Growth => {
                let params = GrowthModelParams::new(kappa, self.tau, self.omega).map_err(cfg)?;
                let candidate = match (self.algorithm, self.delta) {
                    (Algorithm::BesselEa1, d) => Candidate::bessel(d.unwrap_or(4.0)).map_err(cfg)?,
                    (_, Some(d)) => Candidate::bessel(d).map_err(cfg)?,
                    (_, None) => Candidate::Brownian,
                };
                let bounds = match self.bounds {
                    Bounds::Sharp => GrowthBounds::Sharp,
                    Bounds::Printed => GrowthBounds::Printed,
                };
                Arc::new(GrowthModel::new(params, candidate, bounds).map_err(cfg)?)
            }
            ModelKind::Sine => Arc::new(SineDrift),
            ModelKind::Zero => match (self.lower, self.upper) {
                (None, None) => Arc::new(ZeroDrift::new()),
                (l, u) => Arc::new(
                    ZeroDrift::on_interval(l.unwrap_or(f64::NEG_INFINITY), u.unwrap_or(f64::INFINITY)).map_err(cfg)?,
                ),
            },
            ModelKind::Jacobi => Arc::new(JacobiDrift::new(self.c).map_err(cfg)?),
            ModelKind::WideSenseBessel => Arc::new(WideSenseBessel::new(self.nu, self.rho).map_err(cfg)?),
        })
    }

    /// Simulator for one sweep cell.
    pub fn simulator(&self, kappa: f64, y0: f64) -> Result<Simulator> {
        let model = self.model_for(kappa)?;
        Simulator::new(model, self.algorithm, y0, self.horizon, self.y_end, self.positivity)
            .map(|s| s.with_layers(self.layers).with_options(self.limits.options()))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// `(kappa, y0)` cells of the sweep; a single cell without one.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let sweep = self.sweep.clone().unwrap_or(Sweep { kappa: vec![], y0: vec![] });
        let ks = if sweep.kappa.is_empty() { vec![self.kappa] } else { sweep.kappa };
        let ys = if sweep.y0.is_empty() { vec![self.y0] } else { sweep.y0 };
        ks.iter().flat_map(|&k| ys.iter().map(move |&y| (k, y))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_sweep() {
        let c = ExperimentConfig::from_toml(
            "algorithm = \"ea2\"\nmodel = \"growth\"\nT = 0.15\nyT = 1.0\npositivity = true\n\
             [sweep]\nkappa = [1.0, 10.0]\ny0 = [0.5, 0.25]\n[limits]\nmax_memory_bytes = 1048576\n",
        )
        .unwrap();
        assert_eq!(c.algorithm, Algorithm::Ea2);
        assert_eq!(c.cells(), vec![(1.0, 0.5), (1.0, 0.25), (10.0, 0.5), (10.0, 0.25)]);
        assert_eq!(c.limits.options().max_marks, 1 << 16);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("T = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("colour = 3").is_err());
        assert!(ExperimentConfig::from_toml("model = \"growth\"\nomega = 2.0\nkappa = 1.0").is_err());
        assert!(ExperimentConfig::from_toml("[layers]\ngrowth = 0.5").is_err());
    }
}
