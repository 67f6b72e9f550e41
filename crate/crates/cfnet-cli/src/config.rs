//! Run configuration, one TOML file per experiment.

use crate::error::{config, CliError};
use cfnet::charlib::{CfError, LinearTransform, ModelSpec};
use cfnet::pricer::{Convention, OptionKind};
use cfnet::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub transform: Option<LinearTransform>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    pub pricing: Option<PricingSection>,
    pub bermudan: Option<BermudanSection>,
    pub cos: Option<CosSection>,
    pub export: Option<GridSpec>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// Tail tolerance that fixes the Fourier half-width.
    pub tail_tol: f64,
    /// Points in the uniform pre-scan used to locate critical points.
    pub prescan: usize,
    /// Replaces the detected critical points when present.
    pub critical_points: Option<Vec<f64>>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { tail_tol: 1e-7, prescan: 4096, critical_points: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Extra reseeded attempts when the loss threshold is missed.
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Half-width of the original-variable window for density metrics.
    pub half_width: f64,
    /// Points in the evaluation grids for maximum pointwise errors.
    pub grid_points: usize,
    /// Series terms for the Merton reference density.
    pub reference_terms: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { half_width: 8.0, grid_points: 2001, reference_terms: 60 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// The model's own variable, before the linear transform.
    Original,
    /// The fitted variable Y = aX + c.
    #[default]
    Transformed,
}

/// Integration window for pricing, in either variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub variable: Variable,
}

impl Window {
    pub fn validate(&self, section: &str) -> Result<(), CliError> {
        if self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper {
            Ok(())
        } else {
            Err(config(format!("{section}.window: lower must be below upper")))
        }
    }

    /// Bounds in the transformed variable.
    pub fn transformed(&self, lt: LinearTransform) -> (f64, f64) {
        match self.variable {
            Variable::Original => (lt.forward(self.lower), lt.forward(self.upper)),
            Variable::Transformed => (self.lower, self.upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    pub kind: OptionKind,
    pub convention: Convention,
    pub rate: f64,
    pub maturity: f64,
    pub strikes: Vec<f64>,
    /// Published reference prices; the COS price is used when absent.
    pub references: Option<Vec<f64>>,
    pub window: Option<Window>,
    #[serde(default = "default_cos_terms")]
    pub cos_terms: usize,
    pub cos_range: Option<[f64; 2]>,
    /// Largest acceptable relative error against the reference.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_cos_terms() -> usize {
    4096
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BermudanSection {
    pub strike: f64,
    pub dividend: f64,
    pub rate: f64,
    pub dates: usize,
    pub spot: f64,
    /// The grid spans ln(spot) ± half_width.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    pub q_values: Vec<usize>,
    pub window: Option<Window>,
    pub benchmark: Option<f64>,
}

fn default_half_width() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosSection {
    pub terms: Vec<usize>,
    /// Expansion range; the cumulant rule is used when absent.
    pub range: Option<[f64; 2]>,
    pub grid: GridSpec,
}

/// Uniform grid of `points` values on [lower, upper] in the original variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn validate(&self, section: &str) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(config(format!("{section}.points: the grid is empty")));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower <= self.upper) {
            return Err(config(format!("{section}: lower must not exceed upper")));
        }
        if self.points > 1 && self.lower == self.upper {
            return Err(config(format!("{section}: several points need lower < upper")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lower];
        }
        let h = (self.upper - self.lower) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.lower + h * k as f64).collect()
    }
}

fn prefixed(section: &str, e: CfError) -> CliError {
    match e {
        CfError::InvalidParameter { field, reason } => config(format!("{section}.{field}: {reason}")),
        other => other.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn transform(&self) -> LinearTransform {
        self.transform.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| prefixed("model", e))?;
        if let Some(lt) = &self.transform {
            lt.validate().map_err(|e| prefixed("transform", e))?;
            if self.model.dim() == 2 && *lt != LinearTransform::default() {
                return Err(config("transform: two-dimensional models are fitted untransformed"));
            }
        }
        if !(self.sampler.tail_tol > 0.0) {
            return Err(config("sampler.tail_tol: must be positive"));
        }
        self.train.validate().map_err(|e| config(format!("train: {e}")))?;
        if !(self.metrics.half_width > 0.0) || self.metrics.grid_points < 2 {
            return Err(config("metrics: half_width must be positive and grid_points at least 2"));
        }
        if let Some(p) = &self.pricing {
            self.validate_pricing(p)?;
        }
        if let Some(b) = &self.bermudan {
            if self.model.dim() != 1 || self.model.is_log_price() {
                return Err(config("bermudan: needs a one-dimensional log-return model"));
            }
            if b.q_values.is_empty() || b.q_values.iter().any(|q| *q < 2) {
                return Err(config("bermudan.q_values: need at least one grid size of 2 or more"));
            }
            if !(b.half_width > 0.0) {
                return Err(config("bermudan.half_width: must be positive"));
            }
            if let Some(w) = &b.window {
                w.validate("bermudan")?;
            }
        }
        if let Some(c) = &self.cos {
            if c.terms.is_empty() {
                return Err(config("cos.terms: list at least one expansion length"));
            }
            if let Some([a, b]) = c.range {
                if !(a < b) {
                    return Err(config("cos.range: lower must be below upper"));
                }
            }
            c.grid.validate("cos.grid")?;
        }
        if let Some(g) = &self.export {
            g.validate("export")?;
        }
        Ok(())
    }

    fn validate_pricing(&self, p: &PricingSection) -> Result<(), CliError> {
        if self.model.dim() != 1 {
            return Err(config("pricing: needs a one-dimensional model"));
        }
        if p.maturity != self.model.horizon {
            return Err(config(format!("pricing.maturity: {} differs from the model horizon {}", p.maturity, self.model.horizon)));
        }
        let log_price = matches!(p.convention, Convention::LogPrice);
        if log_price != self.model.is_log_price() {
            return Err(config("pricing.convention: does not match the variable the model describes"));
        }
        if p.strikes.is_empty() || p.strikes.iter().any(|k| !(*k > 0.0)) {
            return Err(config("pricing.strikes: need at least one positive strike"));
        }
        if let Some(r) = &p.references {
            if r.len() != p.strikes.len() {
                return Err(config("pricing.references: one reference per strike"));
            }
        }
        if let Some(w) = &p.window {
            w.validate("pricing")?;
        }
        if let Some([a, b]) = p.cos_range {
            if !(a < b) {
                return Err(config("pricing.cos_range: lower must be below upper"));
            }
        }
        Ok(())
    }
}
