//! Flat JSON configuration file. Every key is optional; missing keys keep
//! their defaults and unknown keys are rejected.
//!
//! ```json
//! { "lai_threshold": 25, "weighting": "frame", "workers": 4 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attributes::AttributeConfig;
use crate::dataset::ValidationConfig;
use crate::metrics::{MetricsConfig, NormDivisor, Weighting};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub lr_area: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub lai_threshold: f64,
    pub lai_expansion: f64,
    pub state_fraction: f64,
    pub precision_threshold: f64,
    pub norm_divisor: NormDivisor,
    pub weighting: Weighting,
    pub max_box_fraction: f64,
    pub min_length: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let a = AttributeConfig::default();
        let m = MetricsConfig::default();
        let v = ValidationConfig::default();
        Self {
            lr_area: a.lr_area,
            ratio_low: a.ratio_low,
            ratio_high: a.ratio_high,
            lai_threshold: a.lai_threshold,
            lai_expansion: a.lai_expansion,
            state_fraction: a.state_fraction,
            precision_threshold: m.precision_threshold,
            norm_divisor: m.norm_divisor,
            weighting: m.weighting,
            max_box_fraction: v.max_box_fraction,
            min_length: v.min_length,
            workers: 1,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("lr_area", self.lr_area),
            ("ratio_low", self.ratio_low),
            ("ratio_high", self.ratio_high),
            ("lai_expansion", self.lai_expansion),
            ("precision_threshold", self.precision_threshold),
            ("max_box_fraction", self.max_box_fraction),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{key} must be a positive number")));
            }
        }
        if self.ratio_low > self.ratio_high {
            return Err(Error::invalid("ratio_low must not exceed ratio_high"));
        }
        if !(self.state_fraction > 0.0 && self.state_fraction <= 1.0) {
            return Err(Error::invalid("state_fraction must be in (0, 1]"));
        }
        if !self.lai_threshold.is_finite() {
            return Err(Error::invalid("lai_threshold must be finite"));
        }
        Ok(())
    }

    pub fn attributes(&self) -> AttributeConfig {
        AttributeConfig {
            lr_area: self.lr_area,
            ratio_low: self.ratio_low,
            ratio_high: self.ratio_high,
            lai_threshold: self.lai_threshold,
            lai_expansion: self.lai_expansion,
            state_fraction: self.state_fraction,
        }
    }

    pub fn metrics(&self) -> MetricsConfig {
        MetricsConfig {
            precision_threshold: self.precision_threshold,
            norm_divisor: self.norm_divisor,
            weighting: self.weighting,
        }
    }

    pub fn validation(&self) -> ValidationConfig {
        ValidationConfig {
            max_box_fraction: self.max_box_fraction,
            min_length: self.min_length,
        }
    }
}
