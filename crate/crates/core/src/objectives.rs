//! Expected segmentation error (ESE) and log model size.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    /// Multi-class Dice on the training split, summed over classes: `[0, C]`.
    pub mc_dice_train: f64,
    pub mc_dice_val: f64,
    /// 1-based epoch of the best validation Dice.
    pub e_max: u32,
    pub total_epochs: u32,
}

impl TrainingMetrics {
    pub fn check(&self, cfg: &ObjectiveConfig) -> Result<()> {
        let c = f64::from(cfg.num_classes);
        for (what, v) in [("mc_dice_train", self.mc_dice_train), ("mc_dice_val", self.mc_dice_val)] {
            if !(0.0..=c).contains(&v) {
                return Err(SearchError::Range { what, value: v });
            }
        }
        if self.total_epochs != cfg.total_epochs {
            return Err(SearchError::Range {
                what: "total_epochs",
                value: f64::from(self.total_epochs),
            });
        }
        if self.e_max < 1 || self.e_max > self.total_epochs {
            return Err(SearchError::Range {
                what: "e_max",
                value: f64::from(self.e_max),
            });
        }
        Ok(())
    }
}

/// Objective vector, both components minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectiveVector {
    pub fn new(f1: f64, f2: f64) -> Self {
        ObjectiveVector { f1, f2 }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.f1, self.f2]
    }
}

impl From<[f64; 2]> for ObjectiveVector {
    fn from(v: [f64; 2]) -> Self {
        ObjectiveVector { f1: v[0], f2: v[1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub beta: f64,
    pub num_classes: u32,
    pub total_epochs: u32,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            alpha: 0.25,
            beta: 0.10,
            num_classes: 4,
            total_epochs: 60,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(SearchError::Config(
                "objective.alpha and objective.beta must be >= 0".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(SearchError::Config("objective.num_classes must be >= 2".into()));
        }
        if self.total_epochs < 1 {
            return Err(SearchError::Config("objective.total_epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Upper bound of [`ese`]: zero Dice everywhere and the full lateness
    /// penalty.
    pub fn ese_max(&self) -> f64 {
        (self.alpha + 1.0) * f64::from(self.num_classes) + self.beta
    }
}

/// `alpha (C - dice_train) + (C - dice_val) + beta (E - e_max) / E`
pub fn ese(m: &TrainingMetrics, cfg: &ObjectiveConfig) -> Result<f64> {
    m.check(cfg)?;
    let c = f64::from(cfg.num_classes);
    let e = f64::from(cfg.total_epochs);
    Ok(cfg.alpha * (c - m.mc_dice_train) + (c - m.mc_dice_val) + cfg.beta * (e - f64::from(m.e_max)) / e)
}

/// Natural log of the parameter count.
pub fn f2(param_count: u64) -> Result<f64> {
    if param_count < 1 {
        return Err(SearchError::Domain("parameter count must be >= 1".into()));
    }
    Ok((param_count as f64).ln())
}

pub fn objectives(m: &TrainingMetrics, param_count: u64, cfg: &ObjectiveConfig) -> Result<ObjectiveVector> {
    Ok(ObjectiveVector::new(ese(m, cfg)?, f2(param_count)?))
}
