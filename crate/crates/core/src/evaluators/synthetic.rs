//! Closed-form stand-in for partial training.
//!
//! Validation Dice grows with log capacity, with volumetric operations and
//! with deeper node chains, and peaks at learning-rate level 4. The constants
//! are frozen: external workers reimplement this formula bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EvalError, Evaluator};
use crate::genome::{Genome, Operation};
use crate::objectives::{ObjectiveConfig, TrainingMetrics};
use crate::seeds;

const CAPACITY_SCALE: f64 = 12.0;

fn quality(op: Operation) -> f64 {
    match op {
        Operation::Conv3d => 1.00,
        Operation::P3d => 0.92,
        Operation::Conv2d => 0.80,
    }
}

fn saturation(g: &Genome, cfg: &ObjectiveConfig) -> f64 {
    let params = g
        .param_count(cfg.num_classes)
        .expect("synthetic evaluation of a valid genome");
    let cap = (params as f64).ln();
    1.0 - (-cap / CAPACITY_SCALE).exp()
}

fn val_dice(g: &Genome, sat: f64, c: f64) -> f64 {
    let q_mean = g.ops().iter().map(|&o| quality(o)).sum::<f64>() / 4.0;
    let depth = g.decode().expect("valid genome").longest_path() as f64;
    let conn = 0.9 + 0.025 * depth;
    let pen = 1.0 - 0.02 * (f64::from(g.lr_level) - 4.0).abs();
    (c * sat * q_mean * conn * pen).clamp(0.0, c)
}

fn assemble(val: f64, sat: f64, cfg: &ObjectiveConfig) -> TrainingMetrics {
    let c = f64::from(cfg.num_classes);
    let e = f64::from(cfg.total_epochs);
    let e_max = (e * (0.5 + 0.5 * sat)).round().clamp(1.0, e) as u32;
    TrainingMetrics {
        mc_dice_train: (1.05 * val).min(c),
        mc_dice_val: val,
        e_max,
        total_epochs: cfg.total_epochs,
    }
}

/// Noise-free synthetic metrics of a valid genome.
pub fn synthetic_metrics(g: &Genome, cfg: &ObjectiveConfig) -> TrainingMetrics {
    let sat = saturation(g, cfg);
    assemble(val_dice(g, sat, f64::from(cfg.num_classes)), sat, cfg)
}

#[derive(Clone, Debug, Default)]
pub struct SyntheticEvaluator {
    noise_std: f64,
    seed: u64,
}

impl SyntheticEvaluator {
    pub fn new() -> Self {
        SyntheticEvaluator::default()
    }

    /// Adds `N(0, noise_std)` to validation Dice. The draw depends only on
    /// `seed` and the genome, so repeated evaluations agree.
    pub fn with_noise(noise_std: f64, seed: u64) -> Self {
        SyntheticEvaluator { noise_std, seed }
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&self, g: &Genome, cfg: &ObjectiveConfig) -> Result<TrainingMetrics, EvalError> {
        if !g.validate() {
            return Err(EvalError::Protocol(format!("invalid genome `{g}`")));
        }
        if self.noise_std == 0.0 {
            return Ok(synthetic_metrics(g, cfg));
        }
        let sat = saturation(g, cfg);
        let c = f64::from(cfg.num_classes);
        let key = g.indices().iter().fold(0u64, |acc, &v| acc * 16 + v as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(self.seed, "synthetic-noise", key));
        let noise = Normal::new(0.0, self.noise_std)
            .expect("finite noise_std")
            .sample(&mut rng);
        let val = (val_dice(g, sat, c) + noise).clamp(0.0, c);
        Ok(assemble(val, sat, cfg))
    }

    fn is_enumerable(&self) -> bool {
        true
    }
}
