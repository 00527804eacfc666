//! Pluggable genome evaluation.
//!
//! Training is out of reach of this crate; an [`Evaluator`] turns a genome
//! into [`TrainingMetrics`] by whatever means it has: a closed-form synthetic
//! landscape, a lookup table or an external worker process.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::genome::Genome;
use crate::objectives::{self, ObjectiveConfig, ObjectiveVector, TrainingMetrics};

pub mod external;
pub mod synthetic;
pub mod tabular;

pub use external::ExternalEvaluator;
pub use synthetic::{synthetic_metrics, SyntheticEvaluator};
pub use tabular::TabularEvaluator;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no table row for genome `{0}`")]
    MissingRow(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("worker did not answer within {0:.1}s")]
    Timeout(f64),

    #[error("worker reported failure: {0}")]
    Worker(String),

    #[error("cannot launch worker `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot load table {path}: {message}")]
    Table { path: PathBuf, message: String },
}

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, genome: &Genome, cfg: &ObjectiveConfig) -> std::result::Result<TrainingMetrics, EvalError>;

    /// Deterministic and cheap enough to sweep the whole space.
    fn is_enumerable(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorKind {
    Synthetic {
        /// Standard deviation of additive Gaussian noise on validation Dice.
        #[serde(default)]
        noise_std: f64,
    },
    Tabular {
        path: PathBuf,
    },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_timeout() -> f64 {
    3600.0
}

impl Default for EvaluatorKind {
    fn default() -> Self {
        EvaluatorKind::Synthetic { noise_std: 0.0 }
    }
}

impl EvaluatorKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            EvaluatorKind::Synthetic { noise_std } if !(*noise_std >= 0.0) => {
                Err(crate::SearchError::Config("evaluator.noise_std must be >= 0".into()))
            }
            EvaluatorKind::External { timeout_secs, .. } if !(*timeout_secs > 0.0) => {
                Err(crate::SearchError::Config("evaluator.timeout_secs must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the evaluator. `seed` drives the synthetic noise stream.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Evaluator>> {
        self.validate()?;
        Ok(match self {
            EvaluatorKind::Synthetic { noise_std } => Box::new(SyntheticEvaluator::with_noise(*noise_std, seed)),
            EvaluatorKind::Tabular { path } => Box::new(TabularEvaluator::load(path)?),
            EvaluatorKind::External {
                command,
                args,
                timeout_secs,
            } => Box::new(ExternalEvaluator::new(command.clone(), args.clone(), *timeout_secs)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Init,
    Learn,
    Exploit,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "INIT",
            Phase::Learn => "LEARN",
            Phase::Exploit => "EXPLOIT",
        })
    }
}

/// One trained genome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub genome: Genome,
    pub metrics: TrainingMetrics,
    pub objectives: ObjectiveVector,
    pub param_count: u64,
    pub generation: u32,
    pub phase: Phase,
    pub attempt_id: u64,
}

impl EvaluationRecord {
    pub fn new(
        genome: Genome,
        metrics: TrainingMetrics,
        cfg: &ObjectiveConfig,
        generation: u32,
        phase: Phase,
        attempt_id: u64,
    ) -> Result<Self> {
        let param_count = genome.param_count(cfg.num_classes)?;
        let objectives = objectives::objectives(&metrics, param_count, cfg)?;
        Ok(EvaluationRecord {
            genome,
            metrics,
            objectives,
            param_count,
            generation,
            phase,
            attempt_id,
        })
    }

    /// Recomputes the objective vector from the stored metrics.
    pub fn recompute(&self, cfg: &ObjectiveConfig) -> Result<ObjectiveVector> {
        let params = self.genome.param_count(cfg.num_classes)?;
        objectives::objectives(&self.metrics, params, cfg)
    }
}
