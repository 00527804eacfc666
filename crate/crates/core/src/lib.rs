//! Surrogate-assisted multiobjective search over 3-D segmentation cells.
//!
//! The engine minimizes an expected segmentation error and the log parameter
//! count with a decomposition-based evolutionary loop. A random forest trained
//! on every evaluated genome screens candidates so that only promising ones
//! are sent to the (expensive) evaluator.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod evaluators;
pub mod genome;
pub mod metrics;
pub mod objectives;
pub mod report;
pub mod seeds;
pub mod surrogate;

pub use adaptive::{SubproblemUtility, ValueScoreTable};
pub use decomposition::{dominates, pbi, DecompositionState};
pub use engine::{Checkpoint, Counters, Engine, EngineConfig, LogEntry, RunResult, RunState, Variant};
pub use error::{Result, SearchError};
pub use evaluators::{
    EvalError, EvaluationRecord, Evaluator, EvaluatorKind, ExternalEvaluator, Phase, SyntheticEvaluator,
    TabularEvaluator,
};
pub use genome::{enumerate_space, ArchitectureDescriptor, Genome, Operation, Restriction, SPACE_SIZE};
pub use metrics::{hypervolume, igd, non_dominated_indices, true_front, FrontSummary, TrueFront};
pub use objectives::{ObjectiveConfig, ObjectiveVector, TrainingMetrics};
pub use surrogate::{Forest, ForestConfig, SurrogateTrainingPopulation};
