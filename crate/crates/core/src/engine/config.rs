use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};
use crate::evaluators::EvaluatorKind;
use crate::genome::Restriction;
use crate::objectives::ObjectiveConfig;
use crate::surrogate::ForestConfig;

/// Search strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Learning phase, then surrogate filtering with guided mutation and
    /// utility-driven subproblem selection.
    #[default]
    Samea,
    /// Learning phase for every generation: uniform mutation, each
    /// subproblem once per generation, no surrogate.
    Mea,
    /// Shared initial population, then uniformly random genomes.
    Random,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Samea, Variant::Mea, Variant::Random];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Samea => "samea",
            Variant::Mea => "mea",
            Variant::Random => "random",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "samea" => Ok(Variant::Samea),
            "mea" => Ok(Variant::Mea),
            "random" => Ok(Variant::Random),
            other => Err(SearchError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Restricts the enumerated space used for the true front.
    pub restriction: Option<Restriction>,
}

/// Everything a run needs. Top-level TOML keys are the search parameters;
/// `[objective]`, `[forest]`, `[evaluator]` and `[oracle]` are sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub population: usize,
    pub neighborhood: usize,
    pub generations: u32,
    pub learning_generations: u32,
    /// Floor added to normalized value scores before guided mutation.
    pub epsilon: f64,
    /// Floor added to subproblem utilities.
    pub epsilon_subproblem: f64,
    pub theta_pbi: f64,
    /// Utility decay per generation.
    pub gamma: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Surrogate rejections tolerated per slot before force-accepting.
    pub max_attempts: u32,
    pub seed: u64,
    pub variant: Variant,
    pub objective: ObjectiveConfig,
    pub forest: ForestConfig,
    pub evaluator: EvaluatorKind,
    pub oracle: OracleConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population: 10,
            neighborhood: 4,
            generations: 40,
            learning_generations: 10,
            epsilon: 0.002,
            epsilon_subproblem: 0.002,
            theta_pbi: 5.0,
            gamma: 0.9,
            mutation_rate: 0.2,
            max_attempts: 10,
            seed: 0,
            variant: Variant::Samea,
            objective: ObjectiveConfig::default(),
            forest: ForestConfig::default(),
            evaluator: EvaluatorKind::default(),
            oracle: OracleConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SearchError::Config(msg));
        if self.population < 2 {
            return fail(format!("population must be >= 2, got {}", self.population));
        }
        if self.neighborhood < 2 || self.neighborhood > self.population {
            return fail(format!(
                "neighborhood must lie in 2..=population ({}), got {}",
                self.population, self.neighborhood
            ));
        }
        if !(1 < self.learning_generations && self.learning_generations < self.generations) {
            return fail(format!(
                "learning_generations must satisfy 1 < {} < generations ({})",
                self.learning_generations, self.generations
            ));
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return fail(format!("mutation_rate must lie in (0, 1], got {}", self.mutation_rate));
        }
        if !(self.epsilon > 0.0) || !(self.epsilon_subproblem > 0.0) {
            return fail("epsilon and epsilon_subproblem must be > 0".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.theta_pbi >= 0.0) {
            return fail(format!("theta_pbi must be >= 0, got {}", self.theta_pbi));
        }
        if self.max_attempts < 1 {
            return fail("max_attempts must be >= 1".into());
        }
        if let Some(r) = &self.oracle.restriction {
            r.gene_indices()?;
        }
        self.objective.validate()?;
        self.forest.validate()?;
        self.evaluator.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| SearchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
