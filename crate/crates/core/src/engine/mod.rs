//! The search loop.
//!
//! Generation 1 trains a Latin hypercube population and seeds the archive,
//! the surrogate training set and the per-subproblem solutions. Generations
//! `2..=learning_generations` solve every subproblem once with uniform
//! mutation. Later generations fill `population` slots, each picking a
//! subproblem by utility, breeding with guided mutation and training the
//! child only if the surrogate test accepts it.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{uniform_probs, SubproblemUtility, ValueScoreTable};
use crate::decomposition::DecompositionState;
use crate::error::{Result, SearchError};
use crate::evaluators::{EvalError, EvaluationRecord, Evaluator, Phase};
use crate::genome::{Genome, GENE_CARDINALITIES, NUM_GENES};
use crate::objectives::{self, ObjectiveVector, TrainingMetrics};
use crate::seeds::{self, RngState};
use crate::surrogate::{self, encode, Forest, ForestConfig, SurrogateTrainingPopulation};

pub mod config;
pub mod lhs;
pub mod log;
pub mod operators;

pub use config::{EngineConfig, OracleConfig, Variant};
pub use lhs::{lhs_init, lhs_unit};
pub use log::{read_log, write_entry, Counters, LogEntry, Outcome, ProposalEntry};
pub use operators::{accept_candidate, make_child, Criterion, GenerationBests, Mutation};

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub config: EngineConfig,
    /// Completed generations.
    pub generation: u32,
    pub decomposition: Option<DecompositionState>,
    pub scores: ValueScoreTable,
    pub utility: SubproblemUtility,
    pub stp: SurrogateTrainingPopulation,
    /// Every trained record in training order.
    pub trained: Vec<EvaluationRecord>,
    pub rng: RngState,
    pub counters: Counters,
    pub next_seq: u64,
    /// Run-log length at the last generation boundary.
    pub log_bytes: u64,
    /// Training-set size the surrogate was last fitted on.
    #[serde(default)]
    pub last_fit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub state: RunState,
}

impl Checkpoint {
    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text)?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(SearchError::Config(format!(
                "unsupported checkpoint format {}",
                cp.format
            )));
        }
        cp.state.config.validate()?;
        Ok(cp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Archive sorted by `(f1, f2)`.
    pub nds: Vec<EvaluationRecord>,
    pub counters: Counters,
    pub generations: u32,
}

/// Surrogate output for one candidate.
#[derive(Clone, Copy, Debug)]
struct Prediction {
    ese: f64,
    dispersion: f64,
    f2: f64,
}

pub struct Engine {
    state: RunState,
    rng: ChaCha8Rng,
    evaluator: Box<dyn Evaluator>,
    index: HashMap<Genome, usize>,
    forest: Option<(usize, Forest)>,
}

impl Engine {
    /// Starts a run with the evaluator described by the configuration.
    pub fn new(config: EngineConfig) -> Result<Self> {
        let evaluator = config.evaluator.build(config.seed)?;
        Self::with_evaluator(config, evaluator)
    }

    pub fn with_evaluator(config: EngineConfig, evaluator: Box<dyn Evaluator>) -> Result<Self> {
        config.validate()?;
        let rng = seeds::stream(config.seed, "engine");
        let n = config.population;
        let state = RunState {
            generation: 0,
            decomposition: None,
            scores: ValueScoreTable::new(),
            utility: SubproblemUtility::new(n),
            stp: SurrogateTrainingPopulation::default(),
            trained: Vec::new(),
            rng: RngState::capture(&rng),
            counters: Counters::default(),
            next_seq: 0,
            log_bytes: 0,
            last_fit: None,
            config,
        };
        Ok(Engine {
            state,
            rng,
            evaluator,
            index: HashMap::new(),
            forest: None,
        })
    }

    pub fn resume(checkpoint: Checkpoint) -> Result<Self> {
        let evaluator = checkpoint.state.config.evaluator.build(checkpoint.state.config.seed)?;
        Self::resume_with_evaluator(checkpoint, evaluator)
    }

    pub fn resume_with_evaluator(checkpoint: Checkpoint, evaluator: Box<dyn Evaluator>) -> Result<Self> {
        let state = checkpoint.state;
        state.config.validate()?;
        let index = state.trained.iter().enumerate().map(|(i, r)| (r.genome, i)).collect();
        Ok(Engine {
            rng: state.rng.restore(),
            state,
            evaluator,
            index,
            forest: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.state.config
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.generation >= self.state.config.generations
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut state = self.state.clone();
        state.rng = RngState::capture(&self.rng);
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            state,
        }
    }

    pub fn result(&self) -> RunResult {
        let mut nds = self
            .state
            .decomposition
            .as_ref()
            .map(|d| d.nds.clone())
            .unwrap_or_default();
        nds.sort_by(|a, b| {
            a.objectives
                .f1
                .total_cmp(&b.objectives.f1)
                .then(a.objectives.f2.total_cmp(&b.objectives.f2))
        });
        RunResult {
            nds,
            counters: self.state.counters,
            generations: self.state.generation,
        }
    }

    pub fn phase_of(&self, generation: u32) -> Phase {
        let cfg = &self.state.config;
        if generation <= 1 {
            Phase::Init
        } else if cfg.variant == Variant::Samea && generation > cfg.learning_generations {
            Phase::Exploit
        } else {
            Phase::Learn
        }
    }

    /// Runs every remaining generation.
    pub fn run(&mut self, log: &mut dyn Write) -> Result<RunResult> {
        while !self.is_finished() {
            self.step(log)?;
        }
        Ok(self.result())
    }

    /// Runs generations until `generation` have completed (or the run ends).
    pub fn run_until(&mut self, generation: u32, log: &mut dyn Write) -> Result<()> {
        while !self.is_finished() && self.state.generation < generation {
            self.step(log)?;
        }
        Ok(())
    }

    /// Executes one generation.
    pub fn step(&mut self, log: &mut dyn Write) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let g = self.state.generation + 1;
        let phase = self.phase_of(g);
        let cfg = self.state.config.clone();
        let (mutation_probs, subproblem_probs) = match phase {
            Phase::Exploit => (
                self.state.scores.all_mutation_probs(cfg.epsilon),
                Some(self.state.utility.probs(cfg.epsilon_subproblem)),
            ),
            _ => (uniform_probs(), None),
        };
        self.emit(
            log,
            &LogEntry::GenerationStart {
                generation: g,
                phase,
                variant: cfg.variant,
                score_table: self.state.scores.clone(),
                mutation_probs: mutation_probs.clone(),
                subproblem_probs: subproblem_probs.clone(),
                utility: self.state.utility.utility.clone(),
            },
        )?;

        let mut contributed = vec![false; cfg.population];
        let successes = match (phase, cfg.variant) {
            (Phase::Init, _) => self.init_generation(log)?,
            (Phase::Learn, Variant::Random) => self.random_generation(g, log)?,
            (Phase::Learn, _) => self.learn_generation(g, &mut contributed, log)?,
            (Phase::Exploit, _) => self.exploit_generation(
                g,
                &mutation_probs,
                subproblem_probs.as_deref().expect("exploit probabilities"),
                &mut contributed,
                log,
            )?,
        };
        if successes == 0 {
            return Err(SearchError::GenerationFailed(g));
        }
        if g >= 2 && cfg.variant != Variant::Random {
            for (i, &c) in contributed.iter().enumerate() {
                self.state.utility.record_contribution(i, c, cfg.gamma);
            }
        }
        let d = self.state.decomposition.as_ref().expect("initialized");
        let end = LogEntry::GenerationEnd {
            generation: g,
            nds_size: d.nds.len(),
            ideal: d.ideal,
            nadir: d.nadir,
            counters: self.state.counters,
        };
        self.emit(log, &end)?;
        self.state.generation = g;
        Ok(())
    }

    fn emit(&mut self, log: &mut dyn Write, entry: &LogEntry) -> Result<()> {
        self.state.log_bytes += write_entry(log, entry)?;
        Ok(())
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.state.next_seq;
        self.state.next_seq += 1;
        s
    }

    fn decomposition(&mut self) -> &mut DecompositionState {
        self.state.decomposition.as_mut().expect("initialized")
    }

    fn blank_entry(
        &self,
        seq: u64,
        g: u32,
        phase: Phase,
        origin: Option<usize>,
        attempt: u32,
        genome: Genome,
    ) -> ProposalEntry {
        ProposalEntry {
            seq,
            generation: g,
            phase,
            subproblem: origin,
            attempt,
            genome,
            outcome: Outcome::Rejected,
            criterion: None,
            predicted_ese: None,
            dispersion: None,
            predicted_f2: None,
            objectives: None,
            metrics: None,
            entered_nds: false,
            replaced: 0,
            error: None,
        }
    }

    /// Adds a freshly trained record to every store. Returns whether it
    /// entered the archive and how many neighbors it replaced.
    fn absorb(&mut self, record: &EvaluationRecord, origin: Option<usize>) -> Result<(bool, usize)> {
        let ese_max = self.state.config.objective.ese_max();
        self.state
            .scores
            .record_trained(&record.genome, record.objectives.f1, ese_max)?;
        self.state.stp.push(&record.genome, record.objectives.f1)?;
        let d = self.decomposition();
        let replaced = origin.map_or(0, |o| d.update_pns(record, o));
        let entered = d.update_nds(record.clone());
        self.index.insert(record.genome, self.state.trained.len());
        self.state.trained.push(record.clone());
        self.state.counters.trained += 1;
        Ok((entered, replaced))
    }

    /// Answers a duplicate proposal from the cache. Returns `None` if the
    /// genome was never trained, else whether it improved a neighbor.
    fn try_cache(
        &mut self,
        entry: &mut ProposalEntry,
        origin: Option<usize>,
        log: &mut dyn Write,
    ) -> Result<Option<bool>> {
        let Some(&i) = self.index.get(&entry.genome) else {
            return Ok(None);
        };
        let record = self.state.trained[i].clone();
        let replaced = match origin {
            Some(o) => self.decomposition().update_pns(&record, o),
            None => 0,
        };
        self.state.counters.cache_hits += 1;
        entry.outcome = Outcome::CacheHit;
        entry.objectives = Some(record.objectives);
        entry.metrics = Some(record.metrics);
        entry.replaced = replaced;
        self.emit(log, &LogEntry::Proposal(entry.clone()))?;
        Ok(Some(replaced > 0))
    }

    /// Trains `entry.genome` and commits the result. Returns `None` if the
    /// evaluator failed, else whether the record contributed.
    fn train(&mut self, mut entry: ProposalEntry, origin: Option<usize>, log: &mut dyn Write) -> Result<Option<bool>> {
        let cfg = self.state.config.objective.clone();
        match self.evaluator.evaluate(&entry.genome, &cfg) {
            Ok(metrics) => {
                let record =
                    EvaluationRecord::new(entry.genome, metrics, &cfg, entry.generation, entry.phase, entry.seq)?;
                let (entered, replaced) = self.absorb(&record, origin)?;
                entry.outcome = Outcome::Trained;
                entry.objectives = Some(record.objectives);
                entry.metrics = Some(record.metrics);
                entry.entered_nds = entered;
                entry.replaced = replaced;
                self.emit(log, &LogEntry::Proposal(entry))?;
                Ok(Some(entered || replaced > 0))
            }
            Err(e) => {
                self.state.counters.failed += 1;
                entry.outcome = Outcome::Failed;
                entry.error = Some(e.to_string());
                self.emit(log, &LogEntry::Proposal(entry))?;
                Ok(None)
            }
        }
    }

    fn parents(&mut self, subproblem: usize) -> (Genome, Genome) {
        let d = self.state.decomposition.as_ref().expect("initialized");
        let hood = d.neighborhood(subproblem);
        let picks = index::sample(&mut self.rng, hood.len(), 2);
        (
            d.subproblems[hood[picks.index(0)]].current.genome,
            d.subproblems[hood[picks.index(1)]].current.genome,
        )
    }

    fn init_generation(&mut self, log: &mut dyn Write) -> Result<usize> {
        let cfg = self.state.config.clone();
        let mut population = lhs_init(cfg.population, &mut seeds::stream(cfg.seed, "lhs"));
        population.sort();

        // Training order does not matter here; results are committed in
        // canonical genome order.
        let evaluator = &self.evaluator;
        let outcomes: Vec<Vec<std::result::Result<TrainingMetrics, EvalError>>> = population
            .par_iter()
            .map(|g| {
                let mut tries = Vec::new();
                for _ in 0..cfg.max_attempts {
                    let r = evaluator.evaluate(g, &cfg.objective);
                    let ok = r.is_ok();
                    tries.push(r);
                    if ok {
                        break;
                    }
                }
                tries
            })
            .collect();

        let mut pending = Vec::new();
        let mut records = Vec::new();
        let mut seen: HashMap<Genome, usize> = HashMap::new();
        for (g, tries) in population.iter().zip(outcomes) {
            if let Some(&first) = seen.get(g) {
                let seq = self.next_seq();
                self.state.counters.proposed += 1;
                let mut entry = self.blank_entry(seq, 1, Phase::Init, None, 1, *g);
                entry.outcome = Outcome::CacheHit;
                pending.push((entry, Some(first)));
                continue;
            }
            for (attempt, r) in tries.into_iter().enumerate() {
                self.state.counters.proposed += 1;
                let seq = self.next_seq();
                let mut entry = self.blank_entry(seq, 1, Phase::Init, None, attempt as u32 + 1, *g);
                match r {
                    Ok(metrics) => {
                        let record = EvaluationRecord::new(*g, metrics, &cfg.objective, 1, Phase::Init, seq)?;
                        entry.outcome = Outcome::Trained;
                        seen.insert(*g, records.len());
                        pending.push((entry, Some(records.len())));
                        records.push(record);
                    }
                    Err(e) => {
                        self.state.counters.failed += 1;
                        entry.outcome = Outcome::Failed;
                        entry.error = Some(e.to_string());
                        pending.push((entry, None));
                    }
                }
            }
        }
        if records.is_empty() {
            for (entry, _) in pending {
                self.emit(log, &LogEntry::Proposal(entry))?;
            }
            return Err(SearchError::GenerationFailed(1));
        }

        self.state.decomposition = Some(DecompositionState::new(
            cfg.population,
            cfg.neighborhood,
            cfg.theta_pbi,
            &records,
        )?);
        let mut entered = vec![false; records.len()];
        for (i, r) in records.iter().enumerate() {
            entered[i] = self.absorb(r, None)?.0;
        }
        let successes = pending.iter().filter(|(e, _)| e.outcome != Outcome::Failed).count();
        for (mut entry, rec) in pending {
            if let Some(i) = rec {
                entry.objectives = Some(records[i].objectives);
                entry.metrics = Some(records[i].metrics);
                if entry.outcome == Outcome::Trained {
                    entry.entered_nds = entered[i];
                } else {
                    self.state.counters.cache_hits += 1;
                }
            }
            self.emit(log, &LogEntry::Proposal(entry))?;
        }
        Ok(successes)
    }

    fn learn_generation(&mut self, g: u32, contributed: &mut [bool], log: &mut dyn Write) -> Result<usize> {
        let cfg = self.state.config.clone();
        let mut successes = 0;
        for (i, slot) in contributed.iter_mut().enumerate() {
            for attempt in 1..=cfg.max_attempts {
                let (a, b) = self.parents(i);
                let child = make_child((&a, &b), Mutation::Uniform, cfg.mutation_rate, &mut self.rng);
                let seq = self.next_seq();
                self.state.counters.proposed += 1;
                let mut entry = self.blank_entry(seq, g, Phase::Learn, Some(i), attempt, child);
                let outcome = match self.try_cache(&mut entry, Some(i), log)? {
                    Some(c) => Some(c),
                    None => self.train(entry, Some(i), log)?,
                };
                if let Some(c) = outcome {
                    *slot |= c;
                    successes += 1;
                    break;
                }
            }
        }
        Ok(successes)
    }

    fn random_generation(&mut self, g: u32, log: &mut dyn Write) -> Result<usize> {
        let cfg = self.state.config.clone();
        let mut successes = 0;
        for slot in 0..cfg.population {
            for attempt in 1..=cfg.max_attempts {
                let mut idx = [0usize; NUM_GENES];
                for (k, v) in idx.iter_mut().enumerate() {
                    *v = self.rng.random_range(0..GENE_CARDINALITIES[k]);
                }
                let child = Genome::from_indices(idx)?;
                let seq = self.next_seq();
                self.state.counters.proposed += 1;
                let mut entry = self.blank_entry(seq, g, Phase::Learn, Some(slot), attempt, child);
                let outcome = match self.try_cache(&mut entry, Some(slot), log)? {
                    Some(c) => Some(c),
                    None => self.train(entry, Some(slot), log)?,
                };
                if outcome.is_some() {
                    successes += 1;
                    break;
                }
            }
        }
        Ok(successes)
    }

    fn forest(&mut self) -> Result<&Forest> {
        let n = self.state.stp.len();
        if self.forest.as_ref().is_none_or(|(len, _)| *len != n) {
            let cfg = ForestConfig {
                seed: seeds::derive_indexed(self.state.config.seed, "forest", n as u64),
                ..self.state.config.forest.clone()
            };
            let forest = surrogate::fit(&self.state.stp, &cfg)?;
            // a resumed engine rebuilds the forest it had already fitted
            if self.state.last_fit != Some(n) {
                self.state.counters.surrogate_fits += 1;
                self.state.last_fit = Some(n);
            }
            self.forest = Some((n, forest));
        }
        Ok(&self.forest.as_ref().expect("fitted").1)
    }

    fn predict(&mut self, genome: &Genome) -> Result<Prediction> {
        let x = encode(genome)?;
        let (ese, dispersion) = self.forest()?.predict(&x);
        self.state.counters.surrogate_predictions += 1;
        let f2 = objectives::f2(genome.param_count(self.state.config.objective.num_classes)?)?;
        Ok(Prediction { ese, dispersion, f2 })
    }

    fn exploit_generation(
        &mut self,
        g: u32,
        mutation_probs: &[Vec<f64>],
        subproblem_probs: &[f64],
        contributed: &mut [bool],
        log: &mut dyn Write,
    ) -> Result<usize> {
        let cfg = self.state.config.clone();
        let mut bests = GenerationBests::default();
        let mut successes = 0;
        for _slot in 0..cfg.population {
            let mut rejected: Vec<(ProposalEntry, usize)> = Vec::new();
            let mut done = false;
            for attempt in 1..=cfg.max_attempts {
                let n = operators::sample_index(subproblem_probs, &mut self.rng);
                let (a, b) = self.parents(n);
                let child = make_child(
                    (&a, &b),
                    Mutation::Guided(mutation_probs),
                    cfg.mutation_rate,
                    &mut self.rng,
                );
                let seq = self.next_seq();
                self.state.counters.proposed += 1;
                let mut entry = self.blank_entry(seq, g, Phase::Exploit, Some(n), attempt, child);
                if let Some(c) = self.try_cache(&mut entry, Some(n), log)? {
                    contributed[n] |= c;
                    successes += 1;
                    done = true;
                    break;
                }

                let p = self.predict(&child)?;
                entry.predicted_ese = Some(p.ese);
                entry.dispersion = Some(p.dispersion);
                entry.predicted_f2 = Some(p.f2);
                let predicted = ObjectiveVector::new(p.ese, p.f2);
                let d = self.state.decomposition.as_ref().expect("initialized");
                let criterion = accept_candidate(d, n, &predicted, p.dispersion, &bests);
                bests.absorb(p.ese, p.dispersion);
                match criterion {
                    Some(c) => {
                        entry.criterion = Some(c);
                        if let Some(contrib) = self.train(entry, Some(n), log)? {
                            contributed[n] |= contrib;
                            successes += 1;
                            done = true;
                            break;
                        }
                    }
                    None => {
                        self.state.counters.discarded += 1;
                        self.emit(log, &LogEntry::Proposal(entry.clone()))?;
                        rejected.push((entry, n));
                    }
                }
            }
            if done {
                continue;
            }
            let best = rejected.into_iter().reduce(|best, cand| {
                if cand.0.predicted_ese < best.0.predicted_ese {
                    cand
                } else {
                    best
                }
            });
            if let Some((mut entry, n)) = best {
                self.state.counters.forced += 1;
                entry.seq = self.next_seq();
                entry.criterion = Some(Criterion::Forced);
                if let Some(contrib) = self.train(entry, Some(n), log)? {
                    contributed[n] |= contrib;
                    successes += 1;
                }
            }
        }
        Ok(successes)
    }
}

/// Runs a whole search with the configured evaluator.
pub fn run(config: &EngineConfig, log: &mut dyn Write) -> Result<RunResult> {
    Engine::new(config.clone())?.run(log)
}
