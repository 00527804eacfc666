//! Line-delimited JSON run log.
//!
//! Entries carry a logical sequence number instead of wall-clock time so two
//! runs with the same seed produce byte-identical logs.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::operators::Criterion;
use crate::adaptive::ValueScoreTable;
use crate::evaluators::Phase;
use crate::genome::Genome;
use crate::objectives::{ObjectiveVector, TrainingMetrics};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Candidate genomes generated.
    pub proposed: u64,
    /// Evaluator calls that returned metrics.
    pub trained: u64,
    /// Proposals answered from previously trained records.
    pub cache_hits: u64,
    /// Proposals rejected by the surrogate test.
    pub discarded: u64,
    /// Evaluator calls that failed.
    pub failed: u64,
    /// Rejected candidates trained after the attempt budget ran out.
    pub forced: u64,
    pub surrogate_fits: u64,
    pub surrogate_predictions: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Trained,
    CacheHit,
    Rejected,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalEntry {
    pub seq: u64,
    pub generation: u32,
    pub phase: Phase,
    pub subproblem: Option<usize>,
    pub attempt: u32,
    pub genome: Genome,
    pub outcome: Outcome,
    pub criterion: Option<Criterion>,
    pub predicted_ese: Option<f64>,
    pub dispersion: Option<f64>,
    pub predicted_f2: Option<f64>,
    pub objectives: Option<ObjectiveVector>,
    pub metrics: Option<TrainingMetrics>,
    pub entered_nds: bool,
    pub replaced: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    /// Selection state in force for the whole generation.
    GenerationStart {
        generation: u32,
        phase: Phase,
        variant: Variant,
        score_table: ValueScoreTable,
        mutation_probs: Vec<Vec<f64>>,
        subproblem_probs: Option<Vec<f64>>,
        utility: Vec<f64>,
    },
    Proposal(ProposalEntry),
    GenerationEnd {
        generation: u32,
        nds_size: usize,
        ideal: [f64; 2],
        nadir: [f64; 2],
        counters: Counters,
    },
}

/// Writes one entry as a JSON line; returns the bytes written.
pub fn write_entry(out: &mut dyn Write, entry: &LogEntry) -> io::Result<u64> {
    let mut line = serde_json::to_string(entry).map_err(io::Error::other)?;
    line.push('\n');
    out.write_all(line.as_bytes())?;
    Ok(line.len() as u64)
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogEntry>, crate::SearchError> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
