//! Shared plumbing: config loading, oracle fronts and run summaries.

use std::fs;
use std::path::Path;

use anyhow::Context;
use cellsearch_core::engine::{EngineConfig, RunResult};
use cellsearch_core::genome::Restriction;
use cellsearch_core::metrics::{self, reference_point, TrueFront};
use cellsearch_core::{Counters, Variant};
use serde::{Deserialize, Serialize};

use crate::{CliResult, Failure};

pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<EngineConfig> {
    let mut cfg = EngineConfig::load(path)
        .with_context(|| format!("cannot load config {}", path.display()))
        .map_err(Failure::Usage)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Exact front of the configured evaluator over `restriction`, or `None` if
/// the evaluator cannot be enumerated. Searches always cover the full space,
/// so run summaries pass `None`.
pub fn oracle(cfg: &EngineConfig, restriction: Option<&Restriction>) -> anyhow::Result<Option<TrueFront>> {
    let evaluator = cfg.evaluator.build(cfg.seed)?;
    if !evaluator.is_enumerable() {
        return Ok(None);
    }
    let front = metrics::true_front(evaluator.as_ref(), &cfg.objective, restriction)?;
    Ok(Some(front))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub seed: u64,
    pub generations: u32,
    pub counters: Counters,
    pub nds_size: usize,
    /// Hypervolume reference point: the oracle's when available, otherwise
    /// the componentwise worst trained objective scaled the same way.
    pub reference: [f64; 2],
    pub hypervolume: f64,
    /// Archive members outside the reference box (excluded from the volume).
    pub outside_reference: usize,
    pub oracle_hypervolume: Option<f64>,
    pub hypervolume_ratio: Option<f64>,
    pub igd: Option<f64>,
}

impl RunSummary {
    pub fn new(
        cfg: &EngineConfig,
        result: &RunResult,
        worst_trained: [f64; 2],
        oracle: Option<&TrueFront>,
    ) -> anyhow::Result<Self> {
        let reference = oracle.map_or_else(|| reference_point(worst_trained), TrueFront::reference);
        let points: Vec<[f64; 2]> = result.nds.iter().map(|r| r.objectives.as_array()).collect();
        let inside: Vec<[f64; 2]> = points
            .iter()
            .copied()
            .filter(|p| p[0] < reference[0] && p[1] < reference[1])
            .collect();
        let hypervolume = metrics::hypervolume(&inside, reference)?;
        let igd = match oracle {
            Some(front) if !points.is_empty() => Some(metrics::igd(&points, front.points())?),
            _ => None,
        };
        let oracle_hv = oracle.map(|f| f.summary.hypervolume);
        Ok(RunSummary {
            variant: cfg.variant,
            seed: cfg.seed,
            generations: result.generations,
            counters: result.counters,
            nds_size: result.nds.len(),
            reference,
            hypervolume,
            outside_reference: points.len() - inside.len(),
            oracle_hypervolume: oracle_hv,
            hypervolume_ratio: oracle_hv.map(|o| hypervolume / o),
            igd,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes through a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot replace {}", path.display()))
}
