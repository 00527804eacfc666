use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use cellsearch_core::genome::Restriction;
use cellsearch_core::metrics::FrontSummary;
use cellsearch_core::report::{self, FrontRow};
use serde::Serialize;

use crate::summary;
use crate::{CliResult, Failure};

pub const FRONT_FILE: &str = "true_front.csv";
pub const SUMMARY_FILE: &str = "oracle_summary.json";

#[derive(Serialize)]
struct OracleSummary<'a> {
    evaluated: usize,
    /// Genomes on the front; several may share one objective vector.
    members: usize,
    worst: [f64; 2],
    restriction: Option<&'a Restriction>,
    front: &'a FrontSummary,
}

pub fn cmd_oracle(config: &Path, out: &Path) -> CliResult<()> {
    let cfg = summary::load_config(config, None)?;
    let front = summary::oracle(&cfg, cfg.oracle.restriction.as_ref())?.ok_or_else(|| {
        Failure::Usage(anyhow!(
            "the configured evaluator cannot be enumerated; use a synthetic or tabular evaluator"
        ))
    })?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let rows = front
        .members
        .iter()
        .map(|m| m.row(cfg.objective.num_classes))
        .collect::<Result<Vec<FrontRow>, _>>()?;
    let mut csv = Vec::new();
    report::write_front(&mut csv, &rows)?;
    summary::write_atomic(&out.join(FRONT_FILE), &csv)?;
    summary::write_json(
        &out.join(SUMMARY_FILE),
        &OracleSummary {
            evaluated: front.evaluated,
            members: front.members.len(),
            worst: front.worst,
            restriction: cfg.oracle.restriction.as_ref(),
            front: &front.summary,
        },
    )?;
    println!(
        "enumerated {} genomes: {} front members, {} distinct points, hypervolume {:.6}",
        front.evaluated,
        front.members.len(),
        front.summary.cardinality,
        front.summary.hypervolume
    );
    Ok(())
}
