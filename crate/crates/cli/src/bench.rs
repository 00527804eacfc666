use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use cellsearch_core::engine::{Engine, EngineConfig, Variant};
use serde::Serialize;

use crate::run::worst_trained;
use crate::summary::{self, RunSummary};
use crate::{CliResult, Failure};

pub const TABLE_FILE: &str = "bench.csv";

pub fn parse_variants(text: &str) -> anyhow::Result<Vec<Variant>> {
    let variants = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Variant>().map_err(|e| anyhow!(e)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if variants.is_empty() {
        return Err(anyhow!("no variants given"));
    }
    Ok(variants)
}

/// `a..b` (inclusive) or `a,b,c`.
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let bad = || anyhow!("bad seed list `{text}`");
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<anyhow::Result<Vec<u64>>>()?;
    Ok(seeds)
}

#[derive(Serialize)]
struct Row {
    variant: Variant,
    seed: u64,
    proposed: u64,
    trained: u64,
    cache_hits: u64,
    discarded: u64,
    forced: u64,
    nds_size: usize,
    hypervolume: f64,
    hypervolume_ratio: Option<f64>,
    igd: Option<f64>,
}

impl From<&RunSummary> for Row {
    fn from(s: &RunSummary) -> Self {
        Row {
            variant: s.variant,
            seed: s.seed,
            proposed: s.counters.proposed,
            trained: s.counters.trained,
            cache_hits: s.counters.cache_hits,
            discarded: s.counters.discarded,
            forced: s.counters.forced,
            nds_size: s.nds_size,
            hypervolume: s.hypervolume,
            hypervolume_ratio: s.hypervolume_ratio,
            igd: s.igd,
        }
    }
}

pub fn cmd_bench(config: &Path, variants: &str, seeds: &str, out: &Path) -> CliResult<()> {
    let base = summary::load_config(config, None)?;
    let variants = parse_variants(variants).map_err(Failure::Usage)?;
    let seeds = parse_seeds(seeds).map_err(Failure::Usage)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let oracle = summary::oracle(&base, None)?;

    let mut table = Vec::new();
    for &variant in &variants {
        for &seed in &seeds {
            let cfg = EngineConfig {
                variant,
                seed,
                ..base.clone()
            };
            let dir = out.join(format!("{variant}-{seed}"));
            fs::create_dir_all(&dir)?;
            let mut log = BufWriter::new(File::create(dir.join(crate::run::LOG_FILE))?);
            let mut engine = Engine::new(cfg.clone())?;
            let result = engine.run(&mut log)?;
            log.flush()?;
            let record = RunSummary::new(&cfg, &result, worst_trained(&engine)?, oracle.as_ref())?;
            summary::write_json(&dir.join(crate::run::SUMMARY_FILE), &record)?;
            table.push(Row::from(&record));
        }
    }

    let mut w = csv::Writer::from_path(out.join(TABLE_FILE))?;
    for row in &table {
        w.serialize(row)?;
    }
    w.flush()?;

    println!(
        "{:<8} {:>5} {:>9} {:>8} {:>11} {:>10} {:>10}",
        "variant", "seed", "proposed", "trained", "hypervolume", "hv_ratio", "igd"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for r in &table {
        println!(
            "{:<8} {:>5} {:>9} {:>8} {:>11.4} {:>10} {:>10}",
            r.variant.to_string(),
            r.seed,
            r.proposed,
            r.trained,
            r.hypervolume,
            opt(r.hypervolume_ratio),
            opt(r.igd)
        );
    }
    for &variant in &variants {
        let rows: Vec<&Row> = table.iter().filter(|r| r.variant == variant).collect();
        let trained = median(rows.iter().map(|r| r.trained as f64).collect());
        let hv = median(rows.iter().map(|r| r.hypervolume).collect());
        println!("median {variant}: trained {trained:.1}, hypervolume {hv:.4}");
    }
    Ok(())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
