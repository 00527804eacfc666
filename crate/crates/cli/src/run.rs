use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use anyhow::{bail, Context};
use cellsearch_core::engine::{Checkpoint, Engine};
use cellsearch_core::report::{self, FrontRow};

use crate::summary::{self, RunSummary};
use crate::{CliResult, Failure};

pub const LOG_FILE: &str = "run_log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const FRONT_FILE: &str = "nds.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn cmd_run(config: &Path, seed: Option<u64>, out: &Path, stop_after: Option<u32>) -> CliResult<()> {
    let cfg = summary::load_config(config, seed)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let engine = Engine::new(cfg)?;
    let log = File::create(out.join(LOG_FILE)).context("cannot create run log")?;
    drive(engine, log, out, stop_after)
}

pub fn cmd_resume(checkpoint: &Path) -> CliResult<()> {
    let text = fs::read_to_string(checkpoint)
        .with_context(|| format!("cannot read checkpoint {}", checkpoint.display()))
        .map_err(Failure::Usage)?;
    let cp = Checkpoint::from_json(&text).with_context(|| format!("corrupt checkpoint {}", checkpoint.display()))?;
    let out = checkpoint
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let engine = Engine::resume(cp)?;
    if engine.is_finished() {
        eprintln!("run already complete after {} generations", engine.state().generation);
        return Ok(());
    }
    let path = out.join(LOG_FILE);
    let mut log = OpenOptions::new()
        .write(true)
        .open(&path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let expected = engine.state().log_bytes;
    let actual = log.metadata()?.len();
    if actual < expected {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} holds {actual} bytes but the checkpoint expects {expected}",
            path.display()
        )));
    }
    // drop entries written after the checkpoint, then continue from there
    log.set_len(expected)?;
    log.seek(SeekFrom::End(0))?;
    drive(engine, log, out, None)
}

fn drive(mut engine: Engine, log: File, out: &Path, stop_after: Option<u32>) -> CliResult<()> {
    let mut log = BufWriter::new(log);
    let stop = stop_after.unwrap_or(u32::MAX);
    while !engine.is_finished() && engine.state().generation < stop {
        engine.step(&mut log)?;
        log.flush()?;
        let cp = engine.checkpoint().to_json();
        summary::write_atomic(&out.join(CHECKPOINT_FILE), cp.as_bytes())?;
    }
    log.flush()?;
    if !engine.is_finished() {
        eprintln!(
            "stopped after generation {}; resume with --checkpoint {}",
            engine.state().generation,
            out.join(CHECKPOINT_FILE).display()
        );
        return Ok(());
    }
    finish(&engine, out)?;
    Ok(())
}

fn finish(engine: &Engine, out: &Path) -> anyhow::Result<()> {
    let cfg = engine.config();
    let result = engine.result();
    let rows: Vec<FrontRow> = result.nds.iter().map(FrontRow::from).collect();
    let mut csv = Vec::new();
    report::write_front(&mut csv, &rows)?;
    summary::write_atomic(&out.join(FRONT_FILE), &csv)?;

    let worst = worst_trained(engine)?;
    let oracle = summary::oracle(cfg, None)?;
    let record = RunSummary::new(cfg, &result, worst, oracle.as_ref())?;
    summary::write_json(&out.join(SUMMARY_FILE), &record)?;
    println!(
        "{} seed {}: {} generations, {} trained, front {} points, hypervolume {:.6}{}",
        record.variant,
        record.seed,
        record.generations,
        record.counters.trained,
        record.nds_size,
        record.hypervolume,
        record
            .hypervolume_ratio
            .map_or(String::new(), |r| format!(" ({:.4} of the exact front)", r))
    );
    Ok(())
}

pub fn worst_trained(engine: &Engine) -> anyhow::Result<[f64; 2]> {
    let trained = &engine.state().trained;
    if trained.is_empty() {
        bail!("nothing was trained");
    }
    let mut worst = [f64::NEG_INFINITY; 2];
    for r in trained {
        worst[0] = worst[0].max(r.objectives.f1);
        worst[1] = worst[1].max(r.objectives.f2);
    }
    Ok(worst)
}
