use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellsearch_core::engine::{read_log, Checkpoint, EngineConfig, LogEntry, Outcome};
use cellsearch_core::evaluators::{synthetic_metrics, Evaluator, ExternalEvaluator};
use cellsearch_core::genome::{enumerate_space, Genome, SPACE_SIZE};
use cellsearch_core::objectives::ObjectiveConfig;
use cellsearch_core::report::read_front;
use tempfile::TempDir;

const SMALL: &str = "generations = 8\nlearning_generations = 3\n\n[forest]\nnum_trees = 20\n";

fn cellsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_to(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cellsearch(&args)
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn run_writes_readable_artifacts_deterministically() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run_to(&config, &a, &[]));
    assert_ok(&run_to(&config, &b, &[]));

    let front = read_front(fs::File::open(a.join("nds.csv")).unwrap()).unwrap();
    assert!(!front.is_empty());
    for name in ["nds.csv", "run_log.jsonl", "summary.json", "checkpoint.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    let log = read_log(
        fs::File::open(a.join("run_log.jsonl"))
            .map(std::io::BufReader::new)
            .unwrap(),
    )
    .unwrap();
    assert!(!log.is_empty());
    let cp = Checkpoint::from_json(&fs::read_to_string(a.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(cp.state.generation, 8);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["nds_size"].as_u64(), Some(front.len() as u64));
    assert!(summary["hypervolume_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run_to(&config, &a, &[]));
    assert_ok(&run_to(&config, &b, &["--seed", "3"]));
    assert_ne!(
        fs::read(a.join("run_log.jsonl")).unwrap(),
        fs::read(b.join("run_log.jsonl")).unwrap()
    );
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = cellsearch(&[
        "run",
        "--config",
        "/nonexistent/config.toml",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(1));

    let typo = write_config(dir.path(), "typo.toml", "generations = 8\nlearning_generation = 3\n");
    let o = run_to(&typo, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_generation"));

    let invalid = write_config(dir.path(), "invalid.toml", "population = 1\n");
    assert_eq!(run_to(&invalid, &out, &[]).status.code(), Some(1));

    assert_eq!(cellsearch(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn stop_and_resume_matches_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    assert_ok(&run_to(&config, &full, &[]));
    assert_ok(&run_to(&config, &part, &["--stop-after", "4"]));
    assert!(!part.join("nds.csv").exists());

    // simulate a crash that left a partial generation in the log
    let checkpoint = part.join("checkpoint.json");
    let mut log = fs::read(part.join("run_log.jsonl")).unwrap();
    log.extend_from_slice(b"{\"event\":\"generation_start\",\"gener");
    fs::write(part.join("run_log.jsonl"), log).unwrap();

    assert_ok(&cellsearch(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]));
    for name in ["nds.csv", "run_log.jsonl", "summary.json", "checkpoint.json"] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(part.join(name)).unwrap(),
            "{name} differs"
        );
    }

    // resuming a finished run changes nothing
    let before = fs::read(part.join("run_log.jsonl")).unwrap();
    assert_ok(&cellsearch(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]));
    assert_eq!(fs::read(part.join("run_log.jsonl")).unwrap(), before);
}

#[test]
fn corrupt_checkpoint_is_refused() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    assert_ok(&run_to(&config, &out, &["--stop-after", "2"]));
    let checkpoint = out.join("checkpoint.json");
    let text = fs::read_to_string(&checkpoint).unwrap();
    fs::write(&checkpoint, &text[..text.len() / 2]).unwrap();
    let o = cellsearch(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt checkpoint"));
}

#[test]
fn oracle_writes_front_and_refuses_external() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "restricted.toml",
        "[oracle.restriction]\nn_c = [2]\nn_f = [3]\nlr_level = [1, 5, 9]\n",
    );
    let out = dir.path().join("oracle");
    assert_ok(&cellsearch(&[
        "oracle",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let rows = read_front(fs::File::open(out.join("true_front.csv")).unwrap()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("oracle_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["evaluated"].as_u64(), Some(2 * 3 * 4 * 81 * 3));
    assert_eq!(summary["members"].as_u64(), Some(rows.len() as u64));
    assert!(rows
        .iter()
        .all(|r| r.n_c == 2 && r.n_f == 3 && [1, 5, 9].contains(&r.lr_level)));

    let external = write_config(
        dir.path(),
        "external.toml",
        "[evaluator]\nkind = \"external\"\ncommand = \"true\"\n",
    );
    let o = cellsearch(&[
        "oracle",
        "--config",
        external.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_tables_every_variant_and_seed() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("bench");
    let o = cellsearch(&[
        "bench",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "0..1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let stdout = String::from_utf8_lossy(&o.stdout);
    for v in ["samea", "mea", "random"] {
        assert!(stdout.contains(&format!("median {v}")), "{stdout}");
    }
    let mut reader = csv::Reader::from_path(out.join("bench.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);

    let log = read_log(std::io::BufReader::new(
        fs::File::open(out.join("mea-1/run_log.jsonl")).unwrap(),
    ))
    .unwrap();
    for e in log {
        if let LogEntry::Proposal(p) = e {
            assert!(p.predicted_ese.is_none());
            assert_ne!(p.outcome, Outcome::Rejected);
        }
    }

    let bad = cellsearch(&["bench", "--config", config.to_str().unwrap(), "--variants", "nsga"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn synthetic_worker_matches_in_process_model() {
    let worker = ExternalEvaluator::new(env!("CARGO_BIN_EXE_synthetic-worker").into(), Vec::new(), 30.0);
    let cfg = ObjectiveConfig::default();
    let genomes: Vec<Genome> = enumerate_space(None)
        .unwrap()
        .step_by(SPACE_SIZE / 50)
        .take(50)
        .collect();
    assert_eq!(genomes.len(), 50);
    for g in &genomes {
        let remote = worker.evaluate(g, &cfg).unwrap();
        let local = synthetic_metrics(g, &cfg);
        assert_eq!(remote.mc_dice_train.to_bits(), local.mc_dice_train.to_bits());
        assert_eq!(remote.mc_dice_val.to_bits(), local.mc_dice_val.to_bits());
        assert_eq!(remote.e_max, local.e_max);
    }
}

#[test]
fn external_run_reproduces_synthetic_run() {
    let dir = TempDir::new().unwrap();
    let synthetic = write_config(dir.path(), "synthetic.toml", SMALL);
    let mut cfg = EngineConfig::from_toml(SMALL).unwrap();
    cfg.evaluator = cellsearch_core::EvaluatorKind::External {
        command: env!("CARGO_BIN_EXE_synthetic-worker").into(),
        args: Vec::new(),
        timeout_secs: 30.0,
    };
    let external = write_config(dir.path(), "external.toml", &cfg.to_toml());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&run_to(&synthetic, &a, &[]));
    assert_ok(&run_to(&external, &b, &[]));
    assert_eq!(
        fs::read(a.join("nds.csv")).unwrap(),
        fs::read(b.join("nds.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("run_log.jsonl")).unwrap(),
        fs::read(b.join("run_log.jsonl")).unwrap()
    );
}
