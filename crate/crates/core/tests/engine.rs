mod common;

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use cellsearch_core::engine::{Engine, EngineConfig, LogEntry, Outcome, ProposalEntry, Variant};
use cellsearch_core::evaluators::{
    synthetic_metrics, tabular, EvalError, Evaluator, Phase, SyntheticEvaluator, TabularEvaluator,
};
use cellsearch_core::genome::{enumerate_space, Genome, Restriction};
use cellsearch_core::metrics::{self, hypervolume};
use cellsearch_core::objectives::{ObjectiveConfig, TrainingMetrics};
use common::*;

fn proposals(entries: &[LogEntry]) -> Vec<&ProposalEntry> {
    entries
        .iter()
        .filter_map(|e| match e {
            LogEntry::Proposal(p) => Some(p),
            _ => None,
        })
        .collect()
}

#[test]
fn budget_and_counters() {
    for variant in Variant::ALL {
        let cfg = EngineConfig {
            variant,
            ..quick_config(1)
        };
        let (engine, log) = run_logged(&cfg);
        let entries = parse_log(&log);
        let c = engine.state().counters;
        assert!(c.trained <= c.proposed);
        assert!(c.trained <= (cfg.population as u64) * u64::from(cfg.generations));

        let mut last = None;
        for e in &entries {
            if let LogEntry::GenerationEnd { counters, .. } = e {
                if let Some(prev) = last {
                    let prev: cellsearch_core::Counters = prev;
                    assert!(counters.proposed >= prev.proposed && counters.trained >= prev.trained);
                    assert!(counters.cache_hits >= prev.cache_hits && counters.discarded >= prev.discarded);
                }
                last = Some(*counters);
            }
        }
        assert_eq!(last, Some(c));

        let p = proposals(&entries);
        let count = |o: Outcome| p.iter().filter(|e| e.outcome == o).count() as u64;
        assert_eq!(count(Outcome::Trained), c.trained);
        assert_eq!(count(Outcome::CacheHit), c.cache_hits);
        assert_eq!(count(Outcome::Rejected), c.discarded);
        assert_eq!(p.len() as u64, c.proposed + c.forced);
    }
}

#[test]
fn trained_records_appear_once_everywhere() {
    let (engine, log) = run_logged(&quick_config(2));
    let state = engine.state();
    let entries = parse_log(&log);
    let trained: Vec<&ProposalEntry> = proposals(&entries)
        .into_iter()
        .filter(|p| p.outcome == Outcome::Trained)
        .collect();
    assert_eq!(trained.len(), state.trained.len());
    assert_eq!(state.stp.len(), state.trained.len());
    let mut seen = HashSet::new();
    for (p, r) in trained.iter().zip(&state.trained) {
        assert_eq!(p.genome, r.genome);
        assert_eq!(p.objectives, Some(r.objectives));
        assert_eq!(p.seq, r.attempt_id);
        assert!(seen.insert(r.genome), "trained twice: {}", r.genome);
        assert_eq!(r.recompute(&ObjectiveConfig::default()).unwrap(), r.objectives);
    }
    // the archive is exactly the non-dominated subset of what was trained
    let offered: Vec<[f64; 2]> = state.trained.iter().map(|r| r.objectives.as_array()).collect();
    let mut archive: Vec<[f64; 2]> = engine.result().nds.iter().map(|r| r.objectives.as_array()).collect();
    sort_points(&mut archive);
    assert_eq!(archive, front_set(&offered));
}

#[test]
fn cache_hits_reuse_objectives_without_training() {
    let (engine, log) = run_logged(&EngineConfig {
        variant: Variant::Mea,
        ..quick_config(3)
    });
    let entries = parse_log(&log);
    let mut first: HashMap<Genome, (u64, [f64; 2])> = HashMap::new();
    let mut hits = 0;
    for p in proposals(&entries) {
        match p.outcome {
            Outcome::Trained => {
                assert!(first
                    .insert(p.genome, (p.seq, p.objectives.unwrap().as_array()))
                    .is_none());
            }
            Outcome::CacheHit => {
                hits += 1;
                let (seq, obj) = first[&p.genome];
                assert!(seq < p.seq);
                assert_eq!(p.objectives.unwrap().as_array(), obj);
                assert!(p.predicted_ese.is_none());
            }
            _ => {}
        }
    }
    assert!(hits > 0, "expected duplicates in a mea run");
    assert_eq!(hits, engine.state().counters.cache_hits);
}

#[test]
fn archive_hypervolume_never_decreases() {
    let cfg = quick_config(4);
    let reference = [6.0, 20.0];
    let mut engine = Engine::new(cfg.clone()).unwrap();
    let mut log = Vec::new();
    let mut previous = 0.0;
    while !engine.is_finished() {
        engine.step(&mut log).unwrap();
        let pts: Vec<[f64; 2]> = engine.result().nds.iter().map(|r| r.objectives.as_array()).collect();
        let hv = hypervolume(&pts, reference).unwrap();
        assert!(
            hv >= previous,
            "generation {}: {hv} < {previous}",
            engine.state().generation
        );
        previous = hv;
    }
}

#[test]
fn variants_share_initial_population() {
    let first_generation = |variant| {
        let mut engine = Engine::new(EngineConfig {
            variant,
            ..quick_config(5)
        })
        .unwrap();
        engine.step(&mut Vec::new()).unwrap();
        engine.state().trained.iter().map(|r| r.genome).collect::<Vec<_>>()
    };
    let samea = first_generation(Variant::Samea);
    assert!(!samea.is_empty());
    assert!(samea.windows(2).all(|w| w[0] < w[1]), "committed in canonical order");
    assert_eq!(samea, first_generation(Variant::Mea));
    assert_eq!(samea, first_generation(Variant::Random));
}

#[test]
fn mea_and_random_never_consult_the_surrogate() {
    for variant in [Variant::Mea, Variant::Random] {
        let cfg = EngineConfig {
            variant,
            ..quick_config(6)
        };
        let (engine, log) = run_logged(&cfg);
        let c = engine.state().counters;
        assert_eq!(
            (c.surrogate_fits, c.surrogate_predictions, c.discarded, c.forced),
            (0, 0, 0, 0)
        );
        for e in parse_log(&log) {
            match e {
                LogEntry::Proposal(p) => {
                    assert!(p.predicted_ese.is_none() && p.criterion.is_none());
                    assert_ne!(p.phase, Phase::Exploit);
                }
                LogEntry::GenerationStart { subproblem_probs, .. } => assert!(subproblem_probs.is_none()),
                LogEntry::GenerationEnd { .. } => {}
            }
        }
    }
}

#[test]
fn exploitation_logs_predictions_and_criteria() {
    let cfg = quick_config(7);
    let (engine, log) = run_logged(&cfg);
    let entries = parse_log(&log);
    let exploit: Vec<&ProposalEntry> = proposals(&entries)
        .into_iter()
        .filter(|p| p.phase == Phase::Exploit && p.outcome != Outcome::CacheHit)
        .collect();
    assert!(!exploit.is_empty());
    for p in &exploit {
        let f2 = cellsearch_core::objectives::f2(p.genome.param_count(4).unwrap()).unwrap();
        assert_eq!(p.predicted_f2, Some(f2));
        assert!(p.dispersion.unwrap() >= 0.0);
        match p.outcome {
            Outcome::Trained => assert!(p.criterion.is_some()),
            Outcome::Rejected => assert!(p.criterion.is_none()),
            _ => {}
        }
    }
    let forced = exploit
        .iter()
        .filter(|p| p.criterion == Some(cellsearch_core::engine::Criterion::Forced))
        .count() as u64;
    assert_eq!(forced, engine.state().counters.forced);
    // the first candidate of every exploitation generation is accepted
    for g in cfg.learning_generations + 1..=cfg.generations {
        let first = exploit.iter().find(|p| p.generation == g).unwrap();
        assert_eq!(first.outcome, Outcome::Trained, "generation {g}");
    }
}

#[test]
fn samea_trains_fewer_than_mea_at_seed_zero() {
    let run = |variant| {
        run_logged(&EngineConfig {
            variant,
            ..EngineConfig::default()
        })
        .0
        .state()
        .counters
        .trained
    };
    assert!(run(Variant::Samea) < run(Variant::Mea));
}

/// Fails every third call.
struct Flaky {
    calls: AtomicU64,
}

impl Evaluator for Flaky {
    fn evaluate(&self, g: &Genome, cfg: &ObjectiveConfig) -> Result<TrainingMetrics, EvalError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) % 3 == 2 {
            return Err(EvalError::Worker("diverged".into()));
        }
        Ok(synthetic_metrics(g, cfg))
    }
}

#[test]
fn evaluator_failures_are_logged_and_retried() {
    let cfg = quick_config(8);
    let mut engine = Engine::with_evaluator(
        cfg.clone(),
        Box::new(Flaky {
            calls: AtomicU64::new(0),
        }),
    )
    .unwrap();
    let mut log = Vec::new();
    engine.run(&mut log).unwrap();
    let c = engine.state().counters;
    assert!(c.failed > 0);
    let failed: Vec<ProposalEntry> = proposals(&parse_log(&log))
        .into_iter()
        .filter(|p| p.outcome == Outcome::Failed)
        .cloned()
        .collect();
    assert_eq!(failed.len() as u64, c.failed);
    assert!(failed.iter().all(|p| p.error.as_deref().unwrap().contains("diverged")));
    assert!(!engine.result().nds.is_empty());
}

#[test]
fn tabular_evaluator_matches_synthetic_run() {
    let restriction = Restriction {
        n_c: Some(vec![2]),
        n_f: Some(vec![3]),
        ..Default::default()
    };
    let cfg = ObjectiveConfig::default();
    let rows: Vec<tabular::TableRow> = enumerate_space(Some(&restriction))
        .unwrap()
        .map(|g| tabular::TableRow::new(&g, &synthetic_metrics(&g, &cfg)))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    tabular::write_table(std::fs::File::create(&path).unwrap(), &rows).unwrap();
    let table = TabularEvaluator::load(&path).unwrap();
    assert_eq!(table.len(), rows.len());

    let a = metrics::true_front(&table, &cfg, Some(&restriction)).unwrap();
    let b = metrics::true_front(&SyntheticEvaluator::new(), &cfg, Some(&restriction)).unwrap();
    assert_eq!(a.summary, b.summary);
    let unseen = Genome::from_indices([0, 0, 0, 0, 0, 0, 0, 1, 0, 0]).unwrap();
    assert!(matches!(table.evaluate(&unseen, &cfg), Err(EvalError::MissingRow(_))));
}

#[test]
fn resume_at_every_generation_boundary() {
    let cfg = quick_config(9);
    let (reference, full_log) = run_logged(&cfg);
    for stop in 1..cfg.generations {
        let mut engine = Engine::new(cfg.clone()).unwrap();
        let mut log = Vec::new();
        engine.run_until(stop, &mut log).unwrap();
        let cp = cellsearch_core::engine::Checkpoint::from_json(&engine.checkpoint().to_json()).unwrap();
        let mut resumed = Engine::resume(cp).unwrap();
        resumed.run(&mut log).unwrap();
        assert_eq!(log, full_log, "stopped after generation {stop}");
        assert_eq!(resumed.result(), reference.result());
    }
}

#[test]
fn noisy_evaluator_is_seeded() {
    let cfg = EngineConfig {
        evaluator: cellsearch_core::EvaluatorKind::Synthetic { noise_std: 0.05 },
        ..quick_config(10)
    };
    let (a, log_a) = run_logged(&cfg);
    let (_, log_b) = run_logged(&cfg);
    assert_eq!(log_a, log_b);
    let (_, clean) = run_logged(&quick_config(10));
    assert_ne!(log_a, clean);
    assert!(!a.result().nds.is_empty());
}
