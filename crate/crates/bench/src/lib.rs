//! Fixtures shared by the benchmarks.

use cellsearch_core::evaluators::synthetic_metrics;
use cellsearch_core::genome::{enumerate_space, Genome, SPACE_SIZE};
use cellsearch_core::objectives::{self, ObjectiveConfig};
use cellsearch_core::surrogate::SurrogateTrainingPopulation;

/// `n` genomes spread evenly over the canonical enumeration.
pub fn spread_genomes(n: usize) -> Vec<Genome> {
    enumerate_space(None)
        .expect("full space")
        .step_by((SPACE_SIZE / n.max(1)).max(1))
        .take(n)
        .collect()
}

/// Training set labelled with synthetic ESE values.
pub fn training_population(n: usize) -> SurrogateTrainingPopulation {
    let cfg = ObjectiveConfig::default();
    let mut stp = SurrogateTrainingPopulation::default();
    for g in spread_genomes(n) {
        let m = synthetic_metrics(&g, &cfg);
        stp.push(&g, objectives::ese(&m, &cfg).expect("valid metrics"))
            .expect("valid genome");
    }
    stp
}
