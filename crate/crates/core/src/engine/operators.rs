//! Variation and the surrogate acceptance test.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::DecompositionState;
use crate::genome::{Genome, GENE_CARDINALITIES, NUM_GENES};
use crate::objectives::ObjectiveVector;

#[derive(Clone, Copy, Debug)]
pub enum Mutation<'a> {
    /// Resample uniformly over the gene's range.
    Uniform,
    /// Resample from per-gene value distributions.
    Guided(&'a [Vec<f64>]),
}

/// Draws an index from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Uniform crossover followed by per-gene resampling with probability
/// `mutation_rate`.
pub fn make_child<R: Rng + ?Sized>(
    parents: (&Genome, &Genome),
    mutation: Mutation<'_>,
    mutation_rate: f64,
    rng: &mut R,
) -> Genome {
    let (a, b) = (parents.0.indices(), parents.1.indices());
    let mut child = [0usize; NUM_GENES];
    for k in 0..NUM_GENES {
        child[k] = if rng.random::<bool>() { a[k] } else { b[k] };
        if rng.random::<f64>() < mutation_rate {
            child[k] = match mutation {
                Mutation::Uniform => rng.random_range(0..GENE_CARDINALITIES[k]),
                Mutation::Guided(probs) => sample_index(&probs[k], rng),
            };
        }
    }
    Genome::from_indices(child).expect("crossover and mutation stay in range")
}

/// Why a candidate was sent to training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Would replace at least one neighbor's current solution under PBI.
    PnsUpdate,
    /// Predicted objectives not dominated by the archive.
    PredictedNonDominated,
    /// Lowest predicted ESE among this generation's candidates so far.
    MinPredictedEse,
    /// Highest prediction dispersion among this generation's candidates so far.
    MaxDispersion,
    /// Best-predicted rejection after the attempt budget ran out.
    Forced,
}

/// Running extremes of this generation's surrogate predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationBests {
    pub min_predicted_ese: f64,
    pub max_dispersion: f64,
}

impl Default for GenerationBests {
    fn default() -> Self {
        GenerationBests {
            min_predicted_ese: f64::INFINITY,
            max_dispersion: f64::NEG_INFINITY,
        }
    }
}

impl GenerationBests {
    pub fn absorb(&mut self, predicted_ese: f64, dispersion: f64) {
        self.min_predicted_ese = self.min_predicted_ese.min(predicted_ese);
        self.max_dispersion = self.max_dispersion.max(dispersion);
    }
}

/// First acceptance criterion satisfied by a candidate whose predicted
/// objectives are `predicted` (surrogate ESE, exact size), proposed for
/// subproblem `origin`.
pub fn accept_candidate(
    state: &DecompositionState,
    origin: usize,
    predicted: &ObjectiveVector,
    dispersion: f64,
    bests: &GenerationBests,
) -> Option<Criterion> {
    if state.would_update_pns(predicted, origin) {
        Some(Criterion::PnsUpdate)
    } else if !state.archive_dominates(predicted) {
        Some(Criterion::PredictedNonDominated)
    } else if predicted.f1 < bests.min_predicted_ese {
        Some(Criterion::MinPredictedEse)
    } else if dispersion > bests.max_dispersion {
        Some(Criterion::MaxDispersion)
    } else {
        None
    }
}
