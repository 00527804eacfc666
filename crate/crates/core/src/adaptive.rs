//! Learned selection probabilities for the exploitation phase.
//!
//! Every trained genome credits each of its gene values with
//! `ese_max - ese`. A value's score is the mean credit over the genomes that
//! used it; scores are normalized per gene, floored by `eps` and normalized
//! again to give the guided mutation distribution. Subproblems are picked in
//! proportion to a decayed count of recent contributions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};
use crate::genome::{Genome, GENE_CARDINALITIES, NUM_GENES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueScoreTable {
    /// `sum_score[gene][value]`
    pub sum_score: Vec<Vec<f64>>,
    pub use_count: Vec<Vec<u64>>,
}

impl Default for ValueScoreTable {
    fn default() -> Self {
        ValueScoreTable {
            sum_score: GENE_CARDINALITIES.iter().map(|&c| vec![0.0; c]).collect(),
            use_count: GENE_CARDINALITIES.iter().map(|&c| vec![0; c]).collect(),
        }
    }
}

impl ValueScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_trained(&mut self, g: &Genome, ese_value: f64, ese_max: f64) -> Result<()> {
        if !(0.0..=ese_max).contains(&ese_value) {
            return Err(SearchError::Range {
                what: "ese",
                value: ese_value,
            });
        }
        for (gene, value) in g.indices().into_iter().enumerate() {
            self.sum_score[gene][value] += ese_max - ese_value;
            self.use_count[gene][value] += 1;
        }
        Ok(())
    }

    /// Mean credit per value of `gene`; zero for unused values.
    pub fn scores(&self, gene: usize) -> Vec<f64> {
        self.sum_score[gene]
            .iter()
            .zip(&self.use_count[gene])
            .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
            .collect()
    }

    pub fn mutation_probs(&self, gene: usize, eps: f64) -> Vec<f64> {
        mutation_probs_from_scores(&self.scores(gene), eps)
    }

    pub fn all_mutation_probs(&self, eps: f64) -> Vec<Vec<f64>> {
        (0..NUM_GENES).map(|g| self.mutation_probs(g, eps)).collect()
    }
}

/// `P_j = PS_j / sum(PS)` with `PS_j = S_j / sum(S) + eps`. When every score
/// is zero the distribution is uniform.
pub fn mutation_probs_from_scores(scores: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    let ps: Vec<f64> = if total > 0.0 {
        scores.iter().map(|s| s / total + eps).collect()
    } else {
        vec![eps; scores.len()]
    };
    let norm: f64 = ps.iter().sum();
    ps.into_iter().map(|p| p / norm).collect()
}

pub fn uniform_probs() -> Vec<Vec<f64>> {
    GENE_CARDINALITIES.iter().map(|&c| vec![1.0 / c as f64; c]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubproblemUtility {
    pub utility: Vec<f64>,
}

impl SubproblemUtility {
    pub fn new(n: usize) -> Self {
        SubproblemUtility { utility: vec![0.0; n] }
    }

    /// End-of-generation update: `u_i <- gamma * u_i + [contributed]`.
    pub fn record_contribution(&mut self, i: usize, contributed: bool, gamma: f64) {
        self.utility[i] = gamma * self.utility[i] + if contributed { 1.0 } else { 0.0 };
    }

    pub fn probs(&self, eps: f64) -> Vec<f64> {
        let norm: f64 = self.utility.iter().map(|u| u + eps).sum();
        self.utility.iter().map(|u| (u + eps) / norm).collect()
    }
}
