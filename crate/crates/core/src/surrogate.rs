//! Random-forest regression of ESE over encoded genomes.
//!
//! Trees are CART regressors grown on bootstrap resamples with a
//! variance-reduction criterion and `mtry` random candidate features per
//! split. The spread of the per-tree predictions is the uncertainty signal.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};
use crate::genome::Genome;
use crate::seeds;

pub const FEATURE_LEN: usize = 24;

/// One-hot blocks for `i2` (2), `i3` (3), `i4` (4) and `o1..o4` (3 each),
/// then `n_c`, `n_f` and `lr_level` as raw ordinals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

pub fn encode(g: &Genome) -> Result<FeatureVector> {
    if !g.validate() {
        return Err(SearchError::InvalidGenome(g.to_string()));
    }
    let mut x = [0.0; FEATURE_LEN];
    let idx = g.indices();
    let mut offset = 0;
    for (gene, width) in [2usize, 3, 4, 3, 3, 3, 3].into_iter().enumerate() {
        x[offset + idx[gene]] = 1.0;
        offset += width;
    }
    x[21] = f64::from(g.n_c);
    x[22] = f64::from(g.n_f);
    x[23] = f64::from(g.lr_level);
    Ok(FeatureVector(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub min_samples_split: usize,
    pub mtry: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 100,
            min_samples_split: 5,
            mtry: (FEATURE_LEN / 3).max(1),
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees < 1 {
            return Err(SearchError::Config("forest.num_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(SearchError::Config("forest.min_samples_split must be >= 2".into()));
        }
        if !(1..=FEATURE_LEN).contains(&self.mtry) {
            return Err(SearchError::Config(format!(
                "forest.mtry must lie in 1..={FEATURE_LEN}"
            )));
        }
        Ok(())
    }
}

/// Append-only (features, ESE) observations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTrainingPopulation {
    pub samples: Vec<(FeatureVector, f64)>,
}

impl SurrogateTrainingPopulation {
    pub fn push(&mut self, g: &Genome, ese: f64) -> Result<()> {
        self.samples.push((encode(g)?, ese));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.0[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    xs: &'a [FeatureVector],
    ys: &'a [f64],
    cfg: &'a ForestConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize]) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| self.ys[r]).sum();
        let mean = sum / n;
        let first = self.ys[rows[0]];
        let constant = rows.iter().all(|&r| self.ys[r] == first);
        if rows.len() < self.cfg.min_samples_split || constant {
            self.nodes[at] = Node::Leaf(if constant { first } else { mean });
            return at;
        }
        let Some(split) = self.best_split(rows) else {
            self.nodes[at] = Node::Leaf(mean);
            return at;
        };
        let mut cut = 0;
        for i in 0..rows.len() {
            if self.xs[rows[i]].0[split.feature] <= split.threshold {
                rows.swap(i, cut);
                cut += 1;
            }
        }
        let (lo, hi) = rows.split_at_mut(cut);
        let left = self.grow(lo);
        let right = self.grow(hi);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let mut features = index::sample(&mut self.rng, FEATURE_LEN, self.cfg.mtry).into_vec();
        features.sort_unstable();

        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&r| self.ys[r]).sum();
        let total_sq: f64 = rows.iter().map(|&r| self.ys[r] * self.ys[r]).sum();
        let parent_sse = total_sq - total * total / n;

        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.xs[a].0[f].total_cmp(&self.xs[b].0[f]));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let y = self.ys[order[k]];
                s += y;
                sq += y * y;
                let (v, next) = (self.xs[order[k]].0[f], self.xs[order[k + 1]].0[f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let sse_l = sq - s * s / nl;
                let sse_r = (total_sq - sq) - (total - s) * (total - s) / nr;
                let gain = parent_sse - sse_l - sse_r;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (v + next),
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > parent_sse.abs() * 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

/// Fits a forest; deterministic in `cfg.seed` regardless of thread count.
pub fn fit(stp: &SurrogateTrainingPopulation, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    if stp.len() < 2 {
        return Err(SearchError::InsufficientData(stp.len()));
    }
    let xs: Vec<FeatureVector> = stp.samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = stp.samples.iter().map(|s| s.1).collect();
    let trees = (0..cfg.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(cfg.seed, "tree", t as u64));
            let mut rows: Vec<usize> = (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect();
            let mut grower = Grower {
                xs: &xs,
                ys: &ys,
                cfg,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(&mut rows);
            Tree { nodes: grower.nodes }
        })
        .collect();
    Ok(Forest { trees })
}

impl Forest {
    /// Mean of the tree predictions and their population standard deviation.
    pub fn predict(&self, x: &FeatureVector) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// Indented text rendering of every tree.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i}");
            let mut stack = vec![(0usize, 1usize)];
            while let Some((at, depth)) = stack.pop() {
                let pad = "  ".repeat(depth);
                match tree.nodes[at] {
                    Node::Leaf(v) => {
                        let _ = writeln!(out, "{pad}leaf {v}");
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "{pad}x[{feature}] <= {threshold}");
                        stack.push((right, depth + 1));
                        stack.push((left, depth + 1));
                    }
                }
            }
        }
        out
    }
}
