//! Two-objective MOEA/D bookkeeping: weight vectors, neighborhoods, PBI
//! scalarization, the per-subproblem current solutions and the
//! non-dominated archive.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};
use crate::evaluators::EvaluationRecord;
use crate::objectives::ObjectiveVector;

/// Guards PBI normalization against zero objective ranges.
pub const NORMALIZATION_EPS: f64 = 1e-12;

/// `lambda_i = (i / (n - 1), 1 - i / (n - 1))`.
pub fn init_weights(n: usize) -> Result<Vec<[f64; 2]>> {
    if n < 2 {
        return Err(SearchError::Config(format!("population must be >= 2, got {n}")));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let a = i as f64 / last;
            [a, 1.0 - a]
        })
        .collect())
}

/// The `t` nearest weights of every weight (Euclidean), nearest first, ties
/// by index. Each subproblem is its own first neighbor. Distances are
/// compared at 1e-12 resolution so that equidistant weights tie exactly.
pub fn neighborhoods(weights: &[[f64; 2]], t: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|w| {
            let mut order: Vec<(u64, usize)> = weights
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let d = ((w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2)).sqrt();
                    ((d * 1e12).round() as u64, j)
                })
                .collect();
            order.sort_unstable();
            order.into_iter().take(t).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Penalty-based boundary intersection on objectives normalized by the
/// ideal and nadir points: `d1 + theta * d2`.
pub fn pbi(f: [f64; 2], weight: [f64; 2], ideal: [f64; 2], nadir: [f64; 2], theta: f64) -> f64 {
    let norm = [
        (f[0] - ideal[0]) / (nadir[0] - ideal[0] + NORMALIZATION_EPS),
        (f[1] - ideal[1]) / (nadir[1] - ideal[1] + NORMALIZATION_EPS),
    ];
    let w_len = (weight[0] * weight[0] + weight[1] * weight[1]).sqrt();
    let d1 = (norm[0] * weight[0] + norm[1] * weight[1]).abs() / w_len;
    let proj = [d1 * weight[0] / w_len, d1 * weight[1] / w_len];
    let d2 = ((norm[0] - proj[0]).powi(2) + (norm[1] - proj[1]).powi(2)).sqrt();
    d1 + theta * d2
}

/// Pareto dominance for minimization.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subproblem {
    pub index: usize,
    pub weight: [f64; 2],
    pub neighborhood: Vec<usize>,
    pub current: EvaluationRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionState {
    pub subproblems: Vec<Subproblem>,
    pub nds: Vec<EvaluationRecord>,
    pub ideal: [f64; 2],
    pub nadir: [f64; 2],
    pub theta: f64,
}

impl DecompositionState {
    /// Builds the state from an initial population: every subproblem adopts
    /// the member with the lowest PBI under its weight. The archive starts
    /// empty; callers offer the population through [`update_nds`](Self::update_nds).
    pub fn new(n: usize, t: usize, theta: f64, initial: &[EvaluationRecord]) -> Result<Self> {
        if initial.is_empty() {
            return Err(SearchError::EmptyInput("initial population"));
        }
        if t < 2 || t > n {
            return Err(SearchError::Config(format!(
                "neighborhood size {t} must lie in 2..={n}"
            )));
        }
        let weights = init_weights(n)?;
        let hoods = neighborhoods(&weights, t);
        let mut ideal = [f64::INFINITY; 2];
        let mut nadir = [f64::NEG_INFINITY; 2];
        for r in initial {
            observe(&mut ideal, &mut nadir, &r.objectives);
        }
        let subproblems = weights
            .iter()
            .zip(hoods)
            .enumerate()
            .map(|(index, (&weight, neighborhood))| {
                let best = initial
                    .iter()
                    .min_by(|a, b| {
                        let pa = pbi(a.objectives.as_array(), weight, ideal, nadir, theta);
                        let pb = pbi(b.objectives.as_array(), weight, ideal, nadir, theta);
                        pa.total_cmp(&pb)
                    })
                    .expect("nonempty population");
                Subproblem {
                    index,
                    weight,
                    neighborhood,
                    current: best.clone(),
                }
            })
            .collect();
        Ok(DecompositionState {
            subproblems,
            nds: Vec::new(),
            ideal,
            nadir,
            theta,
        })
    }

    pub fn len(&self) -> usize {
        self.subproblems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subproblems.is_empty()
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.subproblems[i].neighborhood
    }

    fn pbi_of(&self, f: &ObjectiveVector, k: usize, ideal: [f64; 2], nadir: [f64; 2]) -> f64 {
        pbi(f.as_array(), self.subproblems[k].weight, ideal, nadir, self.theta)
    }

    /// Replaces every neighbor of `origin` whose current solution has a
    /// larger PBI value than `new`. The ideal and nadir points absorb `new`
    /// first. Returns the number of replacements.
    pub fn update_pns(&mut self, new: &EvaluationRecord, origin: usize) -> usize {
        observe(&mut self.ideal, &mut self.nadir, &new.objectives);
        let (ideal, nadir) = (self.ideal, self.nadir);
        let hood = self.subproblems[origin].neighborhood.clone();
        let mut replaced = 0;
        for k in hood {
            let cand = self.pbi_of(&new.objectives, k, ideal, nadir);
            let cur = self.pbi_of(&self.subproblems[k].current.objectives, k, ideal, nadir);
            if cand < cur {
                self.subproblems[k].current = new.clone();
                replaced += 1;
            }
        }
        replaced
    }

    /// Whether [`update_pns`](Self::update_pns) would replace at least one
    /// neighbor of `origin`, without mutating anything.
    pub fn would_update_pns(&self, f: &ObjectiveVector, origin: usize) -> bool {
        let (mut ideal, mut nadir) = (self.ideal, self.nadir);
        observe(&mut ideal, &mut nadir, f);
        self.subproblems[origin].neighborhood.iter().any(|&k| {
            self.pbi_of(f, k, ideal, nadir) < self.pbi_of(&self.subproblems[k].current.objectives, k, ideal, nadir)
        })
    }

    /// True iff some archive member dominates `f`.
    pub fn archive_dominates(&self, f: &ObjectiveVector) -> bool {
        self.nds.iter().any(|m| dominates(&m.objectives, f))
    }

    /// Offers `new` to the archive. Returns whether it entered.
    pub fn update_nds(&mut self, new: EvaluationRecord) -> bool {
        let f = new.objectives;
        if self
            .nds
            .iter()
            .any(|m| m.objectives == f || dominates(&m.objectives, &f))
        {
            return false;
        }
        self.nds.retain(|m| !dominates(&f, &m.objectives));
        self.nds.push(new);
        true
    }
}

fn observe(ideal: &mut [f64; 2], nadir: &mut [f64; 2], f: &ObjectiveVector) {
    for (k, v) in f.as_array().into_iter().enumerate() {
        ideal[k] = ideal[k].min(v);
        nadir[k] = nadir[k].max(v);
    }
}
