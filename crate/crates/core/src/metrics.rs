//! Front quality: 2-D hypervolume, IGD and the enumerated true front.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};
use crate::evaluators::Evaluator;
use crate::genome::{enumerate_space, Genome, Restriction};
use crate::objectives::{self, ObjectiveConfig, ObjectiveVector, TrainingMetrics};

/// Factor applied to the componentwise worst objective to place the
/// hypervolume reference point.
pub const REFERENCE_MARGIN: f64 = 1.1;

/// Indices of the points no other point dominates, ascending. Equal points
/// are all kept.
pub fn non_dominated_indices(points: &[[f64; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    let mut keep = Vec::new();
    let mut best_f2 = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f1 = points[order[i]][0];
        let group_min = points[order[i]][1];
        let mut j = i;
        while j < order.len() && points[order[j]][0] == f1 {
            if points[order[j]][1] == group_min && group_min < best_f2 {
                keep.push(order[j]);
            }
            j += 1;
        }
        best_f2 = best_f2.min(group_min);
        i = j;
    }
    keep.sort_unstable();
    keep
}

/// Area dominated by `front` inside the box bounded by `reference`.
pub fn hypervolume(front: &[[f64; 2]], reference: [f64; 2]) -> Result<f64> {
    if let Some(p) = front.iter().find(|p| !(p[0] < reference[0] && p[1] < reference[1])) {
        return Err(SearchError::PointNotDominatingRef { point: *p, reference });
    }
    let mut pts: Vec<[f64; 2]> = non_dominated_indices(front).into_iter().map(|i| front[i]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    let mut area = 0.0;
    for (k, p) in pts.iter().enumerate() {
        let next_x = pts.get(k + 1).map_or(reference[0], |q| q[0]);
        area += (next_x - p[0]) * (reference[1] - p[1]);
    }
    Ok(area)
}

/// Mean distance from each reference point to its nearest front point, with
/// both objectives scaled by the reference front's range (a zero range
/// scales by 1).
pub fn igd(front: &[[f64; 2]], reference_front: &[[f64; 2]]) -> Result<f64> {
    if front.is_empty() {
        return Err(SearchError::EmptyInput("front"));
    }
    if reference_front.is_empty() {
        return Err(SearchError::EmptyInput("reference front"));
    }
    let mut scale = [1.0; 2];
    for (k, s) in scale.iter_mut().enumerate() {
        let lo = reference_front.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = reference_front.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            *s = hi - lo;
        }
    }
    let total: f64 = reference_front
        .iter()
        .map(|r| {
            front
                .iter()
                .map(|p| (((p[0] - r[0]) / scale[0]).powi(2) + ((p[1] - r[1]) / scale[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / reference_front.len() as f64)
}

pub fn reference_point(worst: [f64; 2]) -> [f64; 2] {
    [worst[0] * REFERENCE_MARGIN, worst[1] * REFERENCE_MARGIN]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub genome: Genome,
    pub metrics: TrainingMetrics,
    pub objectives: ObjectiveVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSummary {
    /// Distinct front points sorted by `f1`.
    pub points: Vec<[f64; 2]>,
    pub reference: [f64; 2],
    pub hypervolume: f64,
    pub igd: Option<f64>,
    pub cardinality: usize,
}

impl FrontSummary {
    pub fn new(points: &[[f64; 2]], reference: [f64; 2], reference_front: Option<&[[f64; 2]]>) -> Result<Self> {
        let mut pts: Vec<[f64; 2]> = non_dominated_indices(points).into_iter().map(|i| points[i]).collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        let hypervolume = hypervolume(&pts, reference)?;
        let igd = reference_front.map(|r| igd(&pts, r)).transpose()?;
        Ok(FrontSummary {
            cardinality: pts.len(),
            points: pts,
            reference,
            hypervolume,
            igd,
        })
    }
}

/// Exact front of an enumerable evaluator over a (restricted) space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueFront {
    /// Every genome whose objective vector is non-dominated, in canonical
    /// enumeration order.
    pub members: Vec<FrontMember>,
    /// Componentwise worst objective over the enumerated space.
    pub worst: [f64; 2],
    pub evaluated: usize,
    pub summary: FrontSummary,
}

impl TrueFront {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.summary.points
    }

    pub fn reference(&self) -> [f64; 2] {
        self.summary.reference
    }
}

/// Objectives of every genome of the (restricted) space, canonical order.
pub fn enumerate_objectives(
    evaluator: &dyn Evaluator,
    cfg: &ObjectiveConfig,
    restriction: Option<&Restriction>,
) -> Result<Vec<FrontMember>> {
    if !evaluator.is_enumerable() {
        return Err(SearchError::Config("evaluator cannot be enumerated".into()));
    }
    let genomes: Vec<Genome> = enumerate_space(restriction)?.collect();
    genomes
        .par_iter()
        .map(|g| {
            let metrics = evaluator.evaluate(g, cfg)?;
            let objectives = objectives::objectives(&metrics, g.param_count(cfg.num_classes)?, cfg)?;
            Ok(FrontMember {
                genome: *g,
                metrics,
                objectives,
            })
        })
        .collect()
}

pub fn true_front(
    evaluator: &dyn Evaluator,
    cfg: &ObjectiveConfig,
    restriction: Option<&Restriction>,
) -> Result<TrueFront> {
    let all = enumerate_objectives(evaluator, cfg, restriction)?;
    let points: Vec<[f64; 2]> = all.iter().map(|m| m.objectives.as_array()).collect();
    let mut worst = [f64::NEG_INFINITY; 2];
    for p in &points {
        worst[0] = worst[0].max(p[0]);
        worst[1] = worst[1].max(p[1]);
    }
    let keep = non_dominated_indices(&points);
    let members: Vec<FrontMember> = keep.iter().map(|&i| all[i].clone()).collect();
    let front_points: Vec<[f64; 2]> = keep.iter().map(|&i| points[i]).collect();
    let summary = FrontSummary::new(&front_points, reference_point(worst), None)?;
    Ok(TrueFront {
        members,
        worst,
        evaluated: all.len(),
        summary,
    })
}
