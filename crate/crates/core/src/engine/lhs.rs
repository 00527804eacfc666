//! Latin hypercube initialization.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::genome::{Genome, GENE_CARDINALITIES, NUM_GENES};

/// Raw LHS design: `n` points in `[0, 1)^dims`, one per stratum per
/// dimension, strata paired by independent random permutations.
pub fn lhs_unit<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            point[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

/// Equal-width binning of a unit coordinate onto `card` values.
pub fn bin(u: f64, card: usize) -> usize {
    ((u * card as f64).floor() as usize).min(card - 1)
}

pub fn lhs_init<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Genome> {
    lhs_unit(n, NUM_GENES, rng)
        .into_iter()
        .map(|p| {
            let mut idx = [0usize; NUM_GENES];
            for k in 0..NUM_GENES {
                idx[k] = bin(p[k], GENE_CARDINALITIES[k]);
            }
            Genome::from_indices(idx).expect("binned indices are in range")
        })
        .collect()
}
