//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use cellsearch_core::engine::{Engine, EngineConfig, LogEntry};
use cellsearch_core::genome::{Genome, Operation};
use cellsearch_core::objectives::ObjectiveVector;
use cellsearch_core::surrogate::ForestConfig;
use rand::Rng;

pub fn random_genome<R: Rng>(rng: &mut R) -> Genome {
    Genome {
        i2: rng.random_range(0..=1),
        i3: rng.random_range(0..=2),
        i4: rng.random_range(0..=3),
        o1: random_op(rng),
        o2: random_op(rng),
        o3: random_op(rng),
        o4: random_op(rng),
        n_c: rng.random_range(2..=4),
        n_f: rng.random_range(3..=5),
        lr_level: rng.random_range(1..=9),
    }
}

fn random_op<R: Rng>(rng: &mut R) -> Operation {
    match rng.random_range(0..3) {
        0 => Operation::Conv2d,
        1 => Operation::Conv3d,
        _ => Operation::P3d,
    }
}

/// A layer with learnable tensors.
#[derive(Debug)]
enum Layer {
    Conv { kernel: [u64; 3], c_in: u64, c_out: u64 },
    TransposeConv { kernel: [u64; 3], c_in: u64, c_out: u64 },
    InstanceNorm { channels: u64 },
}

impl Layer {
    fn tensors(&self) -> Vec<Vec<u64>> {
        match *self {
            Layer::Conv { kernel, c_in, c_out } | Layer::TransposeConv { kernel, c_in, c_out } => {
                vec![vec![c_out, c_in, kernel[0], kernel[1], kernel[2]], vec![c_out]]
            }
            Layer::InstanceNorm { channels } => vec![vec![channels], vec![channels]],
        }
    }
}

fn node_layers(op: Operation, c_in: u64, c_out: u64) -> Vec<Layer> {
    let mut layers = match op {
        Operation::Conv2d => vec![Layer::Conv {
            kernel: [3, 3, 1],
            c_in,
            c_out,
        }],
        Operation::Conv3d => vec![Layer::Conv {
            kernel: [3, 3, 3],
            c_in,
            c_out,
        }],
        Operation::P3d => vec![
            Layer::Conv {
                kernel: [3, 3, 1],
                c_in,
                c_out,
            },
            Layer::Conv {
                kernel: [1, 1, 3],
                c_in: c_out,
                c_out,
            },
        ],
    };
    layers.push(Layer::InstanceNorm { channels: c_out });
    layers
}

/// Instantiates every layer of the network described by `g` and sums the
/// element counts of its weight tensors.
pub fn layer_graph_params(g: &Genome, num_classes: u64) -> u64 {
    let base = 2u64.pow(u32::from(g.n_f));
    let depth = u32::from(g.n_c);
    let ops = [g.o1, g.o2, g.o3, g.o4];
    let sources = [0u8, g.i2, g.i3, g.i4];

    // (filters, is_decoder) per cell along the U
    let mut cells = Vec::new();
    for level in 0..depth {
        cells.push((base * 2u64.pow(level), false));
    }
    cells.push((base * 2u64.pow(depth), false));
    for level in (0..depth).rev() {
        cells.push((base * 2u64.pow(level), true));
    }

    let mut layers = Vec::new();
    let mut channels = 1u64;
    for (filters, decoder) in cells {
        if decoder {
            layers.push(Layer::TransposeConv {
                kernel: [2, 2, 2],
                c_in: channels,
                c_out: filters,
            });
            channels = filters;
        }
        for (op, &src) in ops.iter().zip(&sources) {
            let c_in = if src == 0 { channels } else { filters };
            layers.extend(node_layers(*op, c_in, filters));
        }
        channels = filters;
    }
    layers.push(Layer::Conv {
        kernel: [1, 1, 1],
        c_in: channels,
        c_out: num_classes,
    });

    layers
        .iter()
        .flat_map(|l| l.tensors())
        .map(|shape| shape.iter().product::<u64>())
        .sum()
}

fn dominated_by(a: [f64; 2], b: [f64; 2]) -> bool {
    b[0] <= a[0] && b[1] <= a[1] && (b[0] < a[0] || b[1] < a[1])
}

/// Indices of points no other point dominates, O(n^2).
pub fn pairwise_front(points: &[[f64; 2]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|&q| dominated_by(points[i], q)))
        .collect()
}

/// Distinct non-dominated objective vectors, sorted.
pub fn front_set(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut f: Vec<[f64; 2]> = pairwise_front(points).into_iter().map(|i| points[i]).collect();
    sort_points(&mut f);
    f
}

pub fn sort_points(p: &mut Vec<[f64; 2]>) {
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
}

pub fn objectives_of(v: &[ObjectiveVector]) -> Vec<[f64; 2]> {
    v.iter().map(|o| o.as_array()).collect()
}

pub fn r_squared(truth: &[f64], pred: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// A run short enough for the regular test suite.
pub fn quick_config(seed: u64) -> EngineConfig {
    EngineConfig {
        seed,
        generations: 14,
        learning_generations: 5,
        forest: ForestConfig {
            num_trees: 30,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Runs to completion and returns the engine with its log bytes.
pub fn run_logged(cfg: &EngineConfig) -> (Engine, Vec<u8>) {
    let mut engine = Engine::new(cfg.clone()).expect("valid config");
    let mut log = Vec::new();
    engine.run(&mut log).expect("run completes");
    (engine, log)
}

pub fn parse_log(bytes: &[u8]) -> Vec<LogEntry> {
    cellsearch_core::engine::read_log(bytes).expect("log parses")
}
