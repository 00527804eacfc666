//! The discrete cell/network search space.
//!
//! A [`Genome`] holds the ten categorical decision variables: the input
//! selectors of nodes 2-4, the operation of each of the four cell nodes, the
//! encoder depth `n_c`, the filter exponent `n_f` and a learning-rate level.
//! [`Genome::decode`] expands it into an [`ArchitectureDescriptor`] whose
//! parameter count feeds the model-size objective.
//!
//! Layer model used for counting parameters:
//!
//! * every node is ReLU, convolution (with bias) and instance norm (scale and
//!   shift, `2 * C_out`);
//! * `CONV2D` is a 3x3x1 kernel, `CONV3D` 3x3x3, `P3D` a 3x3x1 followed by a
//!   1x1x3 kernel, both with `C_out` output channels and both with bias;
//! * a node reading the cell input sees the channel count entering the cell
//!   (the previous cell's output, or `NF_i` after a decoder upsampling), a
//!   node reading another node sees `NF_i`;
//! * max-pooling and skip summations are parameter free; each decoder cell is
//!   preceded by a 2x2x2 transpose convolution halving the channel count;
//! * the head is a 1x1x1 convolution from `NF_1` to `num_classes`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SearchError};

/// Number of nodes per cell.
pub const NODES_PER_CELL: usize = 4;

/// Channels of the network input volume (single-modality MR).
pub const INPUT_CHANNELS: u64 = 1;

pub const NUM_GENES: usize = 10;

/// Canonical gene order; also the field order of every serialized genome.
pub const GENE_NAMES: [&str; NUM_GENES] = ["i2", "i3", "i4", "o1", "o2", "o3", "o4", "n_c", "n_f", "lr_level"];

/// Number of admissible values for each gene, in canonical order.
pub const GENE_CARDINALITIES: [usize; NUM_GENES] = [2, 3, 4, 3, 3, 3, 3, 3, 3, 9];

/// Size of the unrestricted search space.
pub const SPACE_SIZE: usize = 2 * 3 * 4 * 81 * 3 * 3 * 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    #[serde(rename = "CONV2D")]
    Conv2d,
    #[serde(rename = "CONV3D")]
    Conv3d,
    #[serde(rename = "P3D")]
    P3d,
}

impl Operation {
    pub const ALL: [Operation; 3] = [Operation::Conv2d, Operation::Conv3d, Operation::P3d];

    pub fn index(self) -> usize {
        match self {
            Operation::Conv2d => 0,
            Operation::Conv3d => 1,
            Operation::P3d => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Operation::Conv2d => "CONV2D",
            Operation::Conv3d => "CONV3D",
            Operation::P3d => "P3D",
        }
    }

    /// Learnable parameters of this operation (convolutions only, with bias).
    fn conv_params(self, c_in: u64, c_out: u64) -> u64 {
        match self {
            Operation::Conv2d => 9 * c_in * c_out + c_out,
            Operation::Conv3d => 27 * c_in * c_out + c_out,
            Operation::P3d => (9 * c_in * c_out + c_out) + (3 * c_out * c_out + c_out),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operation {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CONV2D" => Ok(Operation::Conv2d),
            "CONV3D" => Ok(Operation::Conv3d),
            "P3D" => Ok(Operation::P3d),
            other => Err(SearchError::InvalidGenome(format!("unknown operation `{other}`"))),
        }
    }
}

/// One point of the search space.
///
/// Input selectors use `0` for the cell input tensor and `k` for the output
/// of node `k`. Node 1 always reads the cell input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Genome {
    pub i2: u8,
    pub i3: u8,
    pub i4: u8,
    pub o1: Operation,
    pub o2: Operation,
    pub o3: Operation,
    pub o4: Operation,
    pub n_c: u8,
    pub n_f: u8,
    pub lr_level: u8,
}

impl Genome {
    /// Builds a genome from per-gene value indices (position within each
    /// gene's range, canonical order).
    pub fn from_indices(idx: [usize; NUM_GENES]) -> Result<Self> {
        for (k, (&v, &card)) in idx.iter().zip(GENE_CARDINALITIES.iter()).enumerate() {
            if v >= card {
                return Err(SearchError::InvalidGenome(format!(
                    "{} index {v} outside 0..{card}",
                    GENE_NAMES[k]
                )));
            }
        }
        Ok(Genome {
            i2: idx[0] as u8,
            i3: idx[1] as u8,
            i4: idx[2] as u8,
            o1: Operation::ALL[idx[3]],
            o2: Operation::ALL[idx[4]],
            o3: Operation::ALL[idx[5]],
            o4: Operation::ALL[idx[6]],
            n_c: idx[7] as u8 + 2,
            n_f: idx[8] as u8 + 3,
            lr_level: idx[9] as u8 + 1,
        })
    }

    /// Value index of every gene. Only meaningful for valid genomes.
    pub fn indices(&self) -> [usize; NUM_GENES] {
        [
            self.i2 as usize,
            self.i3 as usize,
            self.i4 as usize,
            self.o1.index(),
            self.o2.index(),
            self.o3.index(),
            self.o4.index(),
            self.n_c.wrapping_sub(2) as usize,
            self.n_f.wrapping_sub(3) as usize,
            self.lr_level.wrapping_sub(1) as usize,
        ]
    }

    pub fn gene(&self, gene: usize) -> usize {
        self.indices()[gene]
    }

    /// Returns a copy with `gene` set to value index `value`.
    pub fn with_gene(&self, gene: usize, value: usize) -> Result<Self> {
        let mut idx = self.indices();
        idx[gene] = value;
        Genome::from_indices(idx)
    }

    pub fn ops(&self) -> [Operation; NODES_PER_CELL] {
        [self.o1, self.o2, self.o3, self.o4]
    }

    pub fn learning_rate(&self) -> f64 {
        f64::from(self.lr_level) * 1e-6
    }

    /// True iff every field lies in its admissible range.
    pub fn validate(&self) -> bool {
        self.i2 <= 1
            && self.i3 <= 2
            && self.i4 <= 3
            && (2..=4).contains(&self.n_c)
            && (3..=5).contains(&self.n_f)
            && (1..=9).contains(&self.lr_level)
    }

    pub fn decode(&self) -> Result<ArchitectureDescriptor> {
        if !self.validate() {
            return Err(SearchError::InvalidGenome(self.to_string()));
        }
        let n_c = u32::from(self.n_c);
        let nf1 = 1u64 << self.n_f;
        let encoder: Vec<u64> = (0..n_c).map(|i| nf1 << i).collect();
        let mut cell_filters = encoder.clone();
        cell_filters.push(nf1 << n_c);
        cell_filters.extend(encoder.iter().rev());

        let selectors = [0, self.i2, self.i3, self.i4];
        let ops = self.ops();
        let mut node_graph = [NodeSpec {
            input: NodeInput::CellInput,
            op: self.o1,
        }; NODES_PER_CELL];
        for b in 0..NODES_PER_CELL {
            node_graph[b] = NodeSpec {
                input: match selectors[b] {
                    0 => NodeInput::CellInput,
                    k => NodeInput::Node(k),
                },
                op: ops[b],
            };
        }
        Ok(ArchitectureDescriptor {
            num_cells: 2 * n_c + 1,
            cell_filters,
            node_graph,
        })
    }

    /// Exact parameter count of the decoded network.
    pub fn param_count(&self, num_classes: u32) -> Result<u64> {
        Ok(self.decode()?.count_params(num_classes))
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "i2={} i3={} i4={} o1={} o2={} o3={} o4={} n_c={} n_f={} lr_level={}",
            self.i2, self.i3, self.i4, self.o1, self.o2, self.o3, self.o4, self.n_c, self.n_f, self.lr_level
        )
    }
}

impl FromStr for Genome {
    type Err = SearchError;

    /// Parses the canonical `key=value` record produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| SearchError::InvalidGenome(msg);
        let mut fields: [Option<&str>; NUM_GENES] = [None; NUM_GENES];
        for tok in s.split_whitespace() {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{tok}`")))?;
            let pos = GENE_NAMES
                .iter()
                .position(|&n| n == key)
                .ok_or_else(|| bad(format!("unknown field `{key}`")))?;
            if fields[pos].replace(value).is_some() {
                return Err(bad(format!("duplicate field `{key}`")));
            }
        }
        let get = |k: usize| fields[k].ok_or_else(|| bad(format!("missing field `{}`", GENE_NAMES[k])));
        let int = |k: usize| -> Result<u8> {
            get(k)?
                .parse::<u8>()
                .map_err(|e| bad(format!("{}: {e}", GENE_NAMES[k])))
        };
        let g = Genome {
            i2: int(0)?,
            i3: int(1)?,
            i4: int(2)?,
            o1: get(3)?.parse()?,
            o2: get(4)?.parse()?,
            o3: get(5)?.parse()?,
            o4: get(6)?.parse()?,
            n_c: int(7)?,
            n_f: int(8)?,
            lr_level: int(9)?,
        };
        if !g.validate() {
            return Err(bad(format!("field out of range in `{s}`")));
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeInput {
    CellInput,
    /// Output of node `k` (1-based).
    Node(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSpec {
    pub input: NodeInput,
    pub op: Operation,
}

/// Decoded network layout.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureDescriptor {
    pub num_cells: u32,
    /// Filters per cell: encoder cells, bottleneck, decoder cells.
    pub cell_filters: Vec<u64>,
    pub node_graph: [NodeSpec; NODES_PER_CELL],
}

impl ArchitectureDescriptor {
    pub fn encoder_depth(&self) -> usize {
        (self.num_cells as usize - 1) / 2
    }

    /// Length of the longest node chain inside a cell (1..=4).
    pub fn longest_path(&self) -> usize {
        let mut depth = [0usize; NODES_PER_CELL];
        for (b, node) in self.node_graph.iter().enumerate() {
            depth[b] = match node.input {
                NodeInput::CellInput => 1,
                NodeInput::Node(k) => depth[k as usize - 1] + 1,
            };
        }
        depth.into_iter().max().unwrap_or(1)
    }

    fn cell_params(&self, c_in: u64, nf: u64) -> u64 {
        self.node_graph
            .iter()
            .map(|node| {
                let c_src = match node.input {
                    NodeInput::CellInput => c_in,
                    NodeInput::Node(_) => nf,
                };
                node.op.conv_params(c_src, nf) + 2 * nf
            })
            .sum()
    }

    /// Total learnable parameters for a head producing `num_classes` maps.
    pub fn count_params(&self, num_classes: u32) -> u64 {
        let n_c = self.encoder_depth();
        let mut total = 0;
        let mut upstream = INPUT_CHANNELS;
        for (cell, &nf) in self.cell_filters.iter().enumerate() {
            if cell > n_c {
                // transpose convolution, then a parameter-free skip summation
                total += 8 * upstream * nf + nf;
                upstream = nf;
            }
            total += self.cell_params(upstream, nf);
            upstream = nf;
        }
        let classes = u64::from(num_classes);
        total + self.cell_filters[0] * classes + classes
    }
}

/// Per-field value subsets restricting [`enumerate_space`].
///
/// Integer fields hold actual gene values (`n_c = [2]`, `lr_level = [1, 4]`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Restriction {
    pub i2: Option<Vec<u8>>,
    pub i3: Option<Vec<u8>>,
    pub i4: Option<Vec<u8>>,
    pub o1: Option<Vec<Operation>>,
    pub o2: Option<Vec<Operation>>,
    pub o3: Option<Vec<Operation>>,
    pub o4: Option<Vec<Operation>>,
    pub n_c: Option<Vec<u8>>,
    pub n_f: Option<Vec<u8>>,
    pub lr_level: Option<Vec<u8>>,
}

impl Restriction {
    /// Sorted, deduplicated value indices allowed for each gene.
    pub fn gene_indices(&self) -> Result<[Vec<usize>; NUM_GENES]> {
        let ints = |k: usize, vals: &Option<Vec<u8>>, offset: u8| -> Result<Vec<usize>> {
            match vals {
                None => Ok((0..GENE_CARDINALITIES[k]).collect()),
                Some(v) => v
                    .iter()
                    .map(|&x| {
                        let idx = x.wrapping_sub(offset) as usize;
                        if x < offset || idx >= GENE_CARDINALITIES[k] {
                            Err(SearchError::InvalidGenome(format!(
                                "restriction value {x} outside range of {}",
                                GENE_NAMES[k]
                            )))
                        } else {
                            Ok(idx)
                        }
                    })
                    .collect(),
            }
        };
        let ops = |vals: &Option<Vec<Operation>>| -> Vec<usize> {
            match vals {
                None => (0..3).collect(),
                Some(v) => v.iter().map(|o| o.index()).collect(),
            }
        };
        let mut out = [
            ints(0, &self.i2, 0)?,
            ints(1, &self.i3, 0)?,
            ints(2, &self.i4, 0)?,
            ops(&self.o1),
            ops(&self.o2),
            ops(&self.o3),
            ops(&self.o4),
            ints(7, &self.n_c, 2)?,
            ints(8, &self.n_f, 3)?,
            ints(9, &self.lr_level, 1)?,
        ];
        for (k, set) in out.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(SearchError::EmptyRestriction(GENE_NAMES[k]));
            }
        }
        Ok(out)
    }
}

/// Odometer over a (restricted) space. Genes are ordered canonically with
/// `i2` most significant and `lr_level` varying fastest.
#[derive(Clone, Debug)]
pub struct SpaceIter {
    allowed: [Vec<usize>; NUM_GENES],
    cursor: [usize; NUM_GENES],
    done: bool,
    remaining: usize,
}

impl Iterator for SpaceIter {
    type Item = Genome;

    fn next(&mut self) -> Option<Genome> {
        if self.done {
            return None;
        }
        let idx: [usize; NUM_GENES] = std::array::from_fn(|k| self.allowed[k][self.cursor[k]]);
        let genome = Genome::from_indices(idx).expect("restriction indices are in range");
        self.remaining -= 1;
        let mut k = NUM_GENES;
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.cursor[k] += 1;
            if self.cursor[k] < self.allowed[k].len() {
                break;
            }
            self.cursor[k] = 0;
        }
        Some(genome)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for SpaceIter {}

/// Every genome of the space, or of `restriction` when given, exactly once in
/// canonical order.
pub fn enumerate_space(restriction: Option<&Restriction>) -> Result<SpaceIter> {
    let allowed = restriction.cloned().unwrap_or_default().gene_indices()?;
    let remaining = allowed.iter().map(Vec::len).product();
    Ok(SpaceIter {
        allowed,
        cursor: [0; NUM_GENES],
        done: false,
        remaining,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn smallest() -> Genome {
        Genome::from_indices([0; NUM_GENES]).unwrap()
    }

    #[test]
    fn validate_examples() {
        let mut g = smallest();
        g.o1 = Operation::Conv3d;
        g.o2 = Operation::Conv3d;
        g.o3 = Operation::Conv3d;
        g.o4 = Operation::Conv3d;
        assert!(g.validate());
        assert!(!Genome { n_c: 5, ..g }.validate());
        assert!(Genome { i3: 2, ..g }.validate());
        assert!(!Genome { i3: 3, ..g }.validate());
        assert!(!Genome { lr_level: 0, ..g }.validate());
    }

    #[test]
    fn decode_schedule() {
        let g = smallest();
        let d = g.decode().unwrap();
        assert_eq!(d.num_cells, 5);
        assert_eq!(d.cell_filters, vec![8, 16, 32, 16, 8]);
        assert_eq!(d.node_graph[0].input, NodeInput::CellInput);

        let d = Genome { n_c: 4, n_f: 5, ..g }.decode().unwrap();
        assert_eq!(d.num_cells, 9);
        assert_eq!(d.cell_filters, vec![32, 64, 128, 256, 512, 256, 128, 64, 32]);
    }

    #[test]
    fn decode_rejects_invalid() {
        let g = Genome { n_c: 5, ..smallest() };
        assert!(matches!(g.decode(), Err(SearchError::InvalidGenome(_))));
    }

    #[test]
    fn node_graph_and_longest_path() {
        let g = Genome {
            i2: 1,
            i3: 2,
            i4: 3,
            ..smallest()
        };
        let d = g.decode().unwrap();
        assert_eq!(d.node_graph[3].input, NodeInput::Node(3));
        assert_eq!(d.longest_path(), 4);
        assert_eq!(smallest().decode().unwrap().longest_path(), 1);
        let g = Genome {
            i2: 1,
            i3: 0,
            i4: 2,
            ..smallest()
        };
        assert_eq!(g.decode().unwrap().longest_path(), 3);
    }

    #[test]
    fn conv3d_costs_more_than_conv2d() {
        let g2 = smallest();
        let g3 = Genome {
            o1: Operation::Conv3d,
            o2: Operation::Conv3d,
            o3: Operation::Conv3d,
            o4: Operation::Conv3d,
            ..g2
        };
        assert!(g3.param_count(4).unwrap() > g2.param_count(4).unwrap());
    }

    #[test]
    fn paper_scale_counts_are_reachable() {
        let in_band = enumerate_space(None)
            .unwrap()
            .filter(|g| g.lr_level == 1)
            .map(|g| g.param_count(4).unwrap())
            .any(|p| (1_000_000..=50_000_000).contains(&p));
        assert!(in_band);
    }

    #[test]
    fn space_sizes() {
        assert_eq!(GENE_CARDINALITIES.iter().product::<usize>(), SPACE_SIZE);
        assert_eq!(SPACE_SIZE, 157_464);
        assert_eq!(enumerate_space(None).unwrap().count(), SPACE_SIZE);
        let r = Restriction {
            n_c: Some(vec![2]),
            lr_level: Some(vec![1]),
            ..Default::default()
        };
        let it = enumerate_space(Some(&r)).unwrap();
        assert_eq!(it.len(), 5_832);
        assert_eq!(it.count(), 5_832);
    }

    #[test]
    fn enumeration_is_canonical_and_unique() {
        let a: Vec<Genome> = enumerate_space(None).unwrap().collect();
        let b: Vec<Genome> = enumerate_space(None).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(a[0], smallest());
        assert_eq!(a[1].lr_level, 2);
        // canonical order coincides with lexicographic order on value indices
        assert!(a.windows(2).all(|w| w[0].indices() < w[1].indices()));
    }

    #[test]
    fn empty_restriction_is_rejected() {
        let r = Restriction {
            o3: Some(vec![]),
            ..Default::default()
        };
        assert!(matches!(
            enumerate_space(Some(&r)),
            Err(SearchError::EmptyRestriction("o3"))
        ));
        let r = Restriction {
            n_f: Some(vec![7]),
            ..Default::default()
        };
        assert!(enumerate_space(Some(&r)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = Genome::from_indices([1, 2, 3, 2, 1, 0, 2, 1, 2, 8]).unwrap();
        let s = g.to_string();
        assert_eq!(
            s,
            "i2=1 i3=2 i4=3 o1=P3D o2=CONV3D o3=CONV2D o4=P3D n_c=3 n_f=5 lr_level=9"
        );
        assert_eq!(s.parse::<Genome>().unwrap(), g);
        assert!("i2=1".parse::<Genome>().is_err());
        assert!(s.replace("n_c=3", "n_c=7").parse::<Genome>().is_err());
    }

    #[test]
    fn json_field_order_is_canonical() {
        let json = serde_json::to_string(&smallest()).unwrap();
        let keys: Vec<usize> = GENE_NAMES
            .iter()
            .map(|k| json.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"o1\":\"CONV2D\""));
    }
}
