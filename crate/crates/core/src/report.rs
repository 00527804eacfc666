//! CSV export of fronts.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluators::EvaluationRecord;
use crate::genome::{Genome, Operation};
use crate::metrics::FrontMember;
use crate::objectives::{ObjectiveVector, TrainingMetrics};

/// One front member as written to `nds.csv` and `true_front.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
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
    pub f1: f64,
    pub f2: f64,
    pub param_count: u64,
    pub mc_dice_train: f64,
    pub mc_dice_val: f64,
    pub e_max: u32,
}

impl FrontRow {
    pub fn new(g: &Genome, objectives: &ObjectiveVector, param_count: u64, m: &TrainingMetrics) -> Self {
        FrontRow {
            i2: g.i2,
            i3: g.i3,
            i4: g.i4,
            o1: g.o1,
            o2: g.o2,
            o3: g.o3,
            o4: g.o4,
            n_c: g.n_c,
            n_f: g.n_f,
            lr_level: g.lr_level,
            f1: objectives.f1,
            f2: objectives.f2,
            param_count,
            mc_dice_train: m.mc_dice_train,
            mc_dice_val: m.mc_dice_val,
            e_max: m.e_max,
        }
    }

    pub fn genome(&self) -> Result<Genome> {
        let g = Genome {
            i2: self.i2,
            i3: self.i3,
            i4: self.i4,
            o1: self.o1,
            o2: self.o2,
            o3: self.o3,
            o4: self.o4,
            n_c: self.n_c,
            n_f: self.n_f,
            lr_level: self.lr_level,
        };
        if !g.validate() {
            return Err(crate::SearchError::InvalidGenome(g.to_string()));
        }
        Ok(g)
    }

    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.f1, self.f2)
    }
}

impl From<&EvaluationRecord> for FrontRow {
    fn from(r: &EvaluationRecord) -> Self {
        FrontRow::new(&r.genome, &r.objectives, r.param_count, &r.metrics)
    }
}

impl FrontMember {
    pub fn row(&self, num_classes: u32) -> Result<FrontRow> {
        Ok(FrontRow::new(
            &self.genome,
            &self.objectives,
            self.genome.param_count(num_classes)?,
            &self.metrics,
        ))
    }
}

/// Writes rows sorted by `(f1, f2)`.
pub fn write_front<W: Write>(out: W, rows: &[FrontRow]) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)));
    let mut w = csv::Writer::from_writer(out);
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_front<R: Read>(input: R) -> Result<Vec<FrontRow>> {
    let mut rows = Vec::new();
    for r in csv::Reader::from_reader(input).deserialize() {
        let row: FrontRow = r?;
        row.genome()?;
        rows.push(row);
    }
    Ok(rows)
}
