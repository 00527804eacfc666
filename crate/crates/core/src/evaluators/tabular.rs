//! Lookup-table evaluator backed by a CSV file.
//!
//! Header: the ten genome fields in canonical order followed by
//! `mc_dice_train,mc_dice_val,e_max`.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator};
use crate::genome::{Genome, Operation};
use crate::objectives::{ObjectiveConfig, TrainingMetrics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
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
    pub mc_dice_train: f64,
    pub mc_dice_val: f64,
    pub e_max: u32,
}

impl TableRow {
    pub fn new(g: &Genome, m: &TrainingMetrics) -> Self {
        TableRow {
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
            mc_dice_train: m.mc_dice_train,
            mc_dice_val: m.mc_dice_val,
            e_max: m.e_max,
        }
    }

    pub fn genome(&self) -> Genome {
        Genome {
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
        }
    }
}

pub fn write_table<W: io::Write>(out: W, rows: &[TableRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct TabularEvaluator {
    rows: HashMap<Genome, (f64, f64, u32)>,
}

impl TabularEvaluator {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let err = |message: String| EvalError::Table {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
        Self::from_reader(file).map_err(|e| match e {
            EvalError::Table { message, .. } => err(message),
            other => other,
        })
    }

    pub fn from_reader<R: io::Read>(input: R) -> Result<Self, EvalError> {
        let table_err = |message: String| EvalError::Table {
            path: "<reader>".into(),
            message,
        };
        let mut rows = HashMap::new();
        for (line, row) in csv::Reader::from_reader(input).deserialize::<TableRow>().enumerate() {
            let row = row.map_err(|e| table_err(e.to_string()))?;
            let g = row.genome();
            if !g.validate() {
                return Err(table_err(format!("row {}: invalid genome `{g}`", line + 1)));
            }
            rows.insert(g, (row.mc_dice_train, row.mc_dice_val, row.e_max));
        }
        Ok(TabularEvaluator { rows })
    }

    pub fn from_rows(rows: &[TableRow]) -> Self {
        TabularEvaluator {
            rows: rows
                .iter()
                .map(|r| (r.genome(), (r.mc_dice_train, r.mc_dice_val, r.e_max)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Evaluator for TabularEvaluator {
    fn evaluate(&self, g: &Genome, cfg: &ObjectiveConfig) -> Result<TrainingMetrics, EvalError> {
        let &(train, val, e_max) = self.rows.get(g).ok_or_else(|| EvalError::MissingRow(g.to_string()))?;
        let m = TrainingMetrics {
            mc_dice_train: train,
            mc_dice_val: val,
            e_max,
            total_epochs: cfg.total_epochs,
        };
        m.check(cfg)
            .map_err(|e| EvalError::Protocol(format!("table row for `{g}`: {e}")))?;
        Ok(m)
    }

    fn is_enumerable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluators::synthetic_metrics;
    use crate::genome::NUM_GENES;

    #[test]
    fn one_row_table() {
        let cfg = ObjectiveConfig::default();
        let g = Genome::from_indices([1, 1, 1, 1, 1, 1, 1, 1, 1, 1]).unwrap();
        let other = Genome::from_indices([0; NUM_GENES]).unwrap();
        let m = synthetic_metrics(&g, &cfg);
        let mut buf = Vec::new();
        write_table(&mut buf, &[TableRow::new(&g, &m)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i2,i3,i4,o1,o2,o3,o4,n_c,n_f,lr_level,mc_dice_train,mc_dice_val,e_max\n"));
        assert!(text.contains("CONV3D"));

        let ev = TabularEvaluator::from_reader(buf.as_slice()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev.evaluate(&g, &cfg).unwrap(), m);
        assert!(matches!(ev.evaluate(&other, &cfg), Err(EvalError::MissingRow(_))));
    }

    #[test]
    fn rejects_bad_rows() {
        let text = "i2,i3,i4,o1,o2,o3,o4,n_c,n_f,lr_level,mc_dice_train,mc_dice_val,e_max\n\
                    0,0,0,CONV2D,CONV2D,CONV2D,CONV2D,9,3,1,1.0,1.0,10\n";
        assert!(TabularEvaluator::from_reader(text.as_bytes()).is_err());
        let text = "i2,i3\n0,0\n";
        assert!(TabularEvaluator::from_reader(text.as_bytes()).is_err());
    }
}
