use super::{InspectionTally, LossError};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    G,
    PG,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sample_id: String,
    pub label: Label,
}

/// Reads a `sample_id,label` CSV and tallies the labels.
pub fn read_labels(r: impl Read) -> Result<(Vec<LabelRecord>, InspectionTally), LossError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut records = Vec::new();
    let mut tally = InspectionTally::default();
    for rec in rdr.deserialize() {
        let rec: LabelRecord = rec?;
        match rec.label {
            Label::G => tally.good += 1,
            Label::PG => tally.partly_good += 1,
            Label::B => tally.bad += 1,
        }
        records.push(rec);
    }
    Ok((records, tally))
}

#[derive(Debug, Serialize, Deserialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

/// Reads an `epoch,loss` CSV into a dense per-epoch vector. Epochs must be
/// consecutive from 0 or 1; the returned vector is indexed by epoch.
pub fn read_loss_curve(r: impl Read) -> Result<Vec<f64>, LossError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out: Vec<f64> = Vec::new();
    let mut start = None;
    for (k, row) in rdr.deserialize().enumerate() {
        let row: LossRow = row?;
        let first = *start.get_or_insert(row.epoch);
        if first > 1 || row.epoch != first + k {
            return Err(LossError::Parse {
                line: k + 2,
                msg: format!("expected epoch {}, got {}", first.min(1) + k, row.epoch),
            });
        }
        if first == 1 && out.is_empty() {
            out.push(f64::NAN);
        }
        out.push(row.loss);
    }
    if out.is_empty() {
        return Err(LossError::Parse { line: 1, msg: "no epochs".into() });
    }
    Ok(out)
}

pub fn write_loss_curve(w: impl Write, curve: &[f64]) -> Result<(), LossError> {
    let mut wtr = csv::Writer::from_writer(w);
    for (epoch, &loss) in curve.iter().enumerate() {
        wtr.serialize(LossRow { epoch, loss })?;
    }
    wtr.flush()?;
    Ok(())
}
