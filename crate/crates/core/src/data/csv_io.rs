//! CSV readers and writers.
//!
//! Text datasets use a `text,label` header (RFC 4180 quoting). Numeric datasets
//! written by the generators use `label,x0,x1,...`.

use std::io::{Read, Write};

use super::{FeatureVector, LabeledDataset};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextRecord {
    pub text: String,
    pub label: usize,
}

pub fn read_text_csv<R: Read>(reader: R) -> Result<Vec<TextRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "text" || &headers[1] != "label" {
        return Err(invalid(format!("expected header `text,label`, got {:?}", headers)));
    }
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let label = record[1]
            .trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("row {}: label {:?} is not a non-negative integer", row + 1, &record[1])))?;
        out.push(TextRecord {
            text: record[0].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn write_text_csv<W: Write>(writer: W, records: &[TextRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["text", "label"])?;
    for r in records {
        wtr.write_record([r.text.as_str(), &r.label.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_feature_csv<W: Write>(writer: W, ds: &LabeledDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.dim()).map(|i| format!("x{i}")));
    wtr.write_record(&header)?;
    for (x, y) in ds.inputs().iter().zip(ds.labels()) {
        let mut row = vec![y.to_string()];
        row.extend(x.values().iter().map(|v| format!("{v:e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R, num_classes: usize, domain_tag: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let dim = rdr.headers()?.len().saturating_sub(1);
    if dim == 0 {
        return Err(invalid("feature csv needs a label column and at least one feature column"));
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let parse_err = |s: &str| Error::InvalidArgument(format!("bad number {s:?}"));
        labels.push(record[0].parse::<usize>().map_err(|_| parse_err(&record[0]))?);
        let values = record
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(s)))
            .collect::<Result<Vec<_>>>()?;
        inputs.push(FeatureVector::new(values)?);
    }
    LabeledDataset::new(inputs, labels, dim, num_classes, domain_tag)
}
