use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use crate::data::{Period, PeriodizedDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Reads a UTF-8, comma-delimited CSV with a header row.
///
/// Rows are grouped by the integer-valued `period_column`; period values must
/// cover `0..=max` without gaps. Every column other than the label and period
/// columns is a feature and must be numeric.
pub fn load_periodized_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    period_column: &str,
) -> Result<PeriodizedDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(label_column)?;
    let period_idx = find(period_column)?;
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && i != period_idx)
        .collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut groups: BTreeMap<u64, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let period_raw = record.get(period_idx).unwrap_or("").trim();
        let period = parse_period(period_raw).ok_or_else(|| Error::InvalidPeriod {
            row,
            value: period_raw.to_string(),
        })?;
        let label_raw = record.get(label_idx).unwrap_or("").trim();
        let label = match label_raw.parse::<f64>() {
            Ok(0.0) => 0u8,
            Ok(1.0) => 1u8,
            _ => {
                return Err(Error::NonBinaryLabel {
                    row,
                    value: label_raw.to_string(),
                })
            }
        };
        let entry = groups.entry(period).or_default();
        for &j in &feature_idx {
            let raw = record.get(j).unwrap_or("").trim();
            let value = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    column: headers[j].to_string(),
                    row,
                    value: raw.to_string(),
                })?;
            entry.0.push(value);
        }
        entry.1.push(label);
    }

    let max_period = groups.keys().next_back().copied().unwrap_or(0);
    let mut periods = Vec::with_capacity(groups.len());
    for p in 0..=max_period {
        let Some((values, labels)) = groups.remove(&p) else {
            return Err(Error::EmptyPeriod(p as usize));
        };
        let features = Matrix::new(labels.len(), feature_names.len(), values)?;
        periods.push(Period::new(p as usize, features, labels)?);
    }
    if periods.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no data rows", path.display())));
    }
    PeriodizedDataset::new(feature_names, periods)
}

fn parse_period(raw: &str) -> Option<u64> {
    if let Ok(v) = raw.parse::<u64>() {
        return Some(v);
    }
    let v = raw.parse::<f64>().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < 1e15).then_some(v as u64)
}

/// Writes `period,label,<features...>` rows, one per observation.
pub fn write_periodized_csv(
    dataset: &PeriodizedDataset,
    path: impl AsRef<Path>,
    label_column: &str,
    period_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![period_column.to_string(), label_column.to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for p in &dataset.periods {
        for i in 0..p.len() {
            record.clear();
            record.push(p.period_index.to_string());
            record.push(p.labels[i].to_string());
            record.extend(p.features.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
