//! Dataset files: a `label,f1,...,fD` header followed by one sample per row.

use std::path::Path;

use dmdsc_core::data::{LabeledDataset, Role};
use dmdsc_core::Matrix;

use crate::fsutil::write_atomic;
use crate::{Error, Result};

fn header(dim: usize) -> Vec<String> {
    std::iter::once("label".to_string())
        .chain((1..=dim).map(|i| format!("f{i}")))
        .collect()
}

/// Reads a dataset and tags it with `role`.
///
/// Every row must have as many fields as the header. Parse errors carry the
/// 1-based line and column of the offending field.
pub fn read_csv(path: &Path, role: Role) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));

    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 0,
            message: e.to_string(),
        }
    };

    let head = reader.headers().map_err(csv_err)?.clone();
    if head.is_empty() || (head.len() == 1 && head[0].is_empty()) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let width = head.len();
    if width < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "header needs a label column and at least one feature column".into(),
        });
    }
    for (i, (got, want)) in head.iter().zip(header(width - 1)).enumerate() {
        if got != want {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                column: i + 1,
                message: format!("expected header field {want:?}, found {got:?}"),
            });
        }
    }

    let dim = width - 1;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Dimension {
                path: path.to_path_buf(),
                line,
                expected: width,
                found: record.len(),
            });
        }
        let parse_err = |column: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        };
        let label: u32 = record[0]
            .parse()
            .map_err(|_| parse_err(1, format!("label {:?} is not a non-negative integer", &record[0])))?;
        labels.push(label);
        for (j, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(j + 1, format!("feature {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(j + 1, format!("feature {field:?} is not finite")));
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let features = Matrix::from_vec(labels.len(), dim, values)?;
    Ok(LabeledDataset::new(role, features, labels)?)
}

/// Serializes a dataset. Floats use the shortest representation that parses
/// back to the same value.
pub fn to_csv_bytes(dataset: &LabeledDataset) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
    writer.write_record(header(dataset.dim())).map_err(fail)?;
    let mut row = Vec::with_capacity(dataset.dim() + 1);
    for (i, features) in dataset.features().iter_rows().enumerate() {
        row.clear();
        row.push(dataset.labels()[i].to_string());
        row.extend(features.iter().map(|v| format!("{v:?}")));
        writer.write_record(&row).map_err(fail)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv encoding failed: {e}")))
}

pub fn write_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    write_atomic(path, &to_csv_bytes(dataset)?)
}
