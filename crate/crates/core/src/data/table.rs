//! Plain-text feature tables: a header `label,f1,...,fp`, then one
//! comma-separated row per example with an integer label and decimal
//! features.

use std::io::Read;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: Vec<DVector<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }
}

pub fn load_feature_table(path: &Path) -> Result<FeatureTable> {
    let file = std::fs::File::open(path)?;
    read_feature_table(file, &path.display().to_string())
}

pub fn read_feature_table<R: Read>(reader: R, name: &str) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let at = |line: u64| format!("{name} line {line}");

    let header = rdr
        .headers()
        .map_err(|e| Error::format(at(1), e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::format(at(1), "empty file"));
    }
    if &header[0] != "label" || header.len() < 2 {
        return Err(Error::format(at(1), "header must be label,f1,...,fp"));
    }
    let width = header.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::format(at(line), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::format(
                at(line),
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        let label: usize = record[0]
            .parse()
            .map_err(|_| Error::format(at(line), format!("label '{}' is not an integer", &record[0])))?;
        let mut row = DVector::zeros(width - 1);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::format(at(line), format!("column {} value '{cell}' is not numeric", j + 2))
            })?;
            row[j] = v;
        }
        features.push(row);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::format(at(2), "no data rows"));
    }
    Ok(FeatureTable { features, labels })
}

pub fn write_feature_table<W: std::io::Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = table.dim();
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((1..=p).map(|j| format!("f{j}")))
        .collect();
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(&header).map_err(io)?;
    for (x, y) in table.features.iter().zip(&table.labels) {
        let row: Vec<String> = std::iter::once(y.to_string())
            .chain(x.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<FeatureTable> {
        read_feature_table(text.as_bytes(), "t.csv")
    }

    #[test]
    fn well_formed_table() {
        let t = read("label,f1,f2\n3,0.5,-1\n0,2e-3,4\n9,1,1\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.labels, vec![3, 0, 9]);
        assert_eq!(t.features[1][0], 0.002);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = read("label,f1,f2\n3,0.5,-1\n0,2\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn non_numeric_cell_names_line() {
        let err = read("label,f1\n1,0.5\n2,abc\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("abc"), "{err}");
        assert!(read("label,f1\nx,0.5\n").is_err());
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(read("").is_err());
        assert!(read("label,f1\n").is_err());
        assert!(read("y,f1\n1,2\n").is_err());
    }

    #[test]
    fn write_then_read() {
        let t = FeatureTable {
            features: vec![DVector::from_column_slice(&[0.1, -3.25]), DVector::from_column_slice(&[1e-9, 7.0])],
            labels: vec![4, 1],
        };
        let mut buf = Vec::new();
        write_feature_table(&t, &mut buf).unwrap();
        assert_eq!(read_feature_table(buf.as_slice(), "mem").unwrap(), t);
    }
}
