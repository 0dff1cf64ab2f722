//! CSV input and output.
//!
//! Tables have a header row, UTF-8 text, and `.` as the decimal separator.
//! Functional blocks are wide tables (one curve per row) with a one-column
//! sidecar table listing the domain points.

use ndarray::Array2;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::functional::FunctionalBlock;

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub values: Array2<f64>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Columns selected by name, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Array2<f64>> {
        let idx = names
            .iter()
            .map(|name| {
                self.column_index(name)
                    .ok_or_else(|| CdeError::domain(format!("column '{name}' not found")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select(ndarray::Axis(1), &idx))
    }
}

fn csv_error(e: csv::Error) -> CdeError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CdeError::Io(io),
        kind => CdeError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn read_table_from<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CdeError::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let width = headers.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| CdeError::Parse {
                line,
                message: format!("column '{}': '{field}' is not a number", headers[k]),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let values = Array2::from_shape_vec((rows, width), data).expect("csv enforces equal record lengths");
    Ok(Table { headers, values })
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    read_table_from(File::open(path)?)
}

/// Splits a table into covariates (every column not named as a response)
/// and responses.
pub fn dataset_from_table(table: &Table, responses: &[String]) -> Result<Dataset> {
    if responses.is_empty() {
        return Err(CdeError::config("at least one response column is required"));
    }
    let y = table.select(responses)?;
    let covariate_names: Vec<String> = table
        .headers
        .iter()
        .filter(|h| !responses.contains(h))
        .cloned()
        .collect();
    let x = table.select(&covariate_names)?;
    let ds = Dataset {
        covariates: x,
        responses: y,
        functional: Vec::new(),
        covariate_names,
        response_names: responses.to_vec(),
    };
    ds.validate()?;
    Ok(ds)
}

pub fn read_functional(block: impl AsRef<Path>, domain: impl AsRef<Path>) -> Result<FunctionalBlock> {
    let values = read_table(block)?.values;
    let domain = read_table(domain)?;
    if domain.values.ncols() != 1 {
        return Err(CdeError::domain("domain file must have exactly one column"));
    }
    FunctionalBlock::new(values, domain.values.column(0).to_vec())
}

pub fn write_table<W: Write>(writer: W, headers: &[String], rows: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(headers).map_err(csv_error)?;
    for row in rows.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes scalar covariates followed by responses.
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let headers: Vec<String> = ds.covariate_names.iter().chain(&ds.response_names).cloned().collect();
    let rows = ndarray::concatenate(ndarray::Axis(1), &[ds.covariates.view(), ds.responses.view()])
        .expect("row counts validated");
    write_table(File::create(path)?, &headers, &rows)
}

pub fn write_functional(
    block_path: impl AsRef<Path>,
    domain_path: impl AsRef<Path>,
    block: &FunctionalBlock,
) -> Result<()> {
    let headers: Vec<String> = (0..block.n_points()).map(|k| format!("f{k}")).collect();
    write_table(File::create(block_path)?, &headers, &block.values)?;
    let domain = Array2::from_shape_vec((block.n_points(), 1), block.domain_points.clone()).expect("column shape");
    write_table(File::create(domain_path)?, &["domain".to_string()], &domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_splits() {
        let t = read_table_from("a,y,b\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        let ds = dataset_from_table(&t, &["y".into()]).unwrap();
        assert_eq!(ds.covariate_names, vec!["a", "b"]);
        assert_eq!(ds.covariates.row(1).to_vec(), vec![4.0, 6.0]);
        assert_eq!(ds.responses.column(0).to_vec(), vec![2.0, 5.0]);
    }

    #[test]
    fn missing_response_is_named() {
        let t = read_table_from("a,b\n1,2\n".as_bytes()).unwrap();
        let err = dataset_from_table(&t, &["y".into()]).unwrap_err();
        assert!(err.to_string().contains("'y'"));
    }

    #[test]
    fn bad_number_reports_line() {
        let err = read_table_from("a,b\n1,2\n3,oops\n".as_bytes()).unwrap_err();
        match err {
            CdeError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(
            read_table_from("a,b\n1,2\n3\n".as_bytes()),
            Err(CdeError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn empty_body_gives_zero_rows() {
        let t = read_table_from("a,b\n".as_bytes()).unwrap();
        assert_eq!(t.values.nrows(), 0);
    }
}
