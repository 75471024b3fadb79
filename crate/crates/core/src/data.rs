//! Column-oriented numeric datasets with CSV ingestion and output.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::graph::Variable;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a finite number")]
    NotANumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("column {0:?} appears twice")]
    DuplicateColumn(String),
    #[error("no column named {0:?}")]
    MissingColumn(String),
    #[error("column {column:?} has {len} values, expected {expected}")]
    LengthMismatch {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("invalid column name: {0}")]
    BadName(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    names: Vec<Variable>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl Dataset {
    /// Builds a dataset from named columns, kept in the given order.
    pub fn new(columns: Vec<(Variable, Vec<f64>)>) -> Result<Self, DataError> {
        let n = columns.first().map_or(0, |(_, c)| c.len());
        let mut seen = BTreeSet::new();
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if !seen.insert(name.clone()) {
                return Err(DataError::DuplicateColumn(name.to_string()));
            }
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    column: name.to_string(),
                    len: col.len(),
                    expected: n,
                });
            }
            if let Some(row) = col.iter().position(|x| !x.is_finite()) {
                return Err(DataError::NotANumber {
                    row: row + 1,
                    column: name.to_string(),
                    value: col[row].to_string(),
                });
            }
            names.push(name);
            data.push(col);
        }
        Ok(Dataset {
            names,
            columns: data,
            n,
        })
    }

    /// Convenience constructor from string names.
    pub fn from_columns<S: AsRef<str>>(columns: Vec<(S, Vec<f64>)>) -> Result<Self, DataError> {
        let named = columns
            .into_iter()
            .map(|(k, c)| {
                Variable::new(k.as_ref())
                    .map(|v| (v, c))
                    .map_err(|e| DataError::BadName(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Dataset::new(named)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[Variable] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64], DataError> {
        self.names
            .iter()
            .position(|v| v.as_str() == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&Variable, &[f64])> {
        self.names.iter().zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn from_csv_reader<R: io::Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(DataError::Ragged {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| DataError::NotANumber {
                        row,
                        column: header[j].clone(),
                        value: field.to_string(),
                    })?;
                cols[j].push(v);
            }
        }
        Dataset::from_columns(header.into_iter().zip(cols).collect())
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DataError> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Header of names, then one row per observation with 17 significant
    /// digits so values survive a round trip.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.names.iter().map(Variable::as_str))?;
        let mut row = Vec::with_capacity(self.columns.len());
        for i in 0..self.n {
            row.clear();
            row.extend(self.columns.iter().map(|c| format!("{:.16e}", c[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
