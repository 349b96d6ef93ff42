//! Comma-separated tables with a header row; an empty field is a missing value.

use std::path::Path;

use hilma::Dataset;
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Which columns hold the response and the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub response: String,
    /// `None` takes every other column, in file order.
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            response: "y".into(),
            covariates: None,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        kind => CliError::Csv {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows })
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(&table.headers).map_err(|e| csv_error(path, e))?;
    for r in &table.rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

impl Table {
    fn column(&self, path: &Path, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: format!("no column named '{name}' (columns: {})", self.headers.join(", ")),
            })
    }

    /// Covariate column names selected by `spec`.
    pub fn covariate_names(&self, spec: &ColumnSpec) -> Vec<String> {
        match &spec.covariates {
            Some(c) => c.clone(),
            None => self
                .headers
                .iter()
                .filter(|h| **h != spec.response)
                .cloned()
                .collect(),
        }
    }

    /// `path` is used only to label errors.
    pub fn to_dataset(&self, path: &Path, spec: &ColumnSpec) -> Result<Dataset> {
        let yc = self.column(path, &spec.response)?;
        let cov: Vec<usize> = self
            .covariate_names(spec)
            .iter()
            .map(|c| self.column(path, c))
            .collect::<Result<_>>()?;
        let n = self.rows.len();
        let mut x = DMatrix::zeros(n, cov.len());
        let mut y = Vec::with_capacity(n);
        for (r, row) in self.rows.iter().enumerate() {
            // header is line 1
            let line = r as u64 + 2;
            let parse = |c: usize| -> Result<Option<f64>> {
                let s = row[c].trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| CliError::Csv {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column '{}': cannot parse '{s}' as a number", self.headers[c]),
                })
            };
            for (j, &c) in cov.iter().enumerate() {
                x[(r, j)] = parse(c)?.ok_or_else(|| CliError::Csv {
                    path: path.to_path_buf(),
                    line,
                    message: format!("covariate '{}' is missing", self.headers[c]),
                })?;
            }
            y.push(parse(yc)?);
        }
        if y.iter().all(Option::is_none) {
            return Err(hilma::Error::Data(format!(
                "{}: every response is missing",
                path.display()
            ))
            .into());
        }
        Ok(Dataset::from_rows(x, y)?)
    }
}

/// Rows in their original order; responses in the last column.
pub fn dataset_table(data: &Dataset, covariates: &[String], response: &str) -> Table {
    let mut headers = covariates.to_vec();
    headers.push(response.to_string());
    let rows = data
        .rows_in_original_order()
        .into_iter()
        .map(|(x, y)| {
            let mut r: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            r.push(y.map_or(String::new(), |v| v.to_string()));
            r
        })
        .collect();
    Table { headers, rows }
}

pub fn save_dataset(path: &Path, data: &Dataset, covariates: &[String], response: &str) -> Result<()> {
    write_table(path, &dataset_table(data, covariates, response))
}

pub fn load_dataset(path: &Path, spec: &ColumnSpec) -> Result<Dataset> {
    read_table(path)?.to_dataset(path, spec)
}
