//! Tabular data: named columns, role assignment, categorical encoding and
//! standardization.

mod csv_io;
mod encode;
mod model;
pub(crate) mod standardize;

pub use csv_io::{load_csv, read_csv, LoadOptions};
pub use encode::one_hot_encode;
pub use model::{EstimationKind, ModelOptions, ModelSpec};
pub use standardize::{
    destandardize, standardize, standardize_matrix, ColumnRole, ColumnScaling, ScaleFlag,
    StandardizationRecord, StandardizeRequest,
};

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Missing cells are NaN.
    Numeric(Vec<f64>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_nan(),
            ColumnData::Categorical(v) => v[row].is_none(),
        }
    }

    /// Level label of a cell, used for grouping and encoding.
    pub fn label(&self, row: usize) -> Option<String> {
        match self {
            ColumnData::Numeric(v) => (!v[row].is_nan()).then(|| format!("{}", v[row])),
            ColumnData::Categorical(v) => v[row].clone(),
        }
    }

    fn select_rows(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Column {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: Vec<Option<S>>) -> Column {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values.into_iter().map(|v| v.map(Into::into)).collect()),
        }
    }
}

/// An immutable table of equally long, uniquely named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
    pub panel_id: Option<String>,
    pub time_id: Option<String>,
    pub cluster_id: Option<String>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Dataset> {
        let n_rows = columns.first().map(|c| c.data.len()).unwrap_or(0);
        if n_rows == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one row".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.data.len() != n_rows {
                return Err(Error::Dimension(format!(
                    "column {:?} has {} rows, expected {}",
                    c.name,
                    c.data.len(),
                    n_rows
                )));
            }
        }
        Ok(Dataset {
            columns,
            n_rows,
            panel_id: None,
            time_id: None,
            cluster_id: None,
        })
    }

    pub fn from_numeric<S: Into<String>>(cols: Vec<(S, Vec<f64>)>) -> Result<Dataset> {
        Dataset::new(
            cols.into_iter()
                .map(|(n, v)| Column::numeric(n, v))
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match &self.column(name)?.data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Categorical(_) => Err(Error::InvalidArgument(format!(
                "column {name:?} is categorical; encode it first"
            ))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<DVector<f64>> {
        Ok(DVector::from_column_slice(self.numeric(name)?))
    }

    /// N x k matrix of the named numeric columns, in the given order.
    pub fn matrix<S: AsRef<str>>(&self, names: &[S]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.n_rows, names.len());
        for (j, name) in names.iter().enumerate() {
            let v = self.numeric(name.as_ref())?;
            m.set_column(j, &DVector::from_column_slice(v));
        }
        Ok(m)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.select_rows(rows),
                })
                .collect(),
            n_rows: rows.len(),
            panel_id: self.panel_id.clone(),
            time_id: self.time_id.clone(),
            cluster_id: self.cluster_id.clone(),
        }
    }

    /// Listwise deletion: drop every row with a missing value in any of the
    /// named columns. Returns the reduced dataset and the number of rows dropped.
    pub fn drop_missing<S: AsRef<str>>(&self, names: &[S]) -> Result<(Dataset, usize)> {
        let cols = names
            .iter()
            .map(|n| self.column(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<usize> = (0..self.n_rows)
            .filter(|&r| cols.iter().all(|c| !c.data.is_missing(r)))
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "no complete rows left after dropping missing values".into(),
            ));
        }
        let dropped = self.n_rows - rows.len();
        Ok((self.select_rows(&rows), dropped))
    }

    /// Replace the data of existing columns or append new ones.
    pub fn with_columns(&self, cols: Vec<Column>) -> Result<Dataset> {
        let mut out = self.clone();
        for c in cols {
            if c.data.len() != self.n_rows {
                return Err(Error::Dimension(format!("column {:?} length", c.name)));
            }
            match out.index_of(&c.name) {
                Some(i) => out.columns[i] = c,
                None => out.columns.push(c),
            }
        }
        Ok(out)
    }

    pub(crate) fn replace_columns(&mut self, at: usize, remove: usize, insert: Vec<Column>) {
        self.columns.splice(at..at + remove, insert);
    }

    /// Group label per row for an identifier column.
    pub fn labels(&self, name: &str) -> Result<Vec<String>> {
        let c = self.column(name)?;
        (0..self.n_rows)
            .map(|r| {
                c.data.label(r).ok_or_else(|| {
                    Error::InvalidArgument(format!("missing identifier in {name:?} at row {r}"))
                })
            })
            .collect()
    }

    /// Dense integer codes (order of first appearance) for an identifier column.
    pub fn group_codes(&self, name: &str) -> Result<Vec<usize>> {
        let labels = self.labels(name)?;
        let mut map = std::collections::HashMap::new();
        Ok(labels
            .into_iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect())
    }
}
