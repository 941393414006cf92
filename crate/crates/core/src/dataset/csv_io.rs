use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use super::{Column, ColumnData, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub header: bool,
    /// Tokens read as missing values.
    pub na_markers: Vec<String>,
    /// Columns kept as string levels instead of parsed as numbers.
    pub categorical: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            header: true,
            na_markers: vec!["".into(), "NA".into(), ".".into()],
            categorical: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let names: Vec<String>;
    let mut first_row: Option<csv::StringRecord> = None;
    match records.next() {
        None => return Err(Error::Parse {
            line: 1,
            message: "empty file".into(),
        }),
        Some(rec) => {
            let rec = rec.map_err(csv_err)?;
            if options.header {
                names = rec.iter().map(str::to_string).collect();
            } else {
                names = (1..=rec.len()).map(|i| format!("V{i}")).collect();
                first_row = Some(rec);
            }
        }
    }
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateColumn(n.clone()));
        }
    }

    let categorical: HashSet<&str> = options.categorical.iter().map(String::as_str).collect();
    for c in &categorical {
        if !names.iter().any(|n| n == c) {
            return Err(Error::UnknownColumn(c.to_string()));
        }
    }
    let is_na = |t: &str| options.na_markers.iter().any(|m| m == t);
    let mut cells: Vec<ColumnData> = names
        .iter()
        .map(|n| {
            if categorical.contains(n.as_str()) {
                ColumnData::Categorical(Vec::new())
            } else {
                ColumnData::Numeric(Vec::new())
            }
        })
        .collect();

    let mut row = 0usize;
    let mut push = |rec: &csv::StringRecord, line: usize, row: usize| -> Result<()> {
        if rec.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        for (j, tok) in rec.iter().enumerate() {
            match &mut cells[j] {
                ColumnData::Categorical(v) => {
                    v.push((!is_na(tok)).then(|| tok.to_string()));
                }
                ColumnData::Numeric(v) => {
                    if is_na(tok) {
                        v.push(f64::NAN);
                    } else {
                        match tok.parse::<f64>() {
                            Ok(x) if x.is_finite() => v.push(x),
                            _ => {
                                return Err(Error::NonNumeric {
                                    row,
                                    column: names[j].clone(),
                                    token: tok.to_string(),
                                })
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    };
    if let Some(rec) = first_row {
        push(&rec, 1, row)?;
        row += 1;
    }
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        push(&rec, line, row)?;
        row += 1;
    }
    if row == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Dataset::new(
        names
            .into_iter()
            .zip(cells)
            .map(|(name, data)| Column { name, data })
            .collect(),
    )
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
