use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::MissingPolicy;
use crate::error::{Error, Result};

/// Cell spellings read as missing values.
pub const DEFAULT_NA: [&str; 5] = ["", "NA", "NaN", "nan", "."];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub policy: MissingPolicy,
    pub na_values: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            policy: MissingPolicy::Strict,
            na_values: DEFAULT_NA.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Selected numeric columns of a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawTable {
    pub names: Vec<String>,
    /// Column-major values, one vector per name.
    pub columns: Vec<Vec<f64>>,
    /// Rows dropped for missing or unparseable cells.
    pub dropped: usize,
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.into()))
    }
}

pub fn ingest_csv(path: &Path, columns: &[String], opts: &CsvOptions) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    ingest_reader(file, columns, opts)
}

/// Reads the named columns. Rows are numbered from 1 after the header.
/// Missing cells fail under the strict policy and drop the row otherwise.
pub fn ingest_reader<R: Read>(reader: R, columns: &[String], opts: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::MissingColumn(c.clone()))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    let mut dropped = 0;
    let mut buf = vec![0.0; columns.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut bad = None;
        for (k, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            let v = if opts.na_values.iter().any(|na| na == cell) {
                None
            } else {
                cell.parse::<f64>().ok().filter(|v| v.is_finite())
            };
            match v {
                Some(v) => buf[k] = v,
                None => {
                    bad = Some(k);
                    break;
                }
            }
        }
        match bad {
            None => out.iter_mut().zip(&buf).for_each(|(c, &v)| c.push(v)),
            Some(k) if opts.policy == MissingPolicy::Strict => {
                return Err(Error::ParseError {
                    row: r + 1,
                    column: columns[k].clone(),
                })
            }
            Some(_) => dropped += 1,
        }
    }
    if out.first().is_none_or(Vec::is_empty) {
        return Err(Error::EmptyDataset);
    }
    Ok(RawTable {
        names: columns.to_vec(),
        columns: out,
        dropped,
    })
}
