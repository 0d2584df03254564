use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{fico_feature_names, FeatureTable};
use crate::error::{Error, Result};

pub const TARGET_COLUMN: &str = "RiskPerformance";
pub const FICO_FILE_NAME: &str = "heloc_dataset_v1.csv";

/// Loads a labelled CSV. If any HELOC column is present, all 23 are
/// required and reordered into canonical order, and extra columns are
/// ignored. Otherwise every non-target column is a feature, in file order.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<FeatureTable> {
    let file = File::open(path.as_ref())?;
    read_csv(file, target_column)
}

pub fn read_csv<R: Read>(reader: R, target_column: &str) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Schema("file has no header row".into()));
    }
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let target_col =
        position(target_column).ok_or_else(|| Error::Schema(format!("missing target column `{target_column}`")))?;
    let fico = fico_feature_names();
    let fico_cols: Vec<Option<usize>> = fico.iter().map(|n| position(n)).collect();
    let looks_fico = fico_cols.iter().any(Option::is_some);
    let (names, cols) = if looks_fico {
        let mut cols = Vec::with_capacity(fico.len());
        for (name, c) in fico.iter().zip(&fico_cols) {
            cols.push(c.ok_or_else(|| Error::Schema(format!("missing feature column `{name}`")))?);
        }
        (fico, cols)
    } else {
        let cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target_col).collect();
        if cols.is_empty() {
            return Err(Error::Schema("file has no feature columns".into()));
        }
        (cols.iter().map(|&c| headers[c].trim().to_string()).collect(), cols)
    };

    let mut values = Vec::new();
    let mut target = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let label = record.get(target_col).unwrap_or("").trim();
        target.push(match label {
            "Bad" | "1" => 1,
            "Good" | "0" => 0,
            other => {
                return Err(Error::Parse {
                    row,
                    column: target_column.to_string(),
                    value: other.to_string(),
                })
            }
        });
        for (name, &c) in names.iter().zip(&cols) {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
    }
    if target.is_empty() {
        return Err(Error::Schema("file holds no data rows".into()));
    }
    FeatureTable::new(names, values, target)
}

/// Writes the table in the same layout [`read_csv`] accepts: target first,
/// then the feature columns.
pub fn write_csv<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![TARGET_COLUMN.to_string()];
    header.extend(table.feature_names().iter().cloned());
    wtr.write_record(&header)?;
    for (row, &t) in table.rows().zip(table.target()) {
        let mut rec = vec![if t == 1 { "Bad".to_string() } else { "Good".to_string() }];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Looks for the HELOC CSV under `$ATTRIB_DATA_DIR`.
pub fn find_fico_csv() -> Option<PathBuf> {
    let dir = std::env::var_os("ATTRIB_DATA_DIR")?;
    let path = Path::new(&dir).join(FICO_FILE_NAME);
    path.is_file().then_some(path)
}
