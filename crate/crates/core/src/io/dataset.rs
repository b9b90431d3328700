use std::io::{Read, Write};
use std::path::Path;

use super::{fmt_opt, is_na};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::tree::Matrix;

/// Reads a numeric CSV file. `NA` and empty cells become missing entries; the
/// `response` column, when named, must be fully observed.
pub fn load_csv(path: impl AsRef<Path>, response: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(file, path, response)
}

/// Same as [`load_csv`] for any reader; `origin` only labels error messages.
pub fn read_csv(reader: impl Read, origin: &Path, response: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let response_col = match response {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Input(format!("response column '{name}' not found in {}", origin.display())))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != response_col).collect();

    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = record.position().map_or(r + 2, |p| p.line() as usize);
        let cell = |c: usize| -> Result<Option<f64>> {
            let raw = record.get(c).unwrap_or("");
            if is_na(raw) {
                return Ok(None);
            }
            raw.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line,
                column: c + 1,
                message: format!("non-numeric value '{raw}' in column '{}'", headers[c]),
            })
        };
        let values = feature_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?;
        rows.push(Observation::new(values));
        if let Some(c) = response_col {
            match cell(c)? {
                Some(v) => y.push(v),
                None => {
                    return Err(Error::Input(format!(
                        "{}:{line}: response '{}' is missing",
                        origin.display(),
                        headers[c]
                    )))
                }
            }
        }
    }
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let ds = Dataset::new(names, rows)?;
    match response_col {
        Some(c) => ds.with_response(headers[c].clone(), y),
        None => Ok(ds),
    }
}

/// Writes the features followed by the response column, if any.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

/// [`write_csv`] to any writer.
pub fn write_dataset(data: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = data.feature_names.clone();
    if let Some(name) = &data.response_name {
        header.push(name.clone());
    }
    w.write_record(&header)?;
    for (i, row) in data.rows.iter().enumerate() {
        let mut rec: Vec<String> = row.values().iter().map(|&v| fmt_opt(v)).collect();
        if let Some(y) = &data.response {
            rec.push(y[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a matrix with the given column names.
pub fn write_matrix_csv(m: &Matrix, header: &[String], out: impl Write) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::Shape(format!("{} column names for {} columns", header.len(), m.ncols())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
