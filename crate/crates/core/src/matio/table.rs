//! Tabular CSV output.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A row of named values. Column order is taken from the first row.
pub type Row = Vec<(String, f64)>;

/// Builds a row from `&str` names.
pub fn row<const N: usize>(cells: [(&str, f64); N]) -> Row {
    cells.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Formats a value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Writes rows as CSV to any writer. Every row must carry the same column
/// names in the same order. An empty row list needs an explicit header.
pub fn write_table_to<W: Write>(rows: &[Row], header: &[&str], out: W) -> Result<()> {
    let columns: Vec<String> = match rows.first() {
        Some(first) => first.iter().map(|(k, _)| k.clone()).collect(),
        None => header.iter().map(|s| s.to_string()).collect(),
    };
    if !header.is_empty() && columns.iter().map(String::as_str).ne(header.iter().copied()) {
        return Err(Error::Schema(format!(
            "row columns {columns:?} do not match header {header:?}"
        )));
    }
    for (k, r) in rows.iter().enumerate() {
        if r.len() != columns.len() || r.iter().zip(&columns).any(|((name, _), col)| name != col) {
            return Err(Error::Schema(format!("row {k} does not match columns {columns:?}")));
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Schema(format!("csv: {e}"));
    w.write_record(&columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|(_, v)| format_value(*v)))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("csv flush: {e}")))?;
    Ok(())
}

/// Writes rows to `path`. `header` is used when `rows` is empty and is
/// checked against the rows otherwise (pass `&[]` to skip the check).
pub fn write_table(rows: &[Row], header: &[&str], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_table_to(rows, header, &mut buf)?;
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
