//! Matrix Market `coordinate real` reader for symmetric matrices.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matio::SparseSymMatrix;

const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix_market(&text)
}

pub fn parse_matrix_market(text: &str) -> Result<SparseSymMatrix> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (banner_line, banner) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty input"))?;
    let symmetry = parse_banner(banner_line, banner)?;

    let mut size: Option<(usize, usize)> = None;
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    let mut order = 0;

    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match size {
            None => {
                let rows = parse_usize(fields.next(), line_no, "row count")?;
                let cols = parse_usize(fields.next(), line_no, "column count")?;
                let nnz = parse_usize(fields.next(), line_no, "entry count")?;
                if fields.next().is_some() {
                    return Err(Error::parse(line_no, "trailing fields on size line"));
                }
                if rows != cols {
                    return Err(Error::parse(
                        line_no,
                        format!("matrix must be square, got {rows}x{cols}"),
                    ));
                }
                if rows == 0 {
                    return Err(Error::parse(line_no, "matrix order must be positive"));
                }
                order = rows;
                raw.reserve(nnz);
                size = Some((rows, nnz));
            }
            Some((_, nnz)) => {
                if raw.len() == nnz {
                    return Err(Error::parse(line_no, format!("more than {nnz} entries")));
                }
                let i = parse_usize(fields.next(), line_no, "row index")?;
                let j = parse_usize(fields.next(), line_no, "column index")?;
                let v: f64 = fields
                    .next()
                    .ok_or_else(|| Error::parse(line_no, "missing value"))?
                    .parse()
                    .map_err(|e| Error::parse(line_no, format!("bad value: {e}")))?;
                if i == 0 || j == 0 || i > order || j > order {
                    return Err(Error::parse(
                        line_no,
                        format!("index ({i}, {j}) out of range for order {order}"),
                    ));
                }
                if !v.is_finite() {
                    return Err(Error::parse(line_no, "non-finite value"));
                }
                raw.push((i - 1, j - 1, v));
            }
        }
    }

    let (n, nnz) = size.ok_or_else(|| Error::parse(0, "missing size line"))?;
    if raw.len() != nnz {
        return Err(Error::parse(
            0,
            format!("declared {nnz} entries, found {}", raw.len()),
        ));
    }

    match symmetry {
        Symmetry::Symmetric => SparseSymMatrix::from_triplets(n, raw),
        Symmetry::General => {
            let mut full: HashMap<(usize, usize), f64> = HashMap::with_capacity(raw.len());
            for (i, j, v) in raw {
                *full.entry((i, j)).or_insert(0.0) += v;
            }
            for (&(i, j), &v) in &full {
                if i == j {
                    continue;
                }
                let w = full.get(&(j, i)).copied().unwrap_or(0.0);
                let diff = (v - w).abs();
                if diff > SYMMETRY_RTOL * v.abs().max(w.abs()) {
                    return Err(Error::Symmetry {
                        row: i.max(j),
                        col: i.min(j),
                        diff,
                    });
                }
            }
            SparseSymMatrix::from_triplets(
                n,
                full.into_iter()
                    .filter(|&((i, j), _)| i >= j)
                    .map(|((i, j), v)| (i, j, v)),
            )
        }
    }
}

fn parse_banner(line_no: usize, banner: &str) -> Result<Symmetry> {
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::parse(line_no, format!("malformed banner: {banner:?}")));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::parse(
            line_no,
            "only `matrix coordinate` objects are supported",
        ));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::parse(
            line_no,
            format!("unsupported field type {:?}", tokens[3]),
        ));
    }
    match tokens[4].as_str() {
        "symmetric" => Ok(Symmetry::Symmetric),
        "general" => Ok(Symmetry::General),
        other => Err(Error::parse(
            line_no,
            format!("unsupported symmetry {other:?}"),
        )),
    }
}

fn parse_usize(field: Option<&str>, line_no: usize, what: &str) -> Result<usize> {
    field
        .ok_or_else(|| Error::parse(line_no, format!("missing {what}")))?
        .parse()
        .map_err(|e| Error::parse(line_no, format!("bad {what}: {e}")))
}
