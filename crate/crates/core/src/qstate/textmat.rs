//! Plain-text matrix format shared by every file-facing command.
//!
//! A file is a header line `dims: d1 d2 ...` followed by whitespace-separated
//! complex entries written as `re+imi` (for example `0.5-0.25i`), one matrix
//! row per line. A ket is stored as a single row of length `prod(dims)`; a
//! density matrix or operator as `prod(dims)` rows. Lines starting with `#`
//! and blank lines are ignored. Writers emit full shortest-roundtrip decimal
//! digits so files reload bit-exactly.

use super::{DensityMatrix, Ket, Operator, QStateError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextMatError {
    #[error("parse error at row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("parse error at row {row}, col {col}: invalid complex token '{token}'")]
    BadToken {
        row: usize,
        col: usize,
        token: String,
    },
    #[error(transparent)]
    Invalid(#[from] QStateError),
}

/// A parsed state file: a single data row loads as a ket, a square block as
/// a density matrix.
#[derive(Debug, Clone)]
pub enum StateFile {
    Ket(Ket),
    Density(DensityMatrix),
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

/// Parses `re+imi`; the split sign is the last `+`/`-` that is neither the
/// leading sign nor part of an exponent.
fn parse_complex(token: &str) -> Option<Complex64> {
    let body = token.strip_suffix(['i', 'I'])?;
    let bytes = body.as_bytes();
    let mut split = None;
    for p in (1..bytes.len()).rev() {
        let c = bytes[p];
        if (c == b'+' || c == b'-') && bytes[p - 1] != b'e' && bytes[p - 1] != b'E' {
            split = Some(p);
            break;
        }
    }
    let p = split?;
    let re: f64 = body[..p].parse().ok()?;
    let im: f64 = body[p..].parse().ok()?;
    Some(Complex64::new(re, im))
}

struct Raw {
    dims: Vec<usize>,
    rows: Vec<Vec<Complex64>>,
}

fn parse_raw(text: &str) -> Result<Raw, TextMatError> {
    let mut content = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = content.next().ok_or_else(|| TextMatError::Malformed {
        row: 0,
        msg: "empty file, expected a 'dims:' header".into(),
    })?;
    let dims_part = header
        .strip_prefix("dims:")
        .ok_or_else(|| TextMatError::Malformed {
            row: 0,
            msg: format!("expected 'dims: d1 d2 ...' header, found '{header}'"),
        })?;
    let mut dims = Vec::new();
    for tok in dims_part.split_whitespace() {
        let d: usize = tok.parse().map_err(|_| TextMatError::Malformed {
            row: 0,
            msg: format!("invalid dimension token '{tok}'"),
        })?;
        dims.push(d);
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(TextMatError::Malformed {
            row: 0,
            msg: "header must list at least one positive dimension".into(),
        });
    }
    let side: usize = dims.iter().product();

    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in content {
        let rownum = rows.len() + 1;
        let mut row = Vec::with_capacity(side);
        for (c, tok) in line.split_whitespace().enumerate() {
            let z = parse_complex(tok).ok_or_else(|| TextMatError::BadToken {
                row: rownum,
                col: c + 1,
                token: tok.to_string(),
            })?;
            row.push(z);
        }
        if row.len() != side {
            return Err(TextMatError::Malformed {
                row: rownum,
                msg: format!("expected {side} entries per row, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Raw { dims, rows })
}

/// Loads a ket or density matrix, enforcing the corresponding invariants.
pub fn load_state(text: &str) -> Result<StateFile, TextMatError> {
    let raw = parse_raw(text)?;
    let side: usize = raw.dims.iter().product();
    match raw.rows.len() {
        1 => Ok(StateFile::Ket(Ket::new(
            raw.dims,
            raw.rows.into_iter().next().unwrap(),
        )?)),
        n if n == side => {
            let flat: Vec<Complex64> = raw.rows.into_iter().flatten().collect();
            let mat = DMatrix::from_row_slice(side, side, &flat);
            Ok(StateFile::Density(DensityMatrix::new(raw.dims, mat)?))
        }
        n => Err(TextMatError::Malformed {
            row: n,
            msg: format!(
                "expected 1 (ket) or {side} (matrix) data rows for dims {:?}, found {n}",
                raw.dims
            ),
        }),
    }
}

/// Loads a square matrix as a plain operator (no state invariants), e.g. one
/// projector of a measurement family.
pub fn load_operator(text: &str) -> Result<Operator, TextMatError> {
    let raw = parse_raw(text)?;
    let side: usize = raw.dims.iter().product();
    if raw.rows.len() != side {
        return Err(TextMatError::Malformed {
            row: raw.rows.len(),
            msg: format!(
                "expected {side} data rows for an operator with dims {:?}, found {}",
                raw.dims,
                raw.rows.len()
            ),
        });
    }
    let flat: Vec<Complex64> = raw.rows.into_iter().flatten().collect();
    let mat = DMatrix::from_row_slice(side, side, &flat);
    Ok(Operator::new(raw.dims, mat)?)
}

fn write_header(out: &mut String, dims: &[usize]) {
    out.push_str("dims:");
    for d in dims {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
}

pub fn write_ket(psi: &Ket) -> String {
    let mut out = String::new();
    write_header(&mut out, psi.dims());
    let toks: Vec<String> = psi
        .amplitudes()
        .iter()
        .map(|&z| format_complex(z))
        .collect();
    out.push_str(&toks.join(" "));
    out.push('\n');
    out
}

fn write_matrix(dims: &[usize], mat: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    write_header(&mut out, dims);
    for i in 0..mat.nrows() {
        let toks: Vec<String> = (0..mat.ncols())
            .map(|j| format_complex(mat[(i, j)]))
            .collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_density(rho: &DensityMatrix) -> String {
    write_matrix(rho.dims(), rho.matrix())
}

pub fn write_operator(op: &Operator) -> String {
    write_matrix(op.dims(), op.matrix())
}
