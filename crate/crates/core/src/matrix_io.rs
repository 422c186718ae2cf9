//! Plain-text matrix files.
//!
//! ```text
//! dim 2
//! 5e-1+0e0i 0e0-2.5e-1i
//! 0e0+2.5e-1i 5e-1+0e0i
//! ```
//!
//! Entries are `a+bi` / `a-bi`; a bare real `a` is also accepted on input.
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Result, TomoError};
use crate::linalg::{CMatrix, C64};
use crate::state::DensityMatrix;

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(token: &str) -> Option<C64> {
    let t = token.trim();
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re: f64 = body[..split].parse().ok()?;
    let im_str = &body[split..];
    let im: f64 = match im_str {
        "+" => 1.0,
        "-" => -1.0,
        s => s.parse().ok()?,
    };
    Some(C64::new(re, im))
}

pub fn write_matrix<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "dim {}", m.nrows()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<CMatrix> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| match l {
            Ok(s) => !s.trim().is_empty() && !s.trim_start().starts_with('#'),
            Err(_) => true,
        });
    let (line_no, header) = lines.next().ok_or(TomoError::Parse {
        line: 1,
        msg: "missing `dim` header".into(),
    })?;
    let header = header?;
    let dim: usize = header
        .trim()
        .strip_prefix("dim")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| TomoError::Parse {
            line: line_no,
            msg: format!("expected `dim <d>`, found `{}`", header.trim()),
        })?;
    if dim == 0 {
        return Err(TomoError::Parse { line: line_no, msg: "dimension must be positive".into() });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let (line_no, line) = lines.next().ok_or(TomoError::Parse {
            line: line_no + i + 1,
            msg: format!("expected {dim} rows, found {i}"),
        })?;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dim {
            return Err(TomoError::Parse {
                line: line_no,
                msg: format!("expected {dim} entries, found {}", tokens.len()),
            });
        }
        for (j, tok) in tokens.iter().enumerate() {
            m[(i, j)] = parse_complex(tok).ok_or_else(|| TomoError::Parse {
                line: line_no,
                msg: format!("invalid complex entry `{tok}`"),
            })?;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(TomoError::Parse { line: line_no, msg: "trailing rows after matrix".into() });
    }
    Ok(m)
}

/// Reads a matrix file and checks every density-matrix invariant.
pub fn load_density_matrix(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    let file = std::fs::File::open(path)?;
    DensityMatrix::new(read_matrix(std::io::BufReader::new(file))?)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &CMatrix) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_matrix(std::io::BufWriter::new(file), m)
}
