//! Reading and writing dense matrices.
//!
//! Two formats are supported: MatrixMarket (array or coordinate, real
//! general) and a raw binary layout. The raw layout is the magic `SKRK`, a
//! little-endian `u32` version, `u64` rows, `u64` cols, then the entries in
//! column-major order as little-endian `f64`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const RAW_MAGIC: &[u8; 4] = b"SKRK";
pub const RAW_VERSION: u32 = 1;
const RAW_HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    MatrixMarketArray,
    MatrixMarketCoordinate,
    RawF64,
}

impl MatrixFormat {
    /// Format implied by a file extension: `.mtx` is MatrixMarket array,
    /// anything else raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarketArray,
            _ => MatrixFormat::RawF64,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mtx" | "mm" | "mm-array" | "matrix-market-array" => Ok(Self::MatrixMarketArray),
            "mm-coordinate" | "matrix-market-coordinate" => Ok(Self::MatrixMarketCoordinate),
            "raw" | "raw-f64" => Ok(Self::RawF64),
            other => Err(Error::Parse(format!("unknown matrix format '{other}'"))),
        }
    }
}

fn parse_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}

/// Reads a matrix, detecting the format from the first bytes of the file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let mut reader = BufReader::new(File::open(path.as_ref())?);
    let head = reader.fill_buf()?;
    if head.starts_with(RAW_MAGIC) {
        read_raw(reader)
    } else if head.starts_with(b"%%MatrixMarket") {
        read_matrix_market(reader)
    } else {
        parse_err("unrecognized matrix file: expected a MatrixMarket banner or raw magic")
    }
}

pub fn write_matrix(path: impl AsRef<Path>, a: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        MatrixFormat::RawF64 => write_raw(&mut w, a)?,
        MatrixFormat::MatrixMarketArray => write_mm_array(&mut w, a)?,
        MatrixFormat::MatrixMarketCoordinate => write_mm_coordinate(&mut w, a)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw(w: &mut impl Write, a: &DenseMatrix) -> Result<()> {
    w.write_all(RAW_MAGIC)?;
    w.write_all(&RAW_VERSION.to_le_bytes())?;
    w.write_all(&(a.rows() as u64).to_le_bytes())?;
    w.write_all(&(a.cols() as u64).to_le_bytes())?;
    for v in a.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raw(mut r: impl Read) -> Result<DenseMatrix> {
    let mut header = [0u8; RAW_HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Parse("raw file shorter than its header".into()))?;
    if &header[..4] != RAW_MAGIC {
        return parse_err("bad raw magic");
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != RAW_VERSION {
        return parse_err(format!("unsupported raw version {version}"));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Parse(format!("raw dimensions {rows}x{cols} overflow")))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != len * 8 {
        return parse_err(format!(
            "raw payload has {} bytes, header {rows}x{cols} needs {}",
            payload.len(),
            len * 8
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_col_major(rows as usize, cols as usize, data)
}

pub fn write_mm_array(w: &mut impl Write, a: &DenseMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for v in a.as_slice() {
        // `{:e}` prints the shortest representation that round-trips.
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn write_mm_coordinate(w: &mut impl Write, a: &DenseMatrix) -> Result<()> {
    let nnz = a.as_slice().iter().filter(|v| **v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), nnz)?;
    for j in 0..a.cols() {
        for (i, v) in a.col(j).iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
            }
        }
    }
    Ok(())
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what}")))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let v: f64 = tok
        .ok_or_else(|| Error::Parse(format!("line {line}: missing value")))?
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: invalid value")))?;
    if !v.is_finite() {
        return parse_err(format!("line {line}: non-finite value"));
    }
    Ok(v)
}

/// Reads a MatrixMarket file with `real` or `integer` field and `general`
/// or `symmetric` structure. Coordinate files are densified; repeated
/// coordinates are rejected.
pub fn read_matrix_market(r: impl BufRead) -> Result<DenseMatrix> {
    let mut lines = r.lines().enumerate();
    let (_, banner) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))?;
    let banner = banner?.to_ascii_lowercase();
    let fields: Vec<&str> = banner.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return parse_err("malformed MatrixMarket banner");
    }
    let coordinate = match fields[2] {
        "array" => false,
        "coordinate" => true,
        other => return parse_err(format!("unsupported MatrixMarket layout '{other}'")),
    };
    if !matches!(fields[3], "real" | "integer" | "double") {
        return parse_err(format!("unsupported MatrixMarket field '{}'", fields[3]));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return parse_err(format!("unsupported MatrixMarket symmetry '{other}'")),
    };

    let mut body = lines.filter_map(|(k, l)| match l {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('%') => None,
        Ok(l) => Some(Ok((k + 1, l))),
        Err(e) => Some(Err(Error::from(e))),
    });
    let (_, size) = body
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))??;
    let mut toks = size.split_whitespace();
    let rows = parse_usize(toks.next(), "row count")?;
    let cols = parse_usize(toks.next(), "column count")?;
    if symmetric && rows != cols {
        return parse_err("symmetric matrix must be square");
    }
    let mut a = DenseMatrix::zeros(rows, cols);

    if coordinate {
        let nnz = parse_usize(toks.next(), "entry count")?;
        let mut seen = HashSet::with_capacity(nnz);
        let mut count = 0;
        for item in body {
            let (line, text) = item?;
            let mut t = text.split_whitespace();
            let i = parse_usize(t.next(), "row index")?;
            let j = parse_usize(t.next(), "column index")?;
            if !(1..=rows).contains(&i) || !(1..=cols).contains(&j) {
                return parse_err(format!("line {line}: index ({i}, {j}) out of range"));
            }
            if symmetric && j > i {
                return parse_err(format!("line {line}: symmetric entry above the diagonal"));
            }
            if !seen.insert((i, j)) {
                return parse_err(format!("line {line}: duplicate entry ({i}, {j})"));
            }
            let v = parse_f64(t.next(), line)?;
            a.set(i - 1, j - 1, v);
            if symmetric {
                a.set(j - 1, i - 1, v);
            }
            count += 1;
        }
        if count != nnz {
            return parse_err(format!("expected {nnz} entries, found {count}"));
        }
    } else {
        let mut positions = (0..cols).flat_map(|j| {
            let start = if symmetric { j } else { 0 };
            (start..rows).map(move |i| (i, j))
        });
        for item in body {
            let (line, text) = item?;
            for tok in text.split_whitespace() {
                let Some((i, j)) = positions.next() else {
                    return parse_err(format!("line {line}: more values than the header allows"));
                };
                let v = parse_f64(Some(tok), line)?;
                a.set(i, j, v);
                if symmetric {
                    a.set(j, i, v);
                }
            }
        }
        if positions.next().is_some() {
            return parse_err("fewer values than the header requires");
        }
    }
    Ok(a)
}
