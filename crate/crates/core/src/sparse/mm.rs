//! Matrix Market exchange format.
//!
//! Reads `coordinate` matrices (`real`, `integer` or `pattern`; `general`,
//! `symmetric` or `skew-symmetric`) and `array` vectors. Writes coordinate
//! `real general` or `real symmetric` matrices and `array real general`
//! column vectors. Indices on disk are 1-based. Values are written with the
//! shortest representation that parses back to the same `f64`, so a
//! write/read cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MmField {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MmLayout {
    Coordinate,
    Array,
}

struct Header {
    layout: MmLayout,
    field: MmField,
    symmetry: MmSymmetry,
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    path: std::path::PathBuf,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            message: message.into(),
        }
    }

    fn next_raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            Some(line) => {
                self.line_no += 1;
                Ok(Some(line?))
            }
            None => Ok(None),
        }
    }

    /// Next line that is neither blank nor a `%` comment.
    fn next_data(&mut self) -> Result<Option<String>> {
        while let Some(line) = self.next_raw()? {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok(Some(t.to_string()));
        }
        Ok(None)
    }
}

fn parse_header<R: BufRead>(lines: &mut Lines<R>) -> Result<Header> {
    let first = lines.next_raw()?.ok_or_else(|| lines.err("empty file"))?;
    let tokens: Vec<String> = first
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(lines.err("expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => MmLayout::Coordinate,
        "array" => MmLayout::Array,
        other => return Err(lines.err(format!("unsupported layout '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => MmField::Real,
        "integer" => MmField::Integer,
        "pattern" => MmField::Pattern,
        other => return Err(lines.err(format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        "skew-symmetric" => MmSymmetry::SkewSymmetric,
        other => return Err(lines.err(format!("unsupported symmetry '{other}'"))),
    };
    if layout == MmLayout::Array && field == MmField::Pattern {
        return Err(lines.err("array layout cannot use the pattern field"));
    }
    Ok(Header {
        layout,
        field,
        symmetry,
    })
}

fn parse_usize<R: BufRead>(lines: &Lines<R>, tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| lines.err(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(format!("cannot parse {what} from '{tok}'")))
}

fn parse_f64<R: BufRead>(lines: &Lines<R>, tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| lines.err("missing value"))?;
    tok.parse()
        .map_err(|_| lines.err(format!("cannot parse value from '{tok}'")))
}

fn open(path: &Path) -> Result<Lines<BufReader<File>>> {
    let file = File::open(path)?;
    Ok(Lines {
        inner: BufReader::new(file).lines(),
        path: path.to_path_buf(),
        line_no: 0,
    })
}

/// Reads a coordinate-format sparse matrix. Symmetric storage (lower
/// triangle) is expanded to the full matrix.
pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let mut lines = open(path)?;
    read_matrix_from(&mut lines)
}

fn read_matrix_from<R: BufRead>(lines: &mut Lines<R>) -> Result<CsrMatrix> {
    let header = parse_header(lines)?;
    if header.layout != MmLayout::Coordinate {
        return Err(lines.err("expected a coordinate-format matrix"));
    }
    let size = lines
        .next_data()?
        .ok_or_else(|| lines.err("missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows = parse_usize(lines, it.next(), "row count")?;
    let ncols = parse_usize(lines, it.next(), "column count")?;
    let nnz = parse_usize(lines, it.next(), "entry count")?;
    if header.symmetry != MmSymmetry::General && nrows != ncols {
        return Err(lines.err("symmetric storage requires a square matrix"));
    }

    let mut triplets = Vec::with_capacity(if header.symmetry == MmSymmetry::General {
        nnz
    } else {
        2 * nnz
    });
    for _ in 0..nnz {
        let line = lines
            .next_data()?
            .ok_or_else(|| lines.err(format!("expected {nnz} entries")))?;
        let mut it = line.split_whitespace();
        let i = parse_usize(lines, it.next(), "row index")?;
        let j = parse_usize(lines, it.next(), "column index")?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(lines.err(format!(
                "index ({i}, {j}) outside {nrows}x{ncols} (1-based)"
            )));
        }
        let v = match header.field {
            MmField::Pattern => 1.0,
            MmField::Real | MmField::Integer => parse_f64(lines, it.next())?,
        };
        let (i, j) = (i - 1, j - 1);
        match header.symmetry {
            MmSymmetry::General => triplets.push((i, j, v)),
            MmSymmetry::Symmetric => {
                if j > i {
                    return Err(lines.err("symmetric storage must list the lower triangle"));
                }
                triplets.push((i, j, v));
                if i != j {
                    triplets.push((j, i, v));
                }
            }
            MmSymmetry::SkewSymmetric => {
                if j >= i {
                    return Err(
                        lines.err("skew-symmetric storage must list the strict lower triangle")
                    );
                }
                triplets.push((i, j, v));
                triplets.push((j, i, -v));
            }
        }
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes `matrix` in coordinate `real` format with the requested symmetry.
///
/// `Symmetric` stores the lower triangle and fails if the matrix is not
/// exactly symmetric. `SkewSymmetric` is not supported for writing.
pub fn write_matrix_market(path: &Path, matrix: &CsrMatrix, symmetry: MmSymmetry) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_to(&mut w, matrix, symmetry)?;
    w.flush()?;
    Ok(())
}

fn write_matrix_to<W: Write>(w: &mut W, matrix: &CsrMatrix, symmetry: MmSymmetry) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = match symmetry {
        MmSymmetry::General => matrix.triplets().collect(),
        MmSymmetry::Symmetric => {
            if !matrix.is_symmetric(0.0) {
                return Err(Error::InvalidParameter(
                    "matrix is not symmetric; cannot write symmetric storage".into(),
                ));
            }
            matrix.triplets().filter(|&(i, j, _)| j <= i).collect()
        }
        MmSymmetry::SkewSymmetric => {
            return Err(Error::InvalidParameter(
                "writing skew-symmetric storage is not supported".into(),
            ))
        }
    };
    let sym = match symmetry {
        MmSymmetry::General => "general",
        _ => "symmetric",
    };
    writeln!(w, "%%MatrixMarket matrix coordinate real {sym}")?;
    writeln!(w, "{} {} {}", matrix.nrows(), matrix.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a dense column vector (`array` layout, one column).
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut lines = open(path)?;
    let header = parse_header(&mut lines)?;
    if header.layout != MmLayout::Array || header.symmetry != MmSymmetry::General {
        return Err(lines.err("expected an 'array ... general' vector"));
    }
    let size = lines
        .next_data()?
        .ok_or_else(|| lines.err("missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows = parse_usize(&lines, it.next(), "row count")?;
    let ncols = parse_usize(&lines, it.next(), "column count")?;
    if ncols != 1 {
        return Err(lines.err(format!("expected a single column, found {ncols}")));
    }
    let mut v = Vec::with_capacity(nrows);
    for _ in 0..nrows {
        let line = lines
            .next_data()?
            .ok_or_else(|| lines.err(format!("expected {nrows} values")))?;
        v.push(parse_f64(&lines, line.split_whitespace().next())?);
    }
    Ok(v)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}
