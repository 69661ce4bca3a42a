//! Plain-text comb files.
//!
//! ```text
//! # optional comments
//! N 2
//! dims 2 2 2 2
//! re im re im ...   (one matrix row per line)
//! ```
//!
//! `dims` lists d_1 … d_2N. Rows hold interleaved real and imaginary parts
//! in row-major order; the basis is big-endian in port order.

use std::fmt::Write as _;
use std::path::Path;

use faer::{c64, Mat};

use crate::comb::{Comb, ToothStructure};
use crate::error::{Error, Result};
use crate::tensor::LabeledOperator;

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Structure(format!("comb file line {line}: {}", msg.into()))
}

pub fn parse_comb(text: &str) -> Result<Comb> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, l) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
    let n: usize = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["N", v] => v.parse().map_err(|_| bad(ln, format!("bad tooth count '{v}'")))?,
        _ => return Err(bad(ln, "expected 'N <teeth>'")),
    };
    if n == 0 {
        return Err(bad(ln, "a comb needs at least one tooth"));
    }
    let (ln, l) = lines.next().ok_or_else(|| bad(ln, "missing 'dims' line"))?;
    let mut words = l.split_whitespace();
    if words.next() != Some("dims") {
        return Err(bad(ln, "expected 'dims d1 … d2N'"));
    }
    let dims: Vec<usize> = words
        .map(|w| w.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| bad(ln, format!("bad dimension '{w}'"))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 * n {
        return Err(bad(ln, format!("{n} teeth need {} dimensions, got {}", 2 * n, dims.len())));
    }
    let pairs: Vec<(usize, usize)> = dims.chunks(2).map(|c| (c[0], c[1])).collect();
    let structure = ToothStructure::canonical(&pairs);
    let d: usize = dims.iter().product();

    let mut m = Mat::<c64>::zeros(d, d);
    for r in 0..d {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, format!("expected {d} matrix rows, found {r}")))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| bad(ln, format!("bad number '{w}'"))))
            .collect::<Result<_>>()?;
        if vals.len() != 2 * d {
            return Err(bad(ln, format!("row needs {} numbers, got {}", 2 * d, vals.len())));
        }
        for c in 0..d {
            m[(r, c)] = c64::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln, "trailing data after the matrix"));
    }
    let op = LabeledOperator::new(structure.spaces(), m)?;
    Ok(Comb::new_unchecked(op, structure))
}

pub fn format_comb(c: &Comb) -> String {
    let dims: Vec<String> = c.structure.spaces().iter().map(|l| l.dim.to_string()).collect();
    let mut s = format!("N {}\ndims {}\n", c.structure.n_teeth(), dims.join(" "));
    let m = c.op.matrix();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|k| format!("{:e} {:e}", m[(r, k)].re, m[(r, k)].im)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn read_comb(path: &Path) -> Result<Comb> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Structure(format!("{}: {e}", path.display())))?;
    parse_comb(&text)
}

pub fn write_comb(path: &Path, c: &Comb) -> Result<()> {
    std::fs::write(path, format_comb(c)).map_err(|e| Error::Structure(format!("{}: {e}", path.display())))
}
