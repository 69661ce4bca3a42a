use faer::{c64, Mat};

use crate::problem::{Field, HermitianExpr, SparseHermitian};
use crate::SdpError;

/// Real symmetric embedding `X + iY ↦ [[X, −Y], [Y, X]]` of a dense
/// Hermitian matrix.
pub fn realify_matrix(h: &Mat<c64>) -> Mat<f64> {
    let n = h.nrows();
    Mat::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`realify_matrix`] for matrices of that form; averages the
/// redundant blocks.
pub fn derealify_matrix(m: &Mat<f64>) -> Mat<c64> {
    let n = m.nrows() / 2;
    Mat::from_fn(n, n, |r, c| {
        let x = 0.5 * (m[(r, c)] + m[(r + n, c + n)]);
        let y = 0.5 * (m[(r + n, c)] - m[(r, c + n)]);
        c64::new(x, y)
    })
}

/// Upper-triangle entries of the embedding of a sparse Hermitian matrix.
pub(crate) fn realify_entries(m: &SparseHermitian) -> Vec<(usize, usize, f64)> {
    let n = m.dim();
    let mut out = Vec::with_capacity(4 * m.nnz());
    for (a, b, z) in m.entries() {
        if z.re != 0.0 {
            out.push((a, b, z.re));
            out.push((n + a, n + b, z.re));
        }
        if a != b && z.im != 0.0 {
            out.push((a, n + b, -z.im));
            out.push((b, n + a, z.im));
        }
    }
    out
}

fn realify_sparse(m: &SparseHermitian) -> SparseHermitian {
    let mut out = SparseHermitian::new(2 * m.dim());
    for (r, c, v) in realify_entries(m) {
        out.add(r, c, c64::new(v, 0.0));
    }
    out
}

/// Embeds a complex Hermitian affine expression as a real symmetric one of
/// twice the size. Real expressions are returned unchanged.
pub fn realify(expr: &HermitianExpr) -> Result<HermitianExpr, SdpError> {
    let mats = std::iter::once(&expr.constant).chain(expr.terms.values());
    for m in mats {
        if m.diagonal_imag_max() > 1e-12 {
            return Err(SdpError::Structure("expression is not Hermitian: complex diagonal".into()));
        }
    }
    if expr.field == Field::Real {
        return Ok(expr.clone());
    }
    let mut out = HermitianExpr::new(2 * expr.dim, Field::Real);
    out.constant = realify_sparse(&expr.constant);
    for (&v, m) in &expr.terms {
        out.terms.insert(v, realify_sparse(m));
    }
    Ok(out)
}
