//! Operators and vectors on ordered tensor products of labeled spaces.
//!
//! Basis indices are big-endian in the listed space order: the last space
//! varies fastest.

use std::fmt;

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative PSD tolerance on the smallest eigenvalue.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceId {
    /// Comb port `k` in the canonical numbering 1..2N.
    Port(usize),
    Aux,
    Env,
    Named(String),
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceId::Port(k) => write!(f, "{k}"),
            SpaceId::Aux => f.write_str("aux"),
            SpaceId::Env => f.write_str("E"),
            SpaceId::Named(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceLabel {
    pub id: SpaceId,
    pub dim: usize,
}

impl SpaceLabel {
    pub fn new(id: SpaceId, dim: usize) -> Self {
        assert!(dim >= 1, "space {id} must have positive dimension");
        Self { id, dim }
    }

    pub fn port(k: usize, dim: usize) -> Self {
        Self::new(SpaceId::Port(k), dim)
    }

    pub fn aux(dim: usize) -> Self {
        Self::new(SpaceId::Aux, dim)
    }

    pub fn env(dim: usize) -> Self {
        Self::new(SpaceId::Env, dim)
    }

    pub fn named(name: &str, dim: usize) -> Self {
        Self::new(SpaceId::Named(name.to_string()), dim)
    }
}

impl fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.id, self.dim)
    }
}

pub fn total_dim(spaces: &[SpaceLabel]) -> usize {
    spaces.iter().map(|s| s.dim).product()
}

fn check_unique(spaces: &[SpaceLabel]) -> Result<()> {
    for (i, a) in spaces.iter().enumerate() {
        if spaces[..i].iter().any(|b| b.id == a.id) {
            return Err(Error::Structure(format!("space label {} appears twice", a.id)));
        }
    }
    Ok(())
}

fn position(spaces: &[SpaceLabel], id: &SpaceId) -> Result<usize> {
    spaces
        .iter()
        .position(|s| &s.id == id)
        .ok_or_else(|| Error::Structure(format!("unknown space label {id}")))
}

fn positions(spaces: &[SpaceLabel], ids: &[SpaceId]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let p = position(spaces, id)?;
        if out.contains(&p) {
            return Err(Error::Structure(format!("space label {id} listed twice")));
        }
        out.push(p);
    }
    Ok(out)
}

/// Full-index offsets of every basis state of the subsystems at
/// `positions`, enumerated big-endian in the given order.
fn subset_offsets(dims: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &o in &out {
            for i in 0..dims[p] {
                next.push(o + i * strides[p]);
            }
        }
        out = next;
    }
    out
}

fn max_abs(m: &CMat) -> f64 {
    let mut s = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s = s.max(m[(i, j)].norm());
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    spaces: Vec<SpaceLabel>,
    matrix: CMat,
}

impl LabeledOperator {
    pub fn new(spaces: Vec<SpaceLabel>, matrix: CMat) -> Result<Self> {
        check_unique(&spaces)?;
        let d = total_dim(&spaces);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Structure(format!(
                "matrix is {}×{} but spaces have total dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { spaces, matrix })
    }

    pub fn from_fn(spaces: Vec<SpaceLabel>, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        let d = total_dim(&spaces);
        Self::new(spaces, Mat::from_fn(d, d, f))
    }

    pub fn zeros(spaces: Vec<SpaceLabel>) -> Result<Self> {
        Self::from_fn(spaces, |_, _| ZERO)
    }

    pub fn identity(spaces: Vec<SpaceLabel>) -> Result<Self> {
        Self::from_fn(spaces, |i, j| if i == j { ONE } else { ZERO })
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &LabeledVector) -> Self {
        let e = v.entries();
        let d = e.len();
        Self { spaces: v.spaces().to_vec(), matrix: Mat::from_fn(d, d, |i, j| e[i] * e[j].conj()) }
    }

    /// `Σ_k |a_k⟩⟨b_k|` over paired vectors on the same spaces.
    pub fn sum_of_outer(spaces: Vec<SpaceLabel>, a: &[LabeledVector], b: &[LabeledVector]) -> Result<Self> {
        let d = total_dim(&spaces);
        if a.len() != b.len() {
            return Err(Error::Structure("outer-product lists differ in length".into()));
        }
        let mut m = Mat::<c64>::zeros(d, d);
        for (x, y) in a.iter().zip(b) {
            if x.spaces() != spaces.as_slice() || y.spaces() != spaces.as_slice() {
                return Err(Error::Structure("vector spaces do not match".into()));
            }
            let (xe, ye) = (x.entries(), y.entries());
            for j in 0..d {
                let yc = ye[j].conj();
                if yc == ZERO {
                    continue;
                }
                for i in 0..d {
                    m[(i, j)] += xe[i] * yc;
                }
            }
        }
        Self::new(spaces, m)
    }

    pub fn spaces(&self) -> &[SpaceLabel] {
        &self.spaces
    }

    pub fn ids(&self) -> Vec<SpaceId> {
        self.spaces.iter().map(|s| s.id.clone()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        self.matrix[(r, c)]
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self { spaces: self.spaces.clone(), matrix: self.matrix.adjoint().to_owned() }
    }

    pub fn scale(&self, s: c64) -> Self {
        let m = &self.matrix;
        Self { spaces: self.spaces.clone(), matrix: Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s) }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64::new(s, 0.0))
    }

    fn same_spaces(&self, other: &Self) -> Result<()> {
        if self.spaces != other.spaces {
            return Err(Error::Structure(format!(
                "space mismatch: [{}] vs [{}]",
                fmt_spaces(&self.spaces),
                fmt_spaces(&other.spaces)
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_spaces(other)?;
        Ok(Self { spaces: self.spaces.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_spaces(other)?;
        Ok(Self { spaces: self.spaces.clone(), matrix: &self.matrix - &other.matrix })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_spaces(other)?;
        Ok(Self { spaces: self.spaces.clone(), matrix: &self.matrix * &other.matrix })
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Largest modulus of `a − a†`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut e = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                e = e.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_error() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    fn hermitian_part(&self) -> CMat {
        let m = &self.matrix;
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        self.hermitian_part().self_adjoint_eigenvalues(Side::Lower).expect("Hermitian eigenvalues")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Spectral norm of the Hermitian part.
    pub fn hermitian_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Hermitian with smallest eigenvalue ≥ −rel_tol·λ_max.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        if !self.is_hermitian(HERMITIAN_TOL) {
            return false;
        }
        let ev = self.eigenvalues();
        let lmax = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ev.first().is_none_or(|&l| l >= -rel_tol * lmax)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        tensor_product(self, other)
    }

    pub fn partial_trace(&self, traced: &[SpaceId]) -> Result<Self> {
        partial_trace(self, traced)
    }

    pub fn partial_transpose(&self, transposed: &[SpaceId]) -> Result<Self> {
        partial_transpose(self, transposed)
    }

    pub fn permute(&self, new_order: &[SpaceId]) -> Result<Self> {
        permute_systems(self, new_order)
    }

    /// Tensors with the identity on `extra` and reorders to `order`.
    pub fn extend_to(&self, extra: &[SpaceLabel], order: &[SpaceId]) -> Result<Self> {
        let id = LabeledOperator::identity(extra.to_vec())?;
        tensor_product(self, &id)?.permute(order)
    }
}

pub fn fmt_spaces(spaces: &[SpaceLabel]) -> String {
    spaces.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVector {
    spaces: Vec<SpaceLabel>,
    entries: Vec<c64>,
}

impl LabeledVector {
    pub fn new(spaces: Vec<SpaceLabel>, entries: Vec<c64>) -> Result<Self> {
        check_unique(&spaces)?;
        if entries.len() != total_dim(&spaces) {
            return Err(Error::Structure(format!(
                "vector has {} entries but spaces have total dimension {}",
                entries.len(),
                total_dim(&spaces)
            )));
        }
        Ok(Self { spaces, entries })
    }

    pub fn zeros(spaces: Vec<SpaceLabel>) -> Self {
        let d = total_dim(&spaces);
        Self { spaces, entries: vec![ZERO; d] }
    }

    pub fn spaces(&self) -> &[SpaceLabel] {
        &self.spaces
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [c64] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> c64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: c64) -> Self {
        Self { spaces: self.spaces.clone(), entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn axpy(&mut self, a: c64, x: &Self) {
        for (y, v) in self.entries.iter_mut().zip(&x.entries) {
            *y += a * v;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            spaces: self.spaces.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut spaces = self.spaces.clone();
        spaces.extend(other.spaces.iter().cloned());
        check_unique(&spaces)?;
        let mut e = Vec::with_capacity(self.len() * other.len());
        for a in &self.entries {
            for b in &other.entries {
                e.push(a * b);
            }
        }
        Ok(Self { spaces, entries: e })
    }

    pub fn permute(&self, new_order: &[SpaceId]) -> Result<Self> {
        let pos = positions(&self.spaces, new_order)?;
        if pos.len() != self.spaces.len() {
            return Err(Error::Structure("new order is not a permutation".into()));
        }
        let dims: Vec<usize> = self.spaces.iter().map(|s| s.dim).collect();
        let off = subset_offsets(&dims, &pos);
        Ok(Self {
            spaces: pos.iter().map(|&p| self.spaces[p].clone()).collect(),
            entries: off.iter().map(|&o| self.entries[o]).collect(),
        })
    }
}

/// Kronecker product on the concatenated space list.
pub fn tensor_product(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    let mut spaces = a.spaces.clone();
    spaces.extend(b.spaces.iter().cloned());
    check_unique(&spaces)?;
    let (da, db) = (a.dim(), b.dim());
    let m = Mat::from_fn(da * db, da * db, |r, c| a.matrix[(r / db, c / db)] * b.matrix[(r % db, c % db)]);
    LabeledOperator::new(spaces, m)
}

/// Traces out `traced`; the remaining spaces keep their order.
pub fn partial_trace(a: &LabeledOperator, traced: &[SpaceId]) -> Result<LabeledOperator> {
    let tp = positions(&a.spaces, traced)?;
    let kp: Vec<usize> = (0..a.spaces.len()).filter(|p| !tp.contains(p)).collect();
    let dims = a.dims();
    let ko = subset_offsets(&dims, &kp);
    let to = subset_offsets(&dims, &tp);
    let m = Mat::from_fn(ko.len(), ko.len(), |r, c| to.iter().map(|&t| a.matrix[(ko[r] + t, ko[c] + t)]).sum());
    LabeledOperator::new(kp.iter().map(|&p| a.spaces[p].clone()).collect(), m)
}

/// Transposes the tensor factors in `transposed`.
pub fn partial_transpose(a: &LabeledOperator, transposed: &[SpaceId]) -> Result<LabeledOperator> {
    let tp = positions(&a.spaces, transposed)?;
    let kp: Vec<usize> = (0..a.spaces.len()).filter(|p| !tp.contains(p)).collect();
    let dims = a.dims();
    let ko = subset_offsets(&dims, &kp);
    let to = subset_offsets(&dims, &tp);
    let mut m = Mat::<c64>::zeros(a.dim(), a.dim());
    for &rk in &ko {
        for &ck in &ko {
            for &rt in &to {
                for &ct in &to {
                    m[(rk + ct, ck + rt)] = a.matrix[(rk + rt, ck + ct)];
                }
            }
        }
    }
    LabeledOperator::new(a.spaces.clone(), m)
}

/// Reorders the tensor factors to `new_order`.
pub fn permute_systems(a: &LabeledOperator, new_order: &[SpaceId]) -> Result<LabeledOperator> {
    let pos = positions(&a.spaces, new_order)?;
    if pos.len() != a.spaces.len() {
        return Err(Error::Structure("new order is not a permutation of the operator's spaces".into()));
    }
    let off = subset_offsets(&a.dims(), &pos);
    let m = Mat::from_fn(a.dim(), a.dim(), |r, c| a.matrix[(off[r], off[c])]);
    LabeledOperator::new(pos.iter().map(|&p| a.spaces[p].clone()).collect(), m)
}

/// Eigenvalues in descending order with orthonormal eigenvectors.
pub fn hermitian_eig(a: &LabeledOperator) -> Result<(Vec<f64>, Vec<LabeledVector>)> {
    if !a.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Validation(format!(
            "operator is not Hermitian (‖a − a†‖ = {:.3e})",
            a.hermiticity_error()
        )));
    }
    let n = a.dim();
    let evd = a
        .hermitian_part()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Validation(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Vec::with_capacity(n);
    for k in (0..n).rev() {
        vals.push(s[k].re);
        vecs.push(LabeledVector { spaces: a.spaces.clone(), entries: (0..n).map(|i| u[(i, k)]).collect() });
    }
    Ok((vals, vecs))
}
