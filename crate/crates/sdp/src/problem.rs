use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::{c64, Mat};

use crate::SdpError;

/// Hermitian matrix stored as its upper triangle (row <= col).
///
/// Repeated positions are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: BTreeMap<(usize, usize), c64>,
}

impl SparseHermitian {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: BTreeMap::new() }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::new(dim);
        for i in 0..dim {
            m.add(i, i, c64::new(1.0, 0.0));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Adds `z` at `(r, c)`; the mirrored entry is implied. Lower-triangle
    /// positions are stored conjugated in the upper triangle.
    pub fn add(&mut self, r: usize, c: usize, z: c64) {
        assert!(r < self.dim && c < self.dim, "entry ({r},{c}) outside dim {}", self.dim);
        let (key, z) = if r <= c { ((r, c), z) } else { ((c, r), z.conj()) };
        *self.entries.entry(key).or_insert(c64::new(0.0, 0.0)) += z;
    }

    pub fn add_scaled(&mut self, other: &SparseHermitian, alpha: f64) {
        assert_eq!(self.dim, other.dim);
        for (&(r, c), &z) in &other.entries {
            *self.entries.entry((r, c)).or_insert(c64::new(0.0, 0.0)) += z * alpha;
        }
    }

    /// Upper-triangle entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        self.entries.iter().map(|(&(r, c), &z)| (r, c, z))
    }

    /// Largest imaginary part found on the diagonal.
    pub fn diagonal_imag_max(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|(_, z)| z.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for (&(r, c), &z) in &self.entries {
            m[(r, c)] = z;
            if r != c {
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    /// Reads the upper triangle of a dense matrix, dropping entries with
    /// modulus at most `drop_tol`.
    pub fn from_dense(m: &Mat<c64>, drop_tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut s = Self::new(m.nrows());
        for r in 0..m.nrows() {
            for c in r..m.ncols() {
                let z = m[(r, c)];
                if z.norm() > drop_tol {
                    s.entries.insert((r, c), z);
                }
            }
        }
        s
    }

    pub(crate) fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, z| z.norm() > tol);
    }
}

/// Sparse real affine form `constant + Σ coef·y[var]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, alpha: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, alpha * c);
        }
        self.constant += alpha * other.constant;
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * y[v]).sum::<f64>()
    }
}

/// Complex affine form, split into real and imaginary parts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexLin {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl ComplexLin {
    pub fn add(&mut self, other: &ComplexLin, alpha: f64) {
        self.re.add_expr(&other.re, alpha);
        self.im.add_expr(&other.im, alpha);
    }
}

/// Whether a cone block is already real symmetric or needs realification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

/// Affine Hermitian-valued expression `C0 + Σ y_j A_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianExpr {
    pub dim: usize,
    pub field: Field,
    pub constant: SparseHermitian,
    pub terms: BTreeMap<usize, SparseHermitian>,
}

impl HermitianExpr {
    pub fn new(dim: usize, field: Field) -> Self {
        Self { dim, field, constant: SparseHermitian::new(dim), terms: BTreeMap::new() }
    }

    pub fn add_constant(&mut self, r: usize, c: usize, z: c64) {
        self.constant.add(r, c, z);
    }

    pub fn add_term(&mut self, var: usize, r: usize, c: usize, z: c64) {
        let dim = self.dim;
        self.terms.entry(var).or_insert_with(|| SparseHermitian::new(dim)).add(r, c, z);
    }

    pub fn add_matrix(&mut self, var: usize, m: &SparseHermitian, alpha: f64) {
        let dim = self.dim;
        self.terms.entry(var).or_insert_with(|| SparseHermitian::new(dim)).add_scaled(m, alpha);
    }

    /// Adds `scale · entry(a, b)` at `(r, c)` where the entry is a complex
    /// affine form. Used for embedding Hermitian variables into larger blocks.
    pub fn add_complex_lin(&mut self, r: usize, c: usize, value: &ComplexLin, scale: c64) {
        for &(v, coef) in &value.re.terms {
            self.add_term(v, r, c, scale * coef);
        }
        for &(v, coef) in &value.im.terms {
            self.add_term(v, r, c, scale * c64::new(0.0, coef));
        }
        let k = scale * c64::new(value.re.constant, value.im.constant);
        if k != c64::new(0.0, 0.0) {
            self.add_constant(r, c, k);
        }
    }

    pub fn eval(&self, y: &[f64]) -> Mat<c64> {
        let mut m = self.constant.to_dense();
        for (&v, a) in &self.terms {
            if y[v] != 0.0 {
                for (r, c, z) in a.entries() {
                    m[(r, c)] += z * y[v];
                    if r != c {
                        m[(c, r)] += z.conj() * y[v];
                    }
                }
            }
        }
        m
    }
}

/// Handle to a scalar variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalarVar(pub usize);

impl ScalarVar {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a Hermitian matrix variable of side `dim`.
///
/// Occupies `dim²` consecutive scalars: `(a, a)` holds the real diagonal,
/// `(a, b)` with `a < b` the real part and `(b, a)` the imaginary part of
/// the upper entry, all at `offset + a·dim + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianVar {
    pub offset: usize,
    pub dim: usize,
}

impl HermitianVar {
    pub fn num_params(&self) -> usize {
        self.dim * self.dim
    }

    pub fn param(&self, a: usize, b: usize) -> usize {
        self.offset + a * self.dim + b
    }

    /// The matrix entry `(a, b)` as a complex affine form.
    pub fn entry(&self, a: usize, b: usize) -> ComplexLin {
        let mut out = ComplexLin::default();
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => {
                out.re.add_term(self.param(a, a), 1.0);
            }
            std::cmp::Ordering::Less => {
                out.re.add_term(self.param(a, b), 1.0);
                out.im.add_term(self.param(b, a), 1.0);
            }
            std::cmp::Ordering::Greater => {
                out.re.add_term(self.param(b, a), 1.0);
                out.im.add_term(self.param(a, b), -1.0);
            }
        }
        out
    }

    /// The basis matrix multiplying scalar `k` (local index), as a single
    /// upper-triangle entry.
    pub fn basis(&self, k: usize) -> (usize, usize, c64) {
        let (a, b) = (k / self.dim, k % self.dim);
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => (a, a, c64::new(1.0, 0.0)),
            std::cmp::Ordering::Less => (a, b, c64::new(1.0, 0.0)),
            std::cmp::Ordering::Greater => (b, a, c64::new(0.0, 1.0)),
        }
    }

    pub fn value(&self, y: &[f64]) -> Mat<c64> {
        let n = self.dim;
        Mat::from_fn(n, n, |a, b| match a.cmp(&b) {
            std::cmp::Ordering::Equal => c64::new(y[self.param(a, a)], 0.0),
            std::cmp::Ordering::Less => c64::new(y[self.param(a, b)], y[self.param(b, a)]),
            std::cmp::Ordering::Greater => c64::new(y[self.param(b, a)], -y[self.param(a, b)]),
        })
    }
}

/// Linear SDP: minimize `c·y + c0` subject to affine equalities and
/// affine Hermitian expressions being PSD.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    objective_constant: f64,
    equalities: Vec<LinExpr>,
    cones: Vec<HermitianExpr>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_scalar(&mut self) -> ScalarVar {
        self.num_vars += 1;
        self.objective.push(0.0);
        ScalarVar(self.num_vars - 1)
    }

    pub fn add_hermitian(&mut self, dim: usize) -> HermitianVar {
        let v = HermitianVar { offset: self.num_vars, dim };
        self.num_vars += dim * dim;
        self.objective.resize(self.num_vars, 0.0);
        v
    }

    pub fn set_objective(&mut self, expr: &LinExpr) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in &expr.terms {
            self.objective[v] += c;
        }
        self.objective_constant = expr.constant;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    /// Requires `expr = 0`.
    pub fn add_equality(&mut self, expr: LinExpr) {
        self.equalities.push(expr);
    }

    /// Requires the complex form to vanish (two real equalities).
    pub fn add_complex_equality(&mut self, expr: ComplexLin) {
        self.equalities.push(expr.re);
        self.equalities.push(expr.im);
    }

    /// Requires `expr ⪰ 0`.
    pub fn add_psd(&mut self, expr: HermitianExpr) {
        self.cones.push(expr);
    }

    /// Requires `expr ≥ 0`.
    pub fn add_nonnegative(&mut self, expr: &LinExpr) {
        let mut h = HermitianExpr::new(1, Field::Real);
        for &(v, c) in &expr.terms {
            h.add_term(v, 0, 0, c64::new(c, 0.0));
        }
        if expr.constant != 0.0 {
            h.add_constant(0, 0, c64::new(expr.constant, 0.0));
        }
        self.cones.push(h);
    }

    pub fn equalities(&self) -> &[LinExpr] {
        &self.equalities
    }

    pub fn cones(&self) -> &[HermitianExpr] {
        &self.cones
    }

    /// Checks that every reference is in range and expressions are Hermitian.
    pub fn check(&self) -> Result<(), SdpError> {
        for (k, e) in self.equalities.iter().enumerate() {
            if let Some(&(v, _)) = e.terms.iter().find(|(v, _)| *v >= self.num_vars) {
                return Err(SdpError::Structure(format!("equality {k} references undeclared variable {v}")));
            }
            if !e.constant.is_finite() || e.terms.iter().any(|(_, c)| !c.is_finite()) {
                return Err(SdpError::Structure(format!("equality {k} has non-finite coefficients")));
            }
        }
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.constant.dim() != cone.dim {
                return Err(SdpError::Structure(format!("cone {k}: constant has wrong size")));
            }
            let mats = std::iter::once(&cone.constant).chain(cone.terms.values());
            for m in mats {
                if m.dim() != cone.dim {
                    return Err(SdpError::Structure(format!("cone {k}: term has wrong size")));
                }
                if m.diagonal_imag_max() > 1e-12 {
                    return Err(SdpError::Structure(format!("cone {k}: diagonal is not real")));
                }
                if cone.field == Field::Real && m.entries().any(|(_, _, z)| z.im != 0.0) {
                    return Err(SdpError::Structure(format!("cone {k}: real block with complex entries")));
                }
                if m.entries().any(|(_, _, z)| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(SdpError::Structure(format!("cone {k}: non-finite entries")));
                }
            }
            if let Some(&v) = cone.terms.keys().find(|&&v| v >= self.num_vars) {
                return Err(SdpError::Structure(format!("cone {k} references undeclared variable {v}")));
            }
        }
        Ok(())
    }

    /// Self-describing plain-text dump with dense matrices, for
    /// cross-checking against external solvers.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sdp dump: minimize c.y + c0 s.t. eq.y = 0, cone_k(y) psd");
        let _ = writeln!(s, "variables {}", self.num_vars);
        let _ = write!(s, "objective {:e}", self.objective_constant);
        for c in &self.objective {
            let _ = write!(s, " {c:e}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "equalities {}", self.equalities.len());
        for e in &self.equalities {
            let _ = write!(s, "eq {:e} {}", e.constant, e.terms.len());
            for (v, c) in &e.terms {
                let _ = write!(s, " {v}:{c:e}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "cones {}", self.cones.len());
        for (k, cone) in self.cones.iter().enumerate() {
            let field = match cone.field {
                Field::Real => "real",
                Field::Complex => "complex",
            };
            let _ = writeln!(s, "cone {k} dim {} field {field} terms {}", cone.dim, cone.terms.len());
            write_dense(&mut s, "constant", &cone.constant);
            for (v, m) in &cone.terms {
                write_dense(&mut s, &format!("var {v}"), m);
            }
        }
        s
    }
}

fn write_dense(s: &mut String, title: &str, m: &SparseHermitian) {
    let d = m.to_dense();
    let _ = writeln!(s, "{title}");
    for r in 0..d.nrows() {
        let row: Vec<String> = (0..d.ncols()).map(|c| format!("{:e},{:e}", d[(r, c)].re, d[(r, c)].im)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
}
