//! Quantum combs, link products, ensemble decompositions and the
//! performance operator.

use std::fmt;

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::tensor::{
    fmt_spaces, hermitian_eig, total_dim, CMat, LabeledOperator, LabeledVector, SpaceId, SpaceLabel, I, ONE, PSD_TOL,
    ZERO,
};

/// Ordered (input, output) port pairs of a comb.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToothStructure {
    teeth: Vec<(SpaceLabel, SpaceLabel)>,
}

impl ToothStructure {
    pub fn new(teeth: Vec<(SpaceLabel, SpaceLabel)>) -> Result<Self> {
        if teeth.is_empty() {
            return Err(Error::Structure("a comb needs at least one tooth".into()));
        }
        let s = Self { teeth };
        let spaces = s.spaces();
        for (i, a) in spaces.iter().enumerate() {
            if spaces[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::Structure(format!("tooth label {} used twice", a.id)));
            }
        }
        Ok(s)
    }

    /// Ports numbered 1..2N with the given (input, output) dimensions.
    pub fn canonical(dims: &[(usize, usize)]) -> Self {
        let teeth = dims
            .iter()
            .enumerate()
            .map(|(k, &(di, dout))| (SpaceLabel::port(2 * k + 1, di), SpaceLabel::port(2 * k + 2, dout)))
            .collect();
        Self::new(teeth).expect("canonical ports are distinct")
    }

    pub fn qubits(n: usize) -> Self {
        Self::canonical(&vec![(2, 2); n])
    }

    pub fn n_teeth(&self) -> usize {
        self.teeth.len()
    }

    pub fn teeth(&self) -> &[(SpaceLabel, SpaceLabel)] {
        &self.teeth
    }

    /// Spaces in the order input₁, output₁, …, input_N, output_N.
    pub fn spaces(&self) -> Vec<SpaceLabel> {
        self.teeth.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
    }

    pub fn ids(&self) -> Vec<SpaceId> {
        self.spaces().into_iter().map(|s| s.id).collect()
    }

    /// All spaces but the final output, where a probe lives.
    pub fn probe_spaces(&self) -> Vec<SpaceLabel> {
        let mut s = self.spaces();
        s.pop();
        s
    }

    pub fn last_output(&self) -> &SpaceLabel {
        &self.teeth.last().expect("nonempty").1
    }

    pub fn total_dim(&self) -> usize {
        total_dim(&self.spaces())
    }

    /// The first `k` teeth.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        Self::new(self.teeth[..k].to_vec())
    }
}

/// A PSD operator satisfying the causal chain of its tooth structure.
#[derive(Clone, Debug)]
pub struct Comb {
    pub op: LabeledOperator,
    pub structure: ToothStructure,
}

impl Comb {
    /// Validates `op` against `structure` at tolerance `tol`.
    pub fn new(op: LabeledOperator, structure: ToothStructure, tol: f64) -> Result<Self> {
        let report = validate_comb(&op, &structure, tol)?;
        if !report.passed {
            return Err(Error::Validation(format!("not a comb:\n{report}")));
        }
        let op = op.permute(&structure.ids())?;
        Ok(Self { op, structure })
    }

    /// Wraps an operator known to be a comb by construction.
    pub fn new_unchecked(op: LabeledOperator, structure: ToothStructure) -> Self {
        Self { op, structure }
    }
}

#[derive(Clone, Debug)]
pub struct LevelReport {
    /// Level k of the chain (1-based).
    pub level: usize,
    pub description: String,
    pub residual: f64,
    /// Smallest eigenvalue of the operator extracted at this level.
    pub min_eigenvalue: f64,
    pub psd: bool,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub tol: f64,
    pub min_eigenvalue: f64,
    pub psd: bool,
    pub levels: Vec<LevelReport>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.levels.iter().map(|l| l.residual).fold(0.0, f64::max)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "psd: {} (min eigenvalue {:.3e})",
            if self.psd { "ok" } else { "FAIL" },
            self.min_eigenvalue
        )?;
        for l in &self.levels {
            writeln!(
                f,
                "level {}: {} residual {:.3e} [{}]{}",
                l.level,
                l.description,
                l.residual,
                if l.residual < self.tol { "ok" } else { "FAIL" },
                if l.psd { String::new() } else { format!(", extracted operator not PSD ({:.3e})", l.min_eigenvalue) }
            )?;
        }
        write!(f, "result: {} at tol {:.1e}", if self.passed { "pass" } else { "fail" }, self.tol)
    }
}

struct ChainLevel {
    inputs: Vec<SpaceLabel>,
    outputs: Vec<SpaceLabel>,
}

fn ids_of(s: &[SpaceLabel]) -> Vec<SpaceId> {
    s.iter().map(|l| l.id.clone()).collect()
}

fn residual_norm(d: &LabeledOperator) -> f64 {
    d.hermitian_norm().max(d.hermiticity_error())
}

fn psd_report(op: &LabeledOperator) -> (f64, bool) {
    let ev = op.eigenvalues();
    let lmin = ev.first().copied().unwrap_or(0.0);
    let lmax = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (lmin, op.is_hermitian(crate::tensor::HERMITIAN_TOL) && lmin >= -PSD_TOL * lmax)
}

/// Checks the chain `tr_out C^(k) = C^(k−1) ⊗ 1_in` from the last level
/// down to `tr_out C^(1) = 1_in`, extracting `C^(k−1)` by averaging.
fn validate_chain(op: &LabeledOperator, levels: &[ChainLevel], tol: f64) -> Result<ValidationReport> {
    let (min_eigenvalue, psd) = psd_report(op);
    let mut reports = Vec::new();
    let mut current = op.clone();
    for k in (0..levels.len()).rev() {
        let lv = &levels[k];
        let outs = ids_of(&lv.outputs);
        let ins = ids_of(&lv.inputs);
        let marginal = current.partial_trace(&outs)?;
        let din: usize = lv.inputs.iter().map(|s| s.dim).product();
        let describe = |a: &[SpaceId], b: &[SpaceId]| {
            let f = |v: &[SpaceId]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
            format!("tr_{{{}}} C^({}) vs 1_{{{}}}", f(a), k + 1, f(b))
        };
        if k == 0 {
            let target = LabeledOperator::identity(marginal.spaces().to_vec())?;
            let residual = residual_norm(&marginal.sub(&target)?);
            let (lmin, ok) = psd_report(&current);
            reports.push(LevelReport { level: 1, description: describe(&outs, &ins), residual, min_eigenvalue: lmin, psd: ok });
        } else {
            let prev = marginal.partial_trace(&ins)?.scale_real(1.0 / din as f64);
            let target = prev.extend_to(&lv.inputs, &marginal.ids())?;
            let residual = residual_norm(&marginal.sub(&target)?);
            let (lmin, ok) = psd_report(&prev);
            reports.push(LevelReport {
                level: k + 1,
                description: format!("{} ⊗ C^({})", describe(&outs, &ins), k),
                residual,
                min_eigenvalue: lmin,
                psd: ok,
            });
            current = prev;
        }
    }
    reports.reverse();
    let passed = psd && reports.iter().all(|r| r.residual < tol && r.psd);
    Ok(ValidationReport { tol, min_eigenvalue, psd, levels: reports, passed })
}

fn check_space_set(op: &LabeledOperator, expected: &[SpaceLabel]) -> Result<LabeledOperator> {
    let mut a: Vec<_> = op.spaces().to_vec();
    let mut b: Vec<_> = expected.to_vec();
    a.sort_by(|x, y| x.id.cmp(&y.id));
    b.sort_by(|x, y| x.id.cmp(&y.id));
    if a != b {
        return Err(Error::Structure(format!(
            "operator lives on [{}] but the structure expects [{}]",
            fmt_spaces(op.spaces()),
            fmt_spaces(expected)
        )));
    }
    op.permute(&ids_of(expected))
}

/// Validates the comb conditions of `c` for tooth structure `s`.
pub fn validate_comb(c: &LabeledOperator, s: &ToothStructure, tol: f64) -> Result<ValidationReport> {
    let c = check_space_set(c, &s.spaces())?;
    let levels: Vec<ChainLevel> =
        s.teeth().iter().map(|(i, o)| ChainLevel { inputs: vec![i.clone()], outputs: vec![o.clone()] }).collect();
    validate_chain(&c, &levels, tol)
}

/// Validates a probe for combs of structure `s`: a comb with teeth
/// (∅, 1), (2, 3), …, (2N−2, 2N−1 ⊗ aux).
pub fn validate_probe(t: &LabeledOperator, s: &ToothStructure, tol: f64) -> Result<ValidationReport> {
    let mut expected = s.probe_spaces();
    let aux = t.spaces().iter().find(|l| l.id == SpaceId::Aux).cloned();
    if let Some(a) = &aux {
        expected.push(a.clone());
    }
    let t = check_space_set(t, &expected)?;
    let teeth = s.teeth();
    let n = teeth.len();
    let mut levels = Vec::with_capacity(n);
    for k in 0..n {
        let inputs = if k == 0 { Vec::new() } else { vec![teeth[k - 1].1.clone()] };
        let mut outputs = vec![teeth[k].0.clone()];
        if k == n - 1 {
            outputs.extend(aux.iter().cloned());
        }
        levels.push(ChainLevel { inputs, outputs });
    }
    validate_chain(&t, &levels, tol)
}

/// Link product `E * F = tr_S[(E^{T_S} ⊗ 1)(1 ⊗ F)]` over the shared
/// spaces S. The result lives on E's remaining spaces followed by F's.
pub fn link_product(e: &LabeledOperator, f: &LabeledOperator) -> Result<LabeledOperator> {
    let mut shared = Vec::new();
    for a in e.spaces() {
        if let Some(b) = f.spaces().iter().find(|b| b.id == a.id) {
            if a.dim != b.dim {
                return Err(Error::Structure(format!(
                    "shared space {} has dimension {} vs {}",
                    a.id, a.dim, b.dim
                )));
            }
            shared.push(a.clone());
        }
    }
    let x: Vec<SpaceLabel> = e.spaces().iter().filter(|a| !shared.contains(a)).cloned().collect();
    let y: Vec<SpaceLabel> = f.spaces().iter().filter(|a| !shared.contains(a)).cloned().collect();
    let ep = e.permute(&[ids_of(&x), ids_of(&shared)].concat())?;
    let fp = f.permute(&[ids_of(&shared), ids_of(&y)].concat())?;
    let (dx, ds, dy) = (total_dim(&x), total_dim(&shared), total_dim(&y));
    let em = ep.matrix();
    let fm = fp.matrix();
    let ev = Mat::<c64>::from_fn(dx * dx, ds * ds, |r, c| em[((r / dx) * ds + c / ds, (r % dx) * ds + c % ds)]);
    let fv = Mat::<c64>::from_fn(ds * ds, dy * dy, |r, c| fm[((r / ds) * dy + c / dy, (r % ds) * dy + c % dy)]);
    let prod = &ev * &fv;
    let out = Mat::<c64>::from_fn(dx * dy, dx * dy, |r, c| {
        let (x1, y1) = (r / dy, r % dy);
        let (x2, y2) = (c / dy, c % dy);
        prod[(x1 * dx + x2, y1 * dy + y2)]
    });
    LabeledOperator::new([x, y].concat(), out)
}

/// Vectors `|C_i⟩` with `Σ_i |C_i⟩⟨C_i| = C`, optionally with θ-derivatives.
#[derive(Clone, Debug)]
pub struct EnsembleDecomposition {
    spaces: Vec<SpaceLabel>,
    vectors: Vec<LabeledVector>,
    derivatives: Option<Vec<LabeledVector>>,
}

/// Rank threshold relative to the largest eigenvalue.
pub const RANK_TOL: f64 = 1e-10;

fn gram_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    let g = m.adjoint() * m;
    let g = Mat::<c64>::from_fn(g.nrows(), g.ncols(), |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
    g.self_adjoint_eigenvalues(Side::Lower).expect("Gram eigenvalues")
}

impl EnsembleDecomposition {
    pub fn new(
        spaces: Vec<SpaceLabel>,
        vectors: Vec<LabeledVector>,
        derivatives: Option<Vec<LabeledVector>>,
    ) -> Result<Self> {
        for v in vectors.iter().chain(derivatives.iter().flatten()) {
            if v.spaces() != spaces.as_slice() {
                return Err(Error::Structure(format!(
                    "ensemble vector on [{}] but decomposition is on [{}]",
                    fmt_spaces(v.spaces()),
                    fmt_spaces(&spaces)
                )));
            }
        }
        if let Some(d) = &derivatives {
            if d.len() != vectors.len() {
                return Err(Error::Structure(format!(
                    "{} derivatives for {} vectors",
                    d.len(),
                    vectors.len()
                )));
            }
        }
        Ok(Self { spaces, vectors, derivatives })
    }

    pub fn spaces(&self) -> &[SpaceLabel] {
        &self.spaces
    }

    pub fn vectors(&self) -> &[LabeledVector] {
        &self.vectors
    }

    pub fn derivatives(&self) -> Option<&[LabeledVector]> {
        self.derivatives.as_deref()
    }

    pub fn q(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        total_dim(&self.spaces)
    }

    pub fn with_derivatives(self, derivatives: Vec<LabeledVector>) -> Result<Self> {
        Self::new(self.spaces, self.vectors, Some(derivatives))
    }

    fn as_matrix(vs: &[LabeledVector], dim: usize) -> CMat {
        Mat::from_fn(dim, vs.len(), |i, k| vs[k].entries()[i])
    }

    /// Columns are the vectors.
    pub fn matrix(&self) -> CMat {
        Self::as_matrix(&self.vectors, self.dim())
    }

    pub fn derivative_matrix(&self) -> Option<CMat> {
        self.derivatives.as_ref().map(|d| Self::as_matrix(d, self.dim()))
    }

    /// Rank of `Σ|C_i⟩⟨C_i|` with eigenvalues above `tol·λ_max`.
    pub fn rank(&self) -> usize {
        self.numerical_rank(RANK_TOL)
    }

    pub fn numerical_rank(&self, tol: f64) -> usize {
        let ev = gram_eigenvalues(&self.matrix());
        let lmax = ev.iter().fold(0.0f64, |m, v| m.max(*v));
        if lmax <= 0.0 {
            return 0;
        }
        ev.iter().filter(|&&v| v > tol * lmax).count()
    }

    /// `Σ_i |C_i⟩⟨C_i|`
    pub fn operator(&self) -> LabeledOperator {
        LabeledOperator::sum_of_outer(self.spaces.clone(), &self.vectors, &self.vectors).expect("consistent spaces")
    }

    /// `Σ_i (|Ċ_i⟩⟨C_i| + |C_i⟩⟨Ċ_i|)`
    pub fn derivative_operator(&self) -> Result<LabeledOperator> {
        let d = self.derivatives.as_ref().ok_or_else(|| Error::Structure("ensemble has no derivatives".into()))?;
        let a = LabeledOperator::sum_of_outer(self.spaces.clone(), d, &self.vectors)?;
        a.add(&a.adjoint())
    }

    /// Re-expresses the ensemble with exactly `rank` vectors, using the
    /// leading right singular vectors V_r of the vector matrix:
    /// `B = A·V_r`, `Ḃ = Ȧ·V_r`. Both `Σ|C⟩⟨C|` and its θ-derivative are
    /// unchanged.
    pub fn compressed(&self, tol: f64) -> Self {
        let a = self.matrix();
        let q = self.q();
        if q == 0 {
            return self.clone();
        }
        let g = a.adjoint() * &a;
        let g = Mat::<c64>::from_fn(q, q, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
        let evd = g.self_adjoint_eigen(Side::Lower).expect("Gram eigendecomposition");
        let s = evd.S().column_vector();
        let u = evd.U();
        let lmax = (0..q).map(|k| s[k].re).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..q).rev().filter(|&k| lmax > 0.0 && s[k].re > tol * lmax).collect();
        let vr = Mat::<c64>::from_fn(q, keep.len(), |i, k| u[(i, keep[k])]);
        let cols = |m: &CMat| -> Vec<LabeledVector> {
            (0..m.ncols())
                .map(|k| {
                    LabeledVector::new(self.spaces.clone(), (0..m.nrows()).map(|i| m[(i, k)]).collect())
                        .expect("consistent length")
                })
                .collect()
        };
        let b = &a * &vr;
        let db = self.derivative_matrix().map(|da| &da * &vr);
        Self { spaces: self.spaces.clone(), vectors: cols(&b), derivatives: db.as_ref().map(cols) }
    }
}

/// Eigen-ensemble `√λ_k v_k` of a PSD operator, keeping `λ_k > rank_tol·λ_max`.
pub fn ensemble_decomposition(c: &LabeledOperator, rank_tol: f64) -> Result<EnsembleDecomposition> {
    let (vals, vecs) = hermitian_eig(c)?;
    let lmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&lmin) = vals.last() {
        if lmin < -rank_tol * lmax {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
    }
    let vectors = vals
        .iter()
        .zip(vecs)
        .filter(|(v, _)| **v > rank_tol * lmax && **v > 0.0)
        .map(|(v, vec)| vec.scale(c64::new(v.sqrt(), 0.0)))
        .collect();
    EnsembleDecomposition::new(c.spaces().to_vec(), vectors, None)
}

/// Hermitian q×q gauge matrix h.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMatrix(CMat);

impl GaugeMatrix {
    pub fn new(h: CMat) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::Structure("gauge matrix must be square".into()));
        }
        let op = LabeledOperator::new(vec![SpaceLabel::named("gauge", h.nrows().max(1))], if h.nrows() == 0 {
            Mat::zeros(1, 1)
        } else {
            h.clone()
        })?;
        if !op.is_hermitian(1e-9) {
            return Err(Error::Validation(format!(
                "gauge matrix is not Hermitian (‖h − h†‖ = {:.3e})",
                op.hermiticity_error()
            )));
        }
        let n = h.nrows();
        let h = Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
        Ok(Self(h))
    }

    pub fn zeros(q: usize) -> Self {
        Self(Mat::zeros(q, q))
    }

    pub fn scalar(v: f64) -> Self {
        Self(Mat::from_fn(1, 1, |_, _| c64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }

    pub fn add(&self, other: &GaugeMatrix) -> Result<GaugeMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Structure("gauge dimensions differ".into()));
        }
        Ok(Self(&self.0 + &other.0))
    }

    pub fn scale(&self, s: f64) -> GaugeMatrix {
        let n = self.dim();
        Self(Mat::from_fn(n, n, |i, j| self.0[(i, j)] * s))
    }
}

/// Ω_θ(h) together with the gauge that produced it.
#[derive(Clone, Debug)]
pub struct PerformanceOperator {
    pub op: LabeledOperator,
    pub gauge: GaugeMatrix,
}

/// `|C̃̇_i⟩ = |Ċ_i⟩ − i Σ_j h_ij |C_j⟩`
pub fn gauged_derivatives(d: &EnsembleDecomposition, h: &GaugeMatrix) -> Result<Vec<LabeledVector>> {
    let dv = d.derivatives().ok_or_else(|| Error::Structure("ensemble has no derivatives".into()))?;
    if h.dim() != d.q() {
        return Err(Error::Structure(format!("gauge is {}×{} but the ensemble has {} vectors", h.dim(), h.dim(), d.q())));
    }
    let mut out = dv.to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        for (j, c) in d.vectors().iter().enumerate() {
            let hij = h.get(i, j);
            if hij != ZERO {
                o.axpy(-I * hij, c);
            }
        }
    }
    Ok(out)
}

/// `Ω_θ(h) = 4 Σ_i (|C̃̇_i⟩⟨C̃̇_i|)^{T_{1…2N−1}}`
pub fn performance_operator(
    d: &EnsembleDecomposition,
    h: &GaugeMatrix,
    s: &ToothStructure,
) -> Result<PerformanceOperator> {
    let spaces = s.spaces();
    if d.spaces() != spaces.as_slice() {
        return Err(Error::Structure(format!(
            "ensemble lives on [{}] but the structure is [{}]",
            fmt_spaces(d.spaces()),
            fmt_spaces(&spaces)
        )));
    }
    let g = gauged_derivatives(d, h)?;
    let sum = LabeledOperator::sum_of_outer(spaces.clone(), &g, &g)?;
    let transposed = ids_of(&s.probe_spaces());
    let op = sum.partial_transpose(&transposed)?.scale_real(4.0);
    Ok(PerformanceOperator { op, gauge: h.clone() })
}

/// SLD quantum Fisher information of a state family at one point.
pub fn state_qfi(rho: &LabeledOperator, drho: &LabeledOperator) -> Result<f64> {
    if rho.spaces() != drho.spaces() {
        return Err(Error::Structure("state and derivative live on different spaces".into()));
    }
    let tol = 1e-8;
    if !rho.is_hermitian(tol) || (rho.trace() - ONE).norm() > tol || !rho.is_psd(tol) {
        return Err(Error::Validation("rho is not a normalized density operator".into()));
    }
    if drho.hermiticity_error() > tol * drho.max_abs().max(1.0) || drho.trace().norm() > tol * drho.max_abs().max(1.0) {
        return Err(Error::Validation("drho must be Hermitian and traceless".into()));
    }
    let (vals, vecs) = hermitian_eig(rho)?;
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let eps = 1e-12 * lmax;
    let n = vals.len();
    let u = Mat::<c64>::from_fn(n, n, |i, k| vecs[k].entries()[i]);
    let m = u.adjoint() * drho.matrix() * &u;
    let mut j = 0.0;
    for a in 0..n {
        for b in 0..n {
            let den = vals[a] + vals[b];
            if den > eps {
                j += 2.0 * m[(a, b)].norm_sqr() / den;
            }
        }
    }
    Ok(j)
}

/// Cramér–Rao bound `1/(νJ)`; infinite when J = 0.
pub fn cramer_rao_bound(j: f64, nu: u64) -> Result<f64> {
    if nu == 0 {
        return Err(Error::Domain("the number of repetitions must be positive".into()));
    }
    if !(j >= 0.0) {
        return Err(Error::Domain(format!("Fisher information must be nonnegative, got {j}")));
    }
    if j == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (nu as f64 * j))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Differentiability {
    Analytic,
    FiniteDifference,
}

/// A θ-parametrized comb with an ensemble decomposition.
pub trait CombFamily: Sync {
    fn structure(&self) -> ToothStructure;

    fn differentiability(&self) -> Differentiability;

    /// Closed interval over which the family is declared to have constant rank.
    fn domain(&self) -> (f64, f64);

    /// Ensemble at θ; analytic families include derivatives.
    fn ensemble(&self, theta: f64) -> Result<EnsembleDecomposition>;

    fn evaluate(&self, theta: f64) -> Result<(Comb, EnsembleDecomposition)> {
        let d = self.ensemble(theta)?;
        Ok((Comb::new_unchecked(d.operator(), self.structure()), d))
    }
}

/// Family defined by a closure.
pub struct ExplicitFamily<F> {
    pub structure: ToothStructure,
    pub differentiability: Differentiability,
    pub domain: (f64, f64),
    pub builder: F,
}

impl<F> CombFamily for ExplicitFamily<F>
where
    F: Fn(f64) -> Result<EnsembleDecomposition> + Sync,
{
    fn structure(&self) -> ToothStructure {
        self.structure.clone()
    }

    fn differentiability(&self) -> Differentiability {
        self.differentiability
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn ensemble(&self, theta: f64) -> Result<EnsembleDecomposition> {
        (self.builder)(theta)
    }
}

/// Relative jump above which neighbouring ensembles are taken to be in
/// different gauges.
const GAUGE_JUMP: f64 = 1e-2;

/// Central differences `(|C_{θ+s,i}⟩ − |C_{θ−s,i}⟩)/(2s)`.
pub fn finite_difference_derivatives(f: &dyn CombFamily, theta: f64, step: f64) -> Result<EnsembleDecomposition> {
    if !(step > 0.0) {
        return Err(Error::Domain("finite-difference step must be positive".into()));
    }
    let c0 = f.ensemble(theta)?;
    let cp = f.ensemble(theta + step)?;
    let cm = f.ensemble(theta - step)?;
    if cp.q() != c0.q() || cm.q() != c0.q() {
        return Err(Error::Gauge(format!(
            "ensemble size changes across θ ({} / {} / {})",
            cm.q(),
            c0.q(),
            cp.q()
        )));
    }
    let scale = c0.vectors().iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ders = Vec::with_capacity(c0.q());
    for i in 0..c0.q() {
        let (p, m, z) = (&cp.vectors()[i], &cm.vectors()[i], &c0.vectors()[i]);
        let jump = p.sub(z).norm().max(m.sub(z).norm());
        if jump > GAUGE_JUMP * scale {
            return Err(Error::Gauge(format!(
                "vector {i} jumps by {jump:.3e} over a step of {step:.1e}; the family has no smooth gauge"
            )));
        }
        ders.push(p.sub(m).scale(c64::new(0.5 / step, 0.0)));
    }
    c0.with_derivatives(ders)
}

/// Options for turning a family into a derivative-carrying ensemble of
/// minimal size.
#[derive(Clone, Debug)]
pub struct EnsembleOptions {
    pub rank_tol: f64,
    pub fd_step: f64,
    /// Reduce to q = r vectors.
    pub compress: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { rank_tol: RANK_TOL, fd_step: 1e-6, compress: true }
    }
}

/// Ensemble at θ with derivatives, after checking that the rank at θ is
/// maximal over samples of the declared domain.
pub fn prepare_ensemble(f: &dyn CombFamily, theta: f64, opts: &EnsembleOptions) -> Result<EnsembleDecomposition> {
    let d = match f.differentiability() {
        Differentiability::Analytic => f.ensemble(theta)?,
        Differentiability::FiniteDifference => finite_difference_derivatives(f, theta, opts.fd_step)?,
    };
    if d.derivatives().is_none() {
        return Err(Error::Structure("analytic family returned no derivatives".into()));
    }
    let r = d.numerical_rank(opts.rank_tol);
    let (lo, hi) = f.domain();
    let mut samples = vec![(theta, r)];
    for t in [lo, 0.5 * (lo + hi), hi] {
        if t != theta {
            samples.push((t, f.ensemble(t)?.numerical_rank(opts.rank_tol)));
        }
    }
    let max_rank = samples.iter().map(|s| s.1).max().unwrap_or(r);
    if samples.iter().any(|s| s.1 != r) {
        log::warn!("comb rank is not constant over the domain: {samples:?}");
    }
    if r < max_rank {
        return Err(Error::ConstantRank { at_theta: r, max_rank, samples });
    }
    Ok(if opts.compress { d.compressed(opts.rank_tol) } else { d })
}
