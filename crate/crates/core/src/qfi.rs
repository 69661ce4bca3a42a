//! Comb quantum Fisher information via semidefinite programming.
//!
//! Both routes minimize over the gauge h jointly with the dual comb
//! variables. The bilinear term `λ·S` is linearized by working with
//! `S̃ = λS`; the normalized blocks are recovered by division.

use combqfi_sdp::{
    solve_sdp, ComplexLin, Field, HermitianExpr, HermitianVar, LinExpr, ScalarVar, SdpProblem, SdpSolution,
    SolveStatus, SolverOptions,
};
use faer::{c64, Mat};

use crate::comb::{
    link_product, performance_operator, prepare_ensemble, validate_probe, CombFamily, EnsembleDecomposition,
    EnsembleOptions, GaugeMatrix, ToothStructure, ValidationReport,
};
use crate::error::{Error, Result};
use crate::tensor::{CMat, LabeledOperator, LabeledVector, SpaceId, SpaceLabel, I, ZERO};

#[derive(Clone, Debug)]
pub struct QfiOptions {
    pub solver: SolverOptions,
    pub ensemble: EnsembleOptions,
}

impl Default for QfiOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions { gap_tol: 1e-11, feas_tol: 1e-10, infeasibility_tol: 1e-8, max_iters: 150 },
            ensemble: EnsembleOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QfiResult {
    pub j: f64,
    /// `J = 4λ` on the dual route.
    pub lambda: f64,
    pub h_opt: GaugeMatrix,
    /// Normalized dual combs `S^(1)…S^(N−1)`, on spaces 1..2k.
    pub s_blocks: Vec<LabeledOperator>,
    pub gap: f64,
    pub iterations: usize,
    /// The (compressed) ensemble the gauge refers to.
    pub ensemble: EnsembleDecomposition,
}

/// Relative duality gap accepted from a stalled solve.
const STALL_ACCEPT: f64 = 1e-7;

/// Weight of the maximally mixed probe blended into a recovered optimum.
/// Optimal probes often leave a Kraus branch with zero output but nonzero
/// derivative, where the SLD QFI drops discontinuously below J; a tiny
/// full-rank admixture restores it at a cost of order `PROBE_MIXING · J`.
pub const PROBE_MIXING: f64 = 1e-9;

/// Relative slack on the primal optimum allowed while enforcing stationarity.
const PROBE_SLACK: f64 = 1e-9;

fn check_solution(sol: &SdpSolution, what: &str) -> Result<()> {
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::NumericalFailure if sol.gap.is_finite() && sol.gap < STALL_ACCEPT => {
            log::warn!("{what}: solver stalled at relative gap {:.2e}; accepting", sol.gap);
            Ok(())
        }
        status => Err(Error::Solver {
            status,
            detail: format!("{what}: gap {:.3e} after {} iterations", sol.gap, sol.iterations),
        }),
    }
}

/// Right-hand side of a partial-trace chain level.
#[derive(Clone, Copy)]
enum Prev {
    One,
    Scalar(ScalarVar),
    Var(HermitianVar),
}

fn push_hermitian_eq(p: &mut SdpProblem, lin: ComplexLin, diagonal: bool) {
    if diagonal {
        p.add_equality(lin.re);
    } else {
        p.add_complex_equality(lin);
    }
}

/// `Σ_y X[(A,x,y),(B,x',y)] = δ_{xx'} Prev[A,B]` for `X` on
/// `(prev spaces, d_in, d_out)`.
fn add_trace_level(p: &mut SdpProblem, x: HermitianVar, prev: Prev, d_prev: usize, d_in: usize, d_out: usize) {
    let n = d_prev * d_in;
    for row in 0..n {
        for col in row..n {
            let (a, xr) = (row / d_in, row % d_in);
            let (b, xc) = (col / d_in, col % d_in);
            let mut lin = ComplexLin::default();
            for y in 0..d_out {
                lin.add(&x.entry(row * d_out + y, col * d_out + y), 1.0);
            }
            if xr == xc {
                match prev {
                    Prev::One => {
                        if a == b {
                            lin.re.constant -= 1.0;
                        }
                    }
                    Prev::Scalar(l) => {
                        if a == b {
                            lin.re.add_term(l.index(), -1.0);
                        }
                    }
                    Prev::Var(s) => lin.add(&s.entry(a, b), -1.0),
                }
            }
            push_hermitian_eq(p, lin, row == col);
        }
    }
}

/// Dual comb chain `tr_2 S̃^(1) = λ·1_1`, `tr_{2k} S̃^(k) = S̃^(k−1) ⊗ 1_{2k−1}`.
struct DualChain {
    lambda: ScalarVar,
    blocks: Vec<HermitianVar>,
}

fn add_dual_chain(p: &mut SdpProblem, dims: &[usize], levels: usize) -> DualChain {
    let lambda = p.add_scalar();
    let mut blocks: Vec<HermitianVar> = Vec::with_capacity(levels);
    let mut d_prev = 1;
    for k in 0..levels {
        let (di, dout) = (dims[2 * k], dims[2 * k + 1]);
        let s = p.add_hermitian(d_prev * di * dout);
        let prev = if k == 0 { Prev::Scalar(lambda) } else { Prev::Var(blocks[k - 1]) };
        add_trace_level(p, s, prev, d_prev, di, dout);
        blocks.push(s);
        d_prev *= di * dout;
    }
    DualChain { lambda, blocks }
}

/// Places `X ⊗ 1_m` at offset `off` of `cone`, where `X` is the last chain
/// block or λ for a chain without blocks.
fn add_chain_diagonal(cone: &mut HermitianExpr, chain: &DualChain, off: usize, m: usize, total: usize) {
    match chain.blocks.last() {
        None => {
            for a in 0..total {
                cone.add_term(chain.lambda.index(), off + a, off + a, c64::new(1.0, 0.0));
            }
        }
        Some(s) => {
            for a in 0..s.dim {
                for b in a..s.dim {
                    let e = s.entry(a, b);
                    for x in 0..m {
                        cone.add_complex_lin(off + a * m + x, off + b * m + x, &e, c64::new(1.0, 0.0));
                    }
                }
            }
        }
    }
}

fn hermitian_cone(v: HermitianVar) -> HermitianExpr {
    let mut cone = HermitianExpr::new(v.dim, Field::Complex);
    for k in 0..v.num_params() {
        let (r, c, z) = v.basis(k);
        cone.add_term(v.offset + k, r, c, z);
    }
    cone
}

/// Border vectors `c_{i,m}` split into the h-independent part and one
/// linear part per gauge parameter.
///
/// Column `i·d + m` of each matrix is `c_{i,m}` on spaces 1..2N−1, with
/// `c_{i,m}[a] = conj(C̃̇_i[a·d + m])`.
struct Borders {
    d_last: usize,
    rest: usize,
    r: usize,
    c0: CMat,
    /// `(gauge parameter, sparse column entries (row, col, value))`.
    v: Vec<Vec<(usize, usize, c64)>>,
}

fn gauge_basis(r: usize, k: usize) -> (usize, usize, c64) {
    HermitianVar { offset: 0, dim: r }.basis(k)
}

fn borders(ens: &EnsembleDecomposition, s: &ToothStructure) -> Result<Borders> {
    if ens.spaces() != s.spaces().as_slice() {
        return Err(Error::Structure("ensemble and tooth structure disagree on spaces".into()));
    }
    let der = ens.derivatives().ok_or_else(|| Error::Structure("ensemble has no derivatives".into()))?;
    let d = s.last_output().dim;
    let rest = ens.dim() / d;
    let r = ens.q();
    let c0 = Mat::<c64>::from_fn(rest, r * d, |a, col| {
        let (i, m) = (col / d, col % d);
        der[i].entries()[a * d + m].conj()
    });
    let cv = ens.vectors();
    let mut v = Vec::with_capacity(r * r);
    for k in 0..r * r {
        let (pi, qi, z) = gauge_basis(r, k);
        // V_k[a,(i,m)] = i Σ_j conj(H_k[i,j]) conj(C_j[a,m])
        let mut entries = Vec::new();
        let mut push = |i: usize, j: usize, hij: c64| {
            let coef = I * hij.conj();
            for a in 0..rest {
                for m in 0..d {
                    let val = coef * cv[j].entries()[a * d + m].conj();
                    if val != ZERO {
                        entries.push((a, i * d + m, val));
                    }
                }
            }
        };
        push(pi, qi, z);
        if pi != qi {
            push(qi, pi, z.conj());
        }
        v.push(entries);
    }
    Ok(Borders { d_last: d, rest, r, c0, v })
}

/// Adds the border block `scale·[c_{i,m}]` with rows offset by `row_off`,
/// columns by `col_off`, replicated over `copies` with row stride
/// `copies` (row `a·copies + k`, column `col·copies + k`).
fn add_border(
    cone: &mut HermitianExpr,
    b: &Borders,
    h: HermitianVar,
    row_off: usize,
    scale: f64,
    copies: usize,
) {
    for a in 0..b.rest {
        for col in 0..b.r * b.d_last {
            let z = b.c0[(a, col)] * scale;
            if z != ZERO {
                for k in 0..copies {
                    cone.add_constant(row_off + a * copies + k, col * copies + k, z);
                }
            }
        }
    }
    for (l, entries) in b.v.iter().enumerate() {
        for &(a, col, z) in entries {
            for k in 0..copies {
                cone.add_term(h.offset + l, row_off + a * copies + k, col * copies + k, z * scale);
            }
        }
    }
}

fn normalized_blocks(
    sol: &SdpSolution,
    chain: &DualChain,
    s: &ToothStructure,
    lambda: f64,
) -> Result<Vec<LabeledOperator>> {
    let spaces = s.spaces();
    chain
        .blocks
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let m = sol.hermitian(v);
            let scale = if lambda > 0.0 { 1.0 / lambda } else { 1.0 };
            LabeledOperator::new(
                spaces[..2 * k + 2].to_vec(),
                Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * scale),
            )
        })
        .collect()
}

/// Comb QFI of a family at θ by the linearized dual SDP.
pub fn comb_qfi_dual(f: &dyn CombFamily, theta: f64, opts: &QfiOptions) -> Result<QfiResult> {
    let ens = prepare_ensemble(f, theta, &opts.ensemble)?;
    comb_qfi_dual_ensemble(&ens, &f.structure(), opts)
}

/// Dual SDP for a given ensemble with derivatives.
///
/// minimize λ subject to `tr_2 S̃^(1) = λ·1_1`,
/// `tr_{2k} S̃^(k) = S̃^(k−1) ⊗ 1_{2k−1}` and
/// `[[1_{r·d_{2N}}, c†], [c, S̃^(N−1) ⊗ 1_{2N−1}]] ⪰ 0`; `J = 4λ`.
pub fn comb_qfi_dual_ensemble(ens: &EnsembleDecomposition, s: &ToothStructure, opts: &QfiOptions) -> Result<QfiResult> {
    let b = borders(ens, s)?;
    let dims: Vec<usize> = s.spaces().iter().map(|l| l.dim).collect();
    let n = s.n_teeth();
    let mut p = SdpProblem::new();
    let chain = add_dual_chain(&mut p, &dims, n - 1);
    let h = p.add_hermitian(b.r);
    p.set_objective(&LinExpr::var(chain.lambda.index()));
    let top = b.r * b.d_last;
    let mut cone = HermitianExpr::new(top + b.rest, Field::Complex);
    for i in 0..top {
        cone.add_constant(i, i, c64::new(1.0, 0.0));
    }
    add_chain_diagonal(&mut cone, &chain, top, dims[2 * n - 2], b.rest);
    add_border(&mut cone, &b, h, top, 1.0, 1);
    p.add_psd(cone);
    let sol = solve_sdp(&p, &opts.solver)?;
    check_solution(&sol, "comb QFI")?;
    let lambda = sol.scalar(chain.lambda);
    log::debug!("comb QFI dual: λ = {lambda:.12e}, gap {:.2e}, {} iterations", sol.gap, sol.iterations);
    Ok(QfiResult {
        j: 4.0 * lambda,
        lambda,
        h_opt: GaugeMatrix::new(sol.hermitian(&h))?,
        s_blocks: normalized_blocks(&sol, &chain, s, lambda)?,
        gap: sol.gap,
        iterations: sol.iterations,
        ensemble: ens.clone(),
    })
}

/// `Ω̄(h) = (tr_{2N} Ω(h) / d_{2N}) ⊗ 1_{2N}`, the part of Ω visible to
/// probes, which never act on the final output.
pub fn twirled_performance_operator(
    ens: &EnsembleDecomposition,
    h: &GaugeMatrix,
    s: &ToothStructure,
) -> Result<LabeledOperator> {
    let omega = performance_operator(ens, h, s)?.op;
    let last = s.last_output().clone();
    let reduced = omega.partial_trace(&[last.id.clone()])?.scale_real(1.0 / last.dim as f64);
    reduced.extend_to(&[last], &s.ids())
}

/// Comb QFI by the min-entropy route:
/// `J = d_{2N} · min_h 2^{−H_min(N|[N−1])}` of the twirled performance
/// operator, solved as one SDP over (λ, h, S).
pub fn comb_qfi_min_entropy(f: &dyn CombFamily, theta: f64, opts: &QfiOptions) -> Result<f64> {
    let ens = prepare_ensemble(f, theta, &opts.ensemble)?;
    comb_qfi_min_entropy_ensemble(&ens, &f.structure(), opts)
}

pub fn comb_qfi_min_entropy_ensemble(ens: &EnsembleDecomposition, s: &ToothStructure, opts: &QfiOptions) -> Result<f64> {
    let b = borders(ens, s)?;
    let dims: Vec<usize> = s.spaces().iter().map(|l| l.dim).collect();
    let n = s.n_teeth();
    let d = b.d_last;
    let mut p = SdpProblem::new();
    let chain = add_dual_chain(&mut p, &dims, n - 1);
    let h = p.add_hermitian(b.r);
    p.set_objective(&LinExpr::var(chain.lambda.index()));
    // Ω̄·d_{2N} = W W† with columns 2·c_{i,m} ⊗ |k⟩_{2N}.
    let top = b.r * d * d;
    let mut cone = HermitianExpr::new(top + b.rest * d, Field::Complex);
    for i in 0..top {
        cone.add_constant(i, i, c64::new(1.0, 0.0));
    }
    add_chain_diagonal(&mut cone, &chain, top, dims[2 * n - 2] * d, b.rest * d);
    add_border(&mut cone, &b, h, top, 2.0, d);
    p.add_psd(cone);
    let sol = solve_sdp(&p, &opts.solver)?;
    check_solution(&sol, "min-entropy QFI")?;
    Ok(sol.scalar(chain.lambda))
}

/// `min λ` such that `1_{2N−1,2N} ⊗ λS ⪰ W` for a comb S on the first
/// N−1 teeth. For N = 1 this is the largest eigenvalue of W.
fn min_entropy_lambda(w: &LabeledOperator, s: &ToothStructure, opts: &SolverOptions) -> Result<f64> {
    let w = w.permute(&s.ids())?;
    if !w.is_hermitian(crate::tensor::HERMITIAN_TOL) {
        return Err(Error::Validation(format!(
            "operator is not Hermitian (‖W − W†‖ = {:.3e})",
            w.hermiticity_error()
        )));
    }
    let dims: Vec<usize> = s.spaces().iter().map(|l| l.dim).collect();
    let n = s.n_teeth();
    let dim = w.dim();
    let mut p = SdpProblem::new();
    let chain = add_dual_chain(&mut p, &dims, n - 1);
    p.set_objective(&LinExpr::var(chain.lambda.index()));
    let mut cone = HermitianExpr::new(dim, Field::Complex);
    add_chain_diagonal(&mut cone, &chain, 0, dims[2 * n - 2] * dims[2 * n - 1], dim);
    let m = w.matrix();
    for r in 0..dim {
        for c in r..dim {
            let z = if r == c { c64::new(m[(r, r)].re, 0.0) } else { (m[(r, c)] + m[(c, r)].conj()) * 0.5 };
            if z != ZERO {
                cone.add_constant(r, c, -z);
            }
        }
    }
    p.add_psd(cone);
    if let Some(&last) = chain.blocks.last() {
        p.add_psd(hermitian_cone(last));
    }
    let sol = solve_sdp(&p, opts)?;
    check_solution(&sol, "conditional min-entropy")?;
    Ok(sol.scalar(chain.lambda))
}

/// `H_min(N | [N−1])_W` in bits.
pub fn conditional_min_entropy(w: &LabeledOperator, s: &ToothStructure, opts: &SolverOptions) -> Result<f64> {
    let lambda = min_entropy_lambda(w, s, opts)?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "min-entropy undefined: the optimal scaling is {lambda:.3e} ≤ 0"
        )));
    }
    Ok(-lambda.log2())
}

/// `d_{2N} · 2^{−H_min}` of the twirled performance operator at a fixed
/// gauge; its minimum over h is the comb QFI.
pub fn min_entropy_objective(
    ens: &EnsembleDecomposition,
    h: &GaugeMatrix,
    s: &ToothStructure,
    opts: &SolverOptions,
) -> Result<f64> {
    let w = twirled_performance_operator(ens, h, s)?;
    Ok(s.last_output().dim as f64 * min_entropy_lambda(&w, s, opts)?)
}

/// A probe comb on spaces 1..2N−1, optionally with an ancilla.
#[derive(Clone, Debug)]
pub struct Probe {
    pub op: LabeledOperator,
    /// Structure of the comb being probed.
    pub structure: ToothStructure,
}

impl Probe {
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        validate_probe(&self.op, &self.structure, tol)
    }

    /// Rank-one extension `|τ⟩⟨τ|` with `|τ⟩ = Σ_k √μ_k |v_k⟩|k⟩_aux`, which
    /// traces back to the probe over the ancilla.
    pub fn purify(&self) -> Result<Probe> {
        if self.op.spaces().iter().any(|l| l.id == SpaceId::Aux) {
            return Err(Error::Structure("probe already carries an ancilla".into()));
        }
        let (vals, vecs) = crate::tensor::hermitian_eig(&self.op)?;
        let lmax = vals.first().copied().unwrap_or(0.0);
        let kept: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > crate::comb::RANK_TOL * lmax).collect();
        let aux = SpaceLabel::aux(kept.len().max(1));
        let mut spaces = self.op.spaces().to_vec();
        spaces.push(aux.clone());
        let mut tau = LabeledVector::zeros(spaces.clone());
        let na = aux.dim;
        for (slot, &k) in kept.iter().enumerate() {
            let w = vals[k].sqrt();
            for (i, z) in vecs[k].entries().iter().enumerate() {
                tau.entries_mut()[i * na + slot] += z * w;
            }
        }
        Ok(Probe { op: LabeledOperator::projector(&tau), structure: self.structure.clone() })
    }
}

/// Output state `ρ = C * T` and its derivative `ρ̇ = Ċ * T`, on the final
/// output followed by any probe ancilla.
pub fn probe_output_state(
    ens: &EnsembleDecomposition,
    probe: &Probe,
) -> Result<(LabeledOperator, LabeledOperator)> {
    let c = ens.operator();
    let dc = ens.derivative_operator()?;
    Ok((link_product(&c, &probe.op)?, link_product(&dc, &probe.op)?))
}

/// `tr[V · M]` for a Hermitian variable V and Hermitian M.
fn hermitian_pairing(v: HermitianVar, m: &CMat) -> LinExpr {
    let mut e = LinExpr::new();
    for a in 0..v.dim {
        e.add_term(v.param(a, a), m[(a, a)].re);
        for b in a + 1..v.dim {
            // 2 Re(V_ab M_ba)
            let z = m[(b, a)];
            e.add_term(v.param(a, b), 2.0 * z.re);
            e.add_term(v.param(b, a), -2.0 * z.im);
        }
    }
    e
}

/// Maximizes `tr[T · tr_{2N} Ω(h)]` over probe combs without ancilla, at a
/// fixed gauge. Among the (near-)optimal T, a second solve picks one that
/// makes the objective stationary in h, which is a saddle point whenever h
/// is the optimal gauge.
pub fn optimal_probe(f: &dyn CombFamily, theta: f64, h_opt: &GaugeMatrix, opts: &QfiOptions) -> Result<(Probe, f64)> {
    let ens = prepare_ensemble(f, theta, &opts.ensemble)?;
    optimal_probe_ensemble(&ens, &f.structure(), h_opt, opts)
}

pub fn optimal_probe_ensemble(
    ens: &EnsembleDecomposition,
    s: &ToothStructure,
    h_opt: &GaugeMatrix,
    opts: &QfiOptions,
) -> Result<(Probe, f64)> {
    let first = solve_probe(ens, s, h_opt, opts, None)?;
    let floor = first.1 - PROBE_SLACK * first.1.abs().max(1.0);
    match solve_probe(ens, s, h_opt, opts, Some(floor)) {
        Ok(r) => Ok(r),
        Err(Error::Solver { status, detail }) => {
            log::warn!("stationary refinement failed ({status}: {detail}); keeping the plain optimum");
            Ok(first)
        }
        Err(e) => Err(e),
    }
}

fn solve_probe(
    ens: &EnsembleDecomposition,
    s: &ToothStructure,
    h_opt: &GaugeMatrix,
    opts: &QfiOptions,
    floor: Option<f64>,
) -> Result<(Probe, f64)> {
    let b = borders(ens, s)?;
    if h_opt.dim() != b.r {
        return Err(Error::Structure(format!("gauge is {}×{} but the ensemble has {} vectors", h_opt.dim(), h_opt.dim(), b.r)));
    }
    let dims: Vec<usize> = s.spaces().iter().map(|l| l.dim).collect();
    let n = s.n_teeth();
    // c(h) = c0 + Σ_l y_l V_l with y the gauge parameters.
    let hv = HermitianVar { offset: 0, dim: b.r };
    let hm = h_opt.matrix();
    let y: Vec<f64> = (0..b.r * b.r)
        .map(|k| {
            let (pi, qi, z) = hv.basis(k);
            if z == c64::new(0.0, 1.0) {
                hm[(pi, qi)].im
            } else {
                hm[(pi, qi)].re
            }
        })
        .collect();
    let mut c = b.c0.clone();
    for (l, entries) in b.v.iter().enumerate() {
        for &(a, col, z) in entries {
            c[(a, col)] += z * y[l];
        }
    }
    let cc = &c * c.adjoint();
    let w = Mat::<c64>::from_fn(b.rest, b.rest, |i, j| cc[(i, j)] * 4.0);

    let mut p = SdpProblem::new();
    let mut ts: Vec<HermitianVar> = Vec::with_capacity(n);
    let mut d_prev = 1;
    for k in 0..n {
        let d_in = if k == 0 { 1 } else { dims[2 * k - 1] };
        let d_out = dims[2 * k];
        let t = p.add_hermitian(d_prev * d_in * d_out);
        let prev = if k == 0 { Prev::One } else { Prev::Var(ts[k - 1]) };
        add_trace_level(&mut p, t, prev, d_prev, d_in, d_out);
        ts.push(t);
        d_prev *= d_in * d_out;
    }
    let t = *ts.last().expect("n ≥ 1");
    let value_expr = hermitian_pairing(t, &w);
    match floor {
        None => {
            let mut obj = value_expr;
            for (_, coef) in obj.terms.iter_mut() {
                *coef = -*coef;
            }
            p.set_objective(&obj);
        }
        Some(floor) => {
            // Minimize the largest gradient component max_l |tr[T G_l]|.
            let mut e = value_expr;
            e.constant -= floor;
            p.add_nonnegative(&e);
            let slack = p.add_scalar();
            for entries in &b.v {
                let mut vl = Mat::<c64>::zeros(b.rest, b.r * b.d_last);
                for &(a, col, z) in entries {
                    vl[(a, col)] += z;
                }
                let x = &vl * c.adjoint();
                let g = Mat::<c64>::from_fn(b.rest, b.rest, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 4.0);
                let grad = hermitian_pairing(t, &g);
                for sign in [1.0, -1.0] {
                    let mut e = LinExpr::var(slack.0);
                    e.add_expr(&grad, sign);
                    p.add_nonnegative(&e);
                }
            }
            p.set_objective(&LinExpr::var(slack.0));
        }
    }
    p.add_psd(hermitian_cone(t));
    let sol = solve_sdp(&p, &opts.solver)?;
    check_solution(&sol, "optimal probe")?;
    let tm = sol.hermitian(&t);
    let norm: usize = (0..n).map(|k| dims[2 * k]).product();
    let tm = Mat::<c64>::from_fn(tm.nrows(), tm.ncols(), |i, j| {
        let mixed = if i == j { PROBE_MIXING / norm as f64 } else { 0.0 };
        tm[(i, j)] * (1.0 - PROBE_MIXING) + mixed
    });
    let value = (0..tm.nrows()).map(|i| (0..tm.ncols()).map(|j| tm[(i, j)] * w[(j, i)]).sum::<c64>().re).sum();
    let op = LabeledOperator::new(s.probe_spaces(), tm)?;
    Ok((Probe { op, structure: s.clone() }, value))
}

/// Channel QFI `min_h ‖tr_2 Ω(h)‖_∞` for one-tooth families.
pub fn channel_qfi(f: &dyn CombFamily, theta: f64, opts: &QfiOptions) -> Result<f64> {
    let s = f.structure();
    if s.n_teeth() != 1 {
        return Err(Error::Structure(format!("channel QFI needs one tooth, got {}", s.n_teeth())));
    }
    let ens = prepare_ensemble(f, theta, &opts.ensemble)?;
    channel_qfi_ensemble(&ens, &s, opts)
}

pub fn channel_qfi_ensemble(ens: &EnsembleDecomposition, s: &ToothStructure, opts: &QfiOptions) -> Result<f64> {
    if s.n_teeth() != 1 {
        return Err(Error::Structure(format!("channel QFI needs one tooth, got {}", s.n_teeth())));
    }
    let b = borders(ens, s)?;
    let mut p = SdpProblem::new();
    let lambda = p.add_scalar();
    let h = p.add_hermitian(b.r);
    p.set_objective(&LinExpr::var(lambda.index()));
    let top = b.r * b.d_last;
    let mut cone = HermitianExpr::new(top + b.rest, Field::Complex);
    for i in 0..top {
        cone.add_constant(i, i, c64::new(1.0, 0.0));
    }
    for a in 0..b.rest {
        cone.add_term(lambda.index(), top + a, top + a, c64::new(1.0, 0.0));
    }
    add_border(&mut cone, &b, h, top, 2.0, 1);
    p.add_psd(cone);
    let sol = solve_sdp(&p, &opts.solver)?;
    check_solution(&sol, "channel QFI")?;
    Ok(sol.scalar(lambda))
}
