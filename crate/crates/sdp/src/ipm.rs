//! Infeasible-start primal-dual path-following method (HKM direction with
//! Mehrotra predictor-corrector) for block-diagonal real symmetric SDPs:
//!
//! (P) min ⟨C, X⟩ s.t. ⟨A_j, X⟩ = b_j, X ⪰ 0
//! (D) max bᵀy   s.t. Z = C − Σ y_j A_j ⪰ 0

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

pub(crate) struct StdBlock {
    pub n: usize,
    pub c: Mat<f64>,
    /// `(variable, upper-triangle entries)` of each A_j present in the block.
    pub terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

pub(crate) struct StdProblem {
    pub m: usize,
    pub b: Vec<f64>,
    pub blocks: Vec<StdBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Stalled,
}

pub(crate) struct IpmOutcome {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    pub x: Vec<Mat<f64>>,
    pub pobj: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

pub(crate) struct IpmSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub infeas_tol: f64,
    pub max_iters: usize,
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

fn fro(a: &Mat<f64>) -> f64 {
    inner(a, a).sqrt()
}

fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn sym_of(a: Mat<f64>) -> Mat<f64> {
    let mut a = a;
    symmetrize(&mut a);
    a
}

fn term_norm(entries: &[(usize, usize, f64)]) -> f64 {
    entries
        .iter()
        .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
        .sum::<f64>()
        .sqrt()
}

/// Largest step α with `x + α·dx ⪰ 0`, assuming `x ≻ 0`.
fn max_step(x: &Mat<f64>, dx: &Mat<f64>) -> f64 {
    let Ok(llt) = x.llt(Side::Lower) else {
        return 0.0;
    };
    let l = llt.L();
    let mut w = dx.clone();
    solve_lower_triangular_in_place(l, w.as_mut(), Par::Seq);
    let mut w = w.transpose().to_owned();
    solve_lower_triangular_in_place(l, w.as_mut(), Par::Seq);
    symmetrize(&mut w);
    let Ok(ev) = w.self_adjoint_eigenvalues(Side::Lower) else {
        return 0.0;
    };
    let lmin = ev.first().copied().unwrap_or(0.0);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

impl StdProblem {
    fn ntot(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    /// `⟨A_j, G⟩` for possibly nonsymmetric block matrices G.
    fn op_a(&self, g: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (blk, gb) in self.blocks.iter().zip(g) {
            for (j, entries) in &blk.terms {
                let mut s = 0.0;
                for &(r, c, v) in entries {
                    s += if r == c { v * gb[(r, c)] } else { v * (gb[(r, c)] + gb[(c, r)]) };
                }
                out[*j] += s;
            }
        }
        out
    }

    /// `Σ y_j A_j` per block.
    fn op_at(&self, y: &[f64]) -> Vec<Mat<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut m = Mat::<f64>::zeros(blk.n, blk.n);
                for (j, entries) in &blk.terms {
                    let yj = y[*j];
                    if yj == 0.0 {
                        continue;
                    }
                    for &(r, c, v) in entries {
                        m[(r, c)] += yj * v;
                        if r != c {
                            m[(c, r)] += yj * v;
                        }
                    }
                }
                m
            })
            .collect()
    }

    /// Schur complement `M_ij = ⟨A_i, X A_j Z⁻¹⟩`.
    fn schur(&self, x: &[Mat<f64>], zinv: &[Mat<f64>], supports: &[Vec<Vec<usize>>]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.m, self.m);
        for (bi, blk) in self.blocks.iter().enumerate() {
            let n = blk.n;
            let xb = &x[bi];
            let zb = &zinv[bi];
            let mut r = Mat::<f64>::zeros(n, n);
            for (tj, (j, entries)) in blk.terms.iter().enumerate() {
                let cols = &supports[bi][tj];
                let k = cols.len();
                let pos = |idx: usize| cols.binary_search(&idx).expect("support index");
                let mut xa = Mat::<f64>::zeros(n, k);
                for &(rr, cc, v) in entries {
                    let pc = pos(cc);
                    for i in 0..n {
                        xa[(i, pc)] += v * xb[(i, rr)];
                    }
                    if rr != cc {
                        let pr = pos(rr);
                        for i in 0..n {
                            xa[(i, pr)] += v * xb[(i, cc)];
                        }
                    }
                }
                let zk = Mat::<f64>::from_fn(k, n, |a, c| zb[(cols[a], c)]);
                faer::linalg::matmul::matmul(r.as_mut(), faer::Accum::Replace, xa.as_ref(), zk.as_ref(), 1.0, Par::Seq);
                for (i, ientries) in blk.terms[..=tj].iter() {
                    let mut s = 0.0;
                    for &(rr, cc, v) in ientries {
                        s += if rr == cc { v * r[(rr, cc)] } else { v * (r[(rr, cc)] + r[(cc, rr)]) };
                    }
                    m[(*i, *j)] += s;
                    if i != j {
                        m[(*j, *i)] += s;
                    }
                }
            }
        }
        m
    }
}

fn factor_schur(m: &Mat<f64>) -> Option<faer::linalg::solvers::Llt<f64>> {
    if let Ok(l) = m.llt(Side::Lower) {
        return Some(l);
    }
    let dmax = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * dmax;
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Ok(l) = mm.llt(Side::Lower) {
            return Some(l);
        }
        reg *= 100.0;
    }
    None
}

fn solve_vec(llt: &faer::linalg::solvers::Llt<f64>, rhs: &[f64]) -> Vec<f64> {
    let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

pub(crate) fn solve(p: &StdProblem, s: &IpmSettings) -> IpmOutcome {
    let supports: Vec<Vec<Vec<usize>>> = p
        .blocks
        .iter()
        .map(|blk| {
            blk.terms
                .iter()
                .map(|(_, entries)| {
                    let mut cols: Vec<usize> = entries.iter().flat_map(|&(r, c, _)| [r, c]).collect();
                    cols.sort_unstable();
                    cols.dedup();
                    cols
                })
                .collect()
        })
        .collect();

    let bnorm = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = p.blocks.iter().map(|blk| inner(&blk.c, &blk.c)).sum::<f64>().sqrt();

    let mut x: Vec<Mat<f64>> = Vec::new();
    let mut z: Vec<Mat<f64>> = Vec::new();
    for blk in &p.blocks {
        let n = blk.n as f64;
        let mut xi = 10.0f64.max(n.sqrt());
        let mut amax = 0.0f64;
        for (j, entries) in &blk.terms {
            let an = term_norm(entries);
            amax = amax.max(an);
            xi = xi.max(n * (1.0 + p.b[*j].abs()) / (1.0 + an));
        }
        let eta = 10.0f64.max(n.sqrt()).max((1.0 + amax.max(fro(&blk.c))) / n.sqrt());
        x.push(Mat::<f64>::identity(blk.n, blk.n) * xi);
        z.push(Mat::<f64>::identity(blk.n, blk.n) * eta);
    }
    let mut y = vec![0.0; p.m];
    let ntot = p.ntot() as f64;

    let mut best: Option<(f64, IpmOutcome)> = None;
    let mut stall = 0usize;

    for iter in 0..s.max_iters {
        let ax = p.op_a(&x);
        let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = p.op_at(&y);
        let rd: Vec<Mat<f64>> = p
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, blk)| &blk.c - &z[bi] - &aty[bi])
            .collect();
        let pobj: f64 = p.blocks.iter().zip(&x).map(|(blk, xb)| inner(&blk.c, xb)).sum();
        let dobj: f64 = p.b.iter().zip(&y).map(|(b, v)| b * v).sum();
        let xz: f64 = x.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
        let mu = xz / ntot;
        let rel_gap = (pobj - dobj).abs().max(xz) / (1.0 + pobj.abs() + dobj.abs());
        let rpnorm = rp.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rdnorm = rd.iter().map(|m| inner(m, m)).sum::<f64>().sqrt();
        let pinf = rpnorm / (1.0 + bnorm);
        let dinf = rdnorm / (1.0 + cnorm);

        let merit = rel_gap.max(pinf).max(dinf);
        let snapshot = |status| IpmOutcome {
            status,
            y: y.clone(),
            x: x.clone(),
            pobj,
            rel_gap,
            iterations: iter,
        };
        log::trace!("ipm {iter}: pobj {pobj:.10e} dobj {dobj:.10e} gap {rel_gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e}");
        if rel_gap <= s.gap_tol && pinf <= s.feas_tol && dinf <= s.feas_tol {
            return snapshot(IpmStatus::Optimal);
        }
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, snapshot(IpmStatus::Stalled)));
        }
        // Certificates of infeasibility of (D) or of (P).
        if pobj < 0.0 {
            let axnorm = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            if axnorm / (-pobj) < s.infeas_tol && dinf > s.feas_tol {
                return snapshot(IpmStatus::DualInfeasible);
            }
        }
        if dobj > 0.0 {
            let cr: f64 = p
                .blocks
                .iter()
                .zip(&rd)
                .map(|(blk, r)| {
                    let d = &blk.c - r;
                    inner(&d, &d)
                })
                .sum::<f64>()
                .sqrt();
            if cr / dobj < s.infeas_tol && pinf > s.feas_tol {
                return snapshot(IpmStatus::PrimalInfeasible);
            }
        }

        let mut zinv = Vec::with_capacity(z.len());
        for zb in &z {
            match zb.llt(Side::Lower) {
                Ok(l) => zinv.push(sym_of(l.inverse())),
                Err(_) => return best.map(|b| b.1).unwrap_or_else(|| snapshot(IpmStatus::Stalled)),
            }
        }
        let schur = p.schur(&x, &zinv, &supports);
        let Some(llt) = factor_schur(&schur) else {
            log::debug!("ipm: Schur complement factorization failed at iteration {iter}");
            return best.map(|b| b.1).unwrap_or_else(|| snapshot(IpmStatus::Stalled));
        };

        // G = X Rd Z⁻¹ is shared by predictor and corrector.
        let g: Vec<Mat<f64>> = (0..x.len()).map(|bi| &(&x[bi] * &rd[bi]) * &zinv[bi]).collect();
        let ag = p.op_a(&g);

        let direction = |h: &[Mat<f64>], ah: &[f64]| {
            let rhs: Vec<f64> = (0..p.m).map(|j| rp[j] - ah[j] + ag[j]).collect();
            let dy = solve_vec(&llt, &rhs);
            let atdy = p.op_at(&dy);
            let dz: Vec<Mat<f64>> = (0..x.len()).map(|bi| &rd[bi] - &atdy[bi]).collect();
            let dx: Vec<Mat<f64>> = (0..x.len())
                .map(|bi| sym_of(&h[bi] - &(&(&x[bi] * &dz[bi]) * &zinv[bi])))
                .collect();
            (dx, dy, dz)
        };

        // Predictor: H = −X.
        let hp: Vec<Mat<f64>> = x.iter().map(|xb| -xb).collect();
        let ahp = p.op_a(&hp);
        let (dxp, _dyp, dzp) = direction(&hp, &ahp);
        let ap = x.iter().zip(&dxp).map(|(a, d)| max_step(a, d)).fold(f64::INFINITY, f64::min).min(1.0);
        let ad = z.iter().zip(&dzp).map(|(a, d)| max_step(a, d)).fold(f64::INFINITY, f64::min).min(1.0);
        let xz_pred: f64 = (0..x.len())
            .map(|bi| inner(&(&x[bi] + &dxp[bi] * ap), &(&z[bi] + &dzp[bi] * ad)))
            .sum();
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = (xz_pred / xz).max(0.0).powf(expon).min(1.0);

        // Corrector: H = σμZ⁻¹ − X − sym(ΔXp ΔZp Z⁻¹).
        let hc: Vec<Mat<f64>> = (0..x.len())
            .map(|bi| {
                let second = sym_of(&(&dxp[bi] * &dzp[bi]) * &zinv[bi]);
                &(&zinv[bi] * (sigma * mu) - &x[bi]) - &second
            })
            .collect();
        let ahc = p.op_a(&hc);
        let (dx, dy, dz) = direction(&hc, &ahc);
        let apmax = x.iter().zip(&dx).map(|(a, d)| max_step(a, d)).fold(f64::INFINITY, f64::min);
        let admax = z.iter().zip(&dz).map(|(a, d)| max_step(a, d)).fold(f64::INFINITY, f64::min);
        let gamma = 0.9 + 0.09 * apmax.min(admax).min(1.0);
        let ap = (gamma * apmax).min(1.0);
        let ad = (gamma * admax).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
            if stall > 3 {
                return best.map(|b| b.1).unwrap_or_else(|| snapshot(IpmStatus::Stalled));
            }
        } else {
            stall = 0;
        }
        for bi in 0..x.len() {
            x[bi] = sym_of(&x[bi] + &dx[bi] * ap);
            z[bi] = sym_of(&z[bi] + &dz[bi] * ad);
        }
        for (yj, d) in y.iter_mut().zip(&dy) {
            *yj += ad * d;
        }
    }
    best.map(|b| b.1).expect("at least one iteration")
}
