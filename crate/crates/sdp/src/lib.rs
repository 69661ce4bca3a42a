//! Dense primal-dual interior-point solver for small linear semidefinite
//! programs with complex Hermitian cone constraints.
//!
//! Problems are stated over real scalar variables (Hermitian matrix
//! variables are a convenience layout of scalars). Equalities are
//! eliminated exactly before the interior-point phase, and complex cones
//! are embedded as real symmetric ones via [`realify`].

mod elim;
mod ipm;
mod problem;
mod realify;

use faer::{c64, Mat, Side};

pub use problem::{
    ComplexLin, Field, HermitianExpr, HermitianVar, LinExpr, ScalarVar, SdpProblem, SparseHermitian,
};
pub use realify::{derealify_matrix, realify, realify_matrix};

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Structure(String),
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Relative primal and dual residuals of the standard form.
    pub feas_tol: f64,
    /// Threshold on normalized infeasibility certificates.
    pub infeasibility_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, infeasibility_tol: 1e-8, max_iters: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Values of all declared scalars.
    pub y: Vec<f64>,
    /// Objective at `y` (an upper bound when `y` is feasible).
    pub objective: f64,
    /// Lower bound from the dual iterate.
    pub dual_objective: f64,
    /// Relative duality gap.
    pub gap: f64,
    /// Largest violation of an equality at `y`.
    pub equality_residual: f64,
    /// Largest negative eigenvalue (as a positive number) of any cone at `y`.
    pub cone_residual: f64,
    pub iterations: usize,
    /// Dual matrices `W_k` of the cones, with `tr(cone_k(y) W_k)` the
    /// complementarity pairing.
    pub multipliers: Vec<Mat<c64>>,
}

impl SdpSolution {
    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.y[v.0]
    }

    pub fn hermitian(&self, v: &HermitianVar) -> Mat<c64> {
        v.value(&self.y)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn failed(p: &SdpProblem, status: SolveStatus) -> Self {
        Self {
            status,
            y: vec![0.0; p.num_vars()],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            equality_residual: f64::NAN,
            cone_residual: f64::NAN,
            iterations: 0,
            multipliers: Vec::new(),
        }
    }
}

fn min_eigenvalue(m: &Mat<c64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.self_adjoint_eigenvalues(Side::Lower).ok().and_then(|v| v.first().copied()).unwrap_or(f64::NAN)
}

/// Solves `p` to the requested relative tolerances.
///
/// Infeasible and unbounded problems are reported through the status.
/// The result is a deterministic function of the problem.
pub fn solve_sdp(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    p.check()?;
    let n = p.num_vars();
    let red = match elim::eliminate(n, p.equalities(), opts.feas_tol) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("equalities inconsistent (residual {:.3e})", e.residual);
            return Ok(SdpSolution::failed(p, SolveStatus::Infeasible));
        }
    };
    let nf = red.num_free;

    let c = p.objective();
    let mut cz = vec![0.0; nf];
    let mut c0 = p.objective_constant();
    for v in 0..n {
        if c[v] != 0.0 {
            c0 += c[v] * red.y0[v];
            for &(j, k) in &red.map[v] {
                cz[j] += c[v] * k;
            }
        }
    }

    // Reduced cones over the free variables, realified.
    let mut reduced: Vec<(HermitianExpr, bool)> = Vec::new();
    let mut present = vec![false; nf];
    for cone in p.cones() {
        let mut r = HermitianExpr::new(cone.dim, cone.field);
        r.constant = cone.constant.clone();
        for (&v, a) in &cone.terms {
            if red.y0[v] != 0.0 {
                r.constant.add_scaled(a, red.y0[v]);
            }
            for &(j, k) in &red.map[v] {
                r.add_matrix(j, a, k);
            }
        }
        let scale = std::iter::once(&r.constant)
            .chain(r.terms.values())
            .flat_map(|m| m.entries().map(|e| e.2.norm()))
            .fold(1.0f64, f64::max);
        r.constant.prune(1e-15 * scale);
        for m in r.terms.values_mut() {
            m.prune(1e-15 * scale);
        }
        r.terms.retain(|_, m| !m.is_empty());
        for &j in r.terms.keys() {
            present[j] = true;
        }
        let complex = cone.field == Field::Complex;
        reduced.push((realify(&r)?, complex));
    }

    // Variables absent from every cone are either irrelevant or unbounded.
    let cscale = cz.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut ipm_index = vec![usize::MAX; nf];
    let mut m = 0;
    for j in 0..nf {
        if present[j] {
            ipm_index[j] = m;
            m += 1;
        } else if cz[j].abs() > 1e-13 * cscale {
            return Ok(SdpSolution::failed(p, SolveStatus::Unbounded));
        }
    }

    let mut b = vec![0.0; m];
    for j in 0..nf {
        if present[j] {
            b[ipm_index[j]] = -cz[j];
        }
    }
    let blocks: Vec<ipm::StdBlock> = reduced
        .iter()
        .map(|(r, _)| {
            let c = r.constant.to_dense();
            let c = Mat::<f64>::from_fn(r.dim, r.dim, |i, k| c[(i, k)].re);
            let terms = r
                .terms
                .iter()
                .map(|(&j, a)| (ipm_index[j], a.entries().map(|(rr, cc, z)| (rr, cc, -z.re)).collect()))
                .collect();
            ipm::StdBlock { n: r.dim, c, terms }
        })
        .collect();
    let std = ipm::StdProblem { m, b, blocks };
    let out = ipm::solve(
        &std,
        &ipm::IpmSettings {
            gap_tol: opts.gap_tol,
            feas_tol: opts.feas_tol,
            infeas_tol: opts.infeasibility_tol,
            max_iters: opts.max_iters,
        },
    );

    let mut y = red.y0.clone();
    for v in 0..n {
        for &(j, k) in &red.map[v] {
            if present[j] {
                y[v] += k * out.y[ipm_index[j]];
            }
        }
    }
    let status = match out.status {
        ipm::IpmStatus::Optimal => SolveStatus::Optimal,
        ipm::IpmStatus::DualInfeasible => SolveStatus::Infeasible,
        ipm::IpmStatus::PrimalInfeasible => SolveStatus::Unbounded,
        ipm::IpmStatus::Stalled => SolveStatus::NumericalFailure,
    };
    let objective = p.objective_constant() + c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
    let equality_residual = p.equalities().iter().map(|e| e.eval(&y).abs()).fold(0.0, f64::max);
    let cone_residual = p
        .cones()
        .iter()
        .map(|cone| (-min_eigenvalue(&cone.eval(&y))).max(0.0))
        .fold(0.0, f64::max);
    let multipliers = out
        .x
        .iter()
        .zip(&reduced)
        .map(|(xb, (_, complex))| {
            if *complex {
                let w = derealify_matrix(xb);
                Mat::<c64>::from_fn(w.nrows(), w.ncols(), |i, k| w[(i, k)] * 2.0)
            } else {
                Mat::<c64>::from_fn(xb.nrows(), xb.ncols(), |i, k| c64::new(xb[(i, k)], 0.0))
            }
        })
        .collect();
    Ok(SdpSolution {
        status,
        y,
        objective,
        dual_objective: c0 - out.pobj,
        gap: out.rel_gap,
        equality_residual,
        cone_residual,
        iterations: out.iterations,
        multipliers,
    })
}
