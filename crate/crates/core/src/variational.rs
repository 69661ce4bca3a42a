//! Checkerboard variational probe: two-qubit layers on (system, ancilla)
//! interleaved with collision steps, followed by a computational-basis
//! measurement of (S, aux). The environment persists between steps.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collision::{step_matrices, FrequencyTask, InteractionKind};
use crate::error::{Error, Result};
use crate::tensor::{CMat, LabeledOperator, SpaceLabel, ONE, ZERO};

/// Probabilities at or below this are dropped from the Fisher sum.
pub const FISHER_EPS: f64 = 1e-12;

pub const PARAMS_PER_LAYER: usize = 5;

/// Angles of the N+1 layers, five per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzParams {
    phi: Vec<f64>,
}

impl AnsatzParams {
    pub fn new(n: usize, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != PARAMS_PER_LAYER * (n + 1) {
            return Err(Error::Structure(format!(
                "{} steps need {} angles, got {}",
                n,
                PARAMS_PER_LAYER * (n + 1),
                phi.len()
            )));
        }
        Ok(Self { phi })
    }

    pub fn zeros(n: usize) -> Self {
        Self { phi: vec![0.0; PARAMS_PER_LAYER * (n + 1)] }
    }

    pub fn n_steps(&self) -> usize {
        self.phi.len() / PARAMS_PER_LAYER - 1
    }

    pub fn layer(&self, i: usize) -> &[f64] {
        &self.phi[PARAMS_PER_LAYER * i..PARAMS_PER_LAYER * (i + 1)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phi
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    /// Probabilities of the outcomes `(s, a)`, index `2s + a`.
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
}

fn rot(theta: f64, x: bool) -> CMat {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    if x {
        Mat::from_fn(2, 2, |r, k| if r == k { c64::new(c, 0.0) } else { c64::new(0.0, -s) })
    } else {
        Mat::from_fn(2, 2, |r, k| match (r, k) {
            (0, 0) => c64::new(c, -s),
            (1, 1) => c64::new(c, s),
            _ => ZERO,
        })
    }
}

fn kron2(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(4, 4, |r, k| a[(r / 2, k / 2)] * b[(r % 2, k % 2)])
}

fn layer_matrix(phi: &[f64]) -> CMat {
    let rx = kron2(&rot(phi[0], true), &rot(phi[1], true));
    let (c, s) = ((phi[2] / 2.0).cos(), (phi[2] / 2.0).sin());
    // Z⊗Z eigenvalue +1 on |00⟩, |11⟩.
    let zz = Mat::<c64>::from_fn(4, 4, |r, k| {
        if r != k {
            ZERO
        } else if r == 0 || r == 3 {
            c64::new(c, -s)
        } else {
            c64::new(c, s)
        }
    });
    let rz = kron2(&rot(phi[3], false), &rot(phi[4], false));
    &rz * &zz * &rx
}

/// `R_Z(φ₄)⊗R_Z(φ₅) · R_ZZ(φ₃) · R_X(φ₁)⊗R_X(φ₂)` on (S, aux), with
/// `R_σ(φ) = exp(−iφσ/2)`.
pub fn layer_unitary(phi: &[f64]) -> Result<LabeledOperator> {
    if phi.len() != PARAMS_PER_LAYER {
        return Err(Error::Structure(format!("a layer takes {PARAMS_PER_LAYER} angles, got {}", phi.len())));
    }
    LabeledOperator::new(vec![SpaceLabel::named("S", 2), SpaceLabel::aux(2)], layer_matrix(phi))
}

/// State on E ⊗ S ⊗ aux, index `4e + 2s + a`.
type State = [c64; 8];

fn apply_layer(u: &CMat, x: &State) -> State {
    let mut out = [ZERO; 8];
    for e in 0..2 {
        for r in 0..4 {
            out[4 * e + r] = (0..4).map(|k| u[(r, k)] * x[4 * e + k]).sum();
        }
    }
    out
}

fn apply_step(u: &CMat, x: &State) -> State {
    let mut out = [ZERO; 8];
    for a in 0..2 {
        for r in 0..4 {
            out[2 * r + a] = (0..4).map(|k| u[(r, k)] * x[2 * k + a]).sum();
        }
    }
    out
}

/// Outcome distribution on (S, aux) and its ω-derivative.
pub fn output_distribution(task: &FrequencyTask, kind: InteractionKind, params: &AnsatzParams) -> Result<OutcomeDistribution> {
    if params.n_steps() != task.n {
        return Err(Error::Structure(format!(
            "ansatz has {} steps but the task has {}",
            params.n_steps(),
            task.n
        )));
    }
    let (u, du) = step_matrices(kind, task.g, task.tau, task.omega, task.t);
    let layers: Vec<CMat> = (0..=task.n).map(|i| layer_matrix(params.layer(i))).collect();
    let mut p = vec![0.0; 4];
    let mut dp = vec![0.0; 4];
    for (e0, w) in task.env_init_for(kind).branches() {
        let mut x = [ZERO; 8];
        x[4 * e0] = ONE;
        let mut dx = [ZERO; 8];
        for i in 0..task.n {
            x = apply_layer(&layers[i], &x);
            dx = apply_layer(&layers[i], &dx);
            let d_new = apply_step(&u, &dx);
            let from_u = apply_step(&du, &x);
            x = apply_step(&u, &x);
            dx = std::array::from_fn(|k| d_new[k] + from_u[k]);
        }
        x = apply_layer(&layers[task.n], &x);
        dx = apply_layer(&layers[task.n], &dx);
        let weight = w * w;
        for e in 0..2 {
            for o in 0..4 {
                let (a, b) = (x[4 * e + o], dx[4 * e + o]);
                p[o] += weight * a.norm_sqr();
                dp[o] += weight * 2.0 * (a.conj() * b).re;
            }
        }
    }
    Ok(OutcomeDistribution { p, dp })
}

/// `Σ dp²/p` over outcomes with `p > FISHER_EPS`.
pub fn classical_fisher(d: &OutcomeDistribution) -> f64 {
    d.p.iter().zip(&d.dp).filter(|(p, _)| **p > FISHER_EPS).map(|(p, dp)| dp * dp / p).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 20, max_iters: 400, fd_step: 1e-5, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizedProbe {
    pub params: AnsatzParams,
    pub fisher: f64,
    /// Objective after every accepted step of the winning restart.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn fisher_at(task: &FrequencyTask, kind: InteractionKind, phi: &[f64]) -> f64 {
    let params = AnsatzParams { phi: phi.to_vec() };
    output_distribution(task, kind, &params).map(|d| classical_fisher(&d)).unwrap_or(0.0)
}

/// Central finite-difference gradient of the Fisher information.
pub fn fisher_gradient(task: &FrequencyTask, kind: InteractionKind, params: &AnsatzParams, step: f64) -> Vec<f64> {
    let mut phi = params.phi.clone();
    (0..phi.len())
        .map(|k| {
            let x0 = phi[k];
            phi[k] = x0 + step;
            let fp = fisher_at(task, kind, &phi);
            phi[k] = x0 - step;
            let fm = fisher_at(task, kind, &phi);
            phi[k] = x0;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

const ARMIJO: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-7;

fn ascend(task: &FrequencyTask, kind: InteractionKind, start: Vec<f64>, cfg: &OptimizerConfig) -> OptimizedProbe {
    let mut x = AnsatzParams { phi: start };
    let mut f = fisher_at(task, kind, &x.phi);
    let mut trace = vec![f];
    let mut alpha = 1.0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let g = fisher_gradient(task, kind, &x, cfg.fd_step);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2.sqrt() < GRAD_TOL * f.max(1.0) {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..40 {
            let cand: Vec<f64> = x.phi.iter().zip(&g).map(|(v, d)| v + a * d).collect();
            let fc = fisher_at(task, kind, &cand);
            if fc >= f + ARMIJO * a * g2 {
                x.phi = cand;
                f = fc;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        trace.push(f);
        alpha = (a * 2.0).min(1e3);
    }
    OptimizedProbe { params: x, fisher: f, trace, converged }
}

/// Gradient ascent with backtracking from `cfg.restarts` random starts.
/// Restart `i` draws its angles from ChaCha8 stream `i` under `cfg.seed`.
pub fn optimize_probe(task: &FrequencyTask, kind: InteractionKind, cfg: &OptimizerConfig) -> Result<OptimizedProbe> {
    if task.n == 0 {
        return Err(Error::Domain("the ansatz needs at least one step".into()));
    }
    if cfg.restarts == 0 || !(cfg.fd_step > 0.0) {
        return Err(Error::Domain("need at least one restart and a positive finite-difference step".into()));
    }
    let dim = PARAMS_PER_LAYER * (task.n + 1);
    let runs: Vec<OptimizedProbe> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let start: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            ascend(task, kind, start, cfg)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.fisher > a.fisher { b } else { a })
        .expect("restarts > 0");
    if !best.converged {
        log::warn!("variational ascent hit the iteration limit (F = {:.6e})", best.fisher);
    }
    Ok(best)
}
