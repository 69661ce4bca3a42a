//! Collision models for frequency estimation: a qubit system with
//! `H = ω|1⟩⟨1|` that repeatedly collides with a qubit environment.
//!
//! Two-qubit operators act on E ⊗ S (environment first). The estimated
//! parameter θ is ω.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};

use crate::channel::product_ensemble;
use crate::comb::{CombFamily, Differentiability, EnsembleDecomposition, ToothStructure};
use crate::error::{Error, Result};
use crate::tensor::{CMat, LabeledOperator, LabeledVector, SpaceLabel, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InteractionKind {
    PartialSwap,
    /// Partial CNOT controlled by the environment, in the rotated basis
    /// that starts the environment in |+⟩.
    PartialCnotEnvControl,
    PartialCnotSysControl,
    /// `e^{−igτ X⊗X}` with a maximally mixed environment.
    BitflipXX,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 4] = [
        InteractionKind::PartialSwap,
        InteractionKind::PartialCnotEnvControl,
        InteractionKind::PartialCnotSysControl,
        InteractionKind::BitflipXX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InteractionKind::PartialSwap => "swap",
            InteractionKind::PartialCnotEnvControl => "cnot-env",
            InteractionKind::PartialCnotSysControl => "cnot-sys",
            InteractionKind::BitflipXX => "bitflip",
        }
    }

    /// Involutive generator G with `U_int(τ) = e^{−igτG}`, on E ⊗ S.
    fn generator(self) -> CMat {
        let perm: [usize; 4] = match self {
            InteractionKind::PartialSwap => [0, 2, 1, 3],
            InteractionKind::PartialCnotEnvControl => [0, 1, 3, 2],
            InteractionKind::PartialCnotSysControl => [0, 3, 2, 1],
            InteractionKind::BitflipXX => [3, 2, 1, 0],
        };
        Mat::from_fn(4, 4, |r, c| if perm[c] == r { ONE } else { ZERO })
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InteractionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Structure(format!("unknown interaction '{s}' (expected swap, cnot-env, cnot-sys or bitflip)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    NonMarkovControl,
    NonMarkovFree,
    MarkovControl,
    MarkovFree,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::NonMarkovControl, Scenario::NonMarkovFree, Scenario::MarkovControl, Scenario::MarkovFree];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NonMarkovControl => "nm-control",
            Scenario::NonMarkovFree => "nm-free",
            Scenario::MarkovControl => "m-control",
            Scenario::MarkovFree => "m-free",
        }
    }

    /// Whether the experimenter may act between collisions.
    pub fn has_control(self) -> bool {
        matches!(self, Scenario::NonMarkovControl | Scenario::MarkovControl)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Structure(format!("unknown scenario '{s}' (expected nm-control, nm-free, m-control or m-free)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvInit {
    Ground,
    MaximallyMixed,
}

impl EnvInit {
    pub fn default_for(kind: InteractionKind) -> Self {
        match kind {
            InteractionKind::BitflipXX => EnvInit::MaximallyMixed,
            _ => EnvInit::Ground,
        }
    }

    /// `(basis state, amplitude weight)` branches of the initial state.
    pub(crate) fn branches(self) -> Vec<(usize, f64)> {
        match self {
            EnvInit::Ground => vec![(0, 1.0)],
            EnvInit::MaximallyMixed => vec![(0, FRAC_1_SQRT_2), (1, FRAC_1_SQRT_2)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTask {
    pub omega: f64,
    pub g: f64,
    pub n: usize,
    /// Free evolution time per step.
    pub t: f64,
    /// Interaction time per step.
    pub tau: f64,
    /// `None` selects the interaction's default.
    pub env_init: Option<EnvInit>,
    /// Interval of ω over which the comb rank is checked.
    pub omega_domain: (f64, f64),
}

impl FrequencyTask {
    /// `t = τ = t_tot / N`.
    pub fn uniform(omega: f64, g: f64, n: usize, t_tot: f64) -> Self {
        let step = if n == 0 { 0.0 } else { t_tot / n as f64 };
        Self { omega, g, n, t: step, tau: step, env_init: None, omega_domain: (0.0, 2.0 * PI) }
    }

    pub fn t_tot(&self) -> f64 {
        self.t * self.n as f64
    }

    pub fn env_init_for(&self, kind: InteractionKind) -> EnvInit {
        self.env_init.unwrap_or_else(|| EnvInit::default_for(kind))
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("a collision model needs at least one step".into()));
        }
        for (name, v) in [("omega", self.omega), ("g", self.g), ("t", self.t), ("tau", self.tau)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if self.t < 0.0 || self.tau < 0.0 {
            return Err(Error::Domain("times must be nonnegative".into()));
        }
        Ok(())
    }
}

fn es_spaces() -> Vec<SpaceLabel> {
    vec![SpaceLabel::env(2), SpaceLabel::named("S", 2)]
}

pub(crate) fn step_matrices(k: InteractionKind, g: f64, tau: f64, omega: f64, t: f64) -> (CMat, CMat) {
    let (c, s) = ((g * tau).cos(), (g * tau).sin());
    let gen = k.generator();
    let uint = Mat::<c64>::from_fn(4, 4, |r, col| gen[(r, col)] * c64::new(0.0, -s) + if r == col { c64::new(c, 0.0) } else { ZERO });
    let phase = c64::from_polar(1.0, -omega * t);
    // Columns with S = |1⟩ pick up the phase.
    let u = Mat::<c64>::from_fn(4, 4, |r, col| if col % 2 == 1 { uint[(r, col)] * phase } else { uint[(r, col)] });
    let du = Mat::<c64>::from_fn(4, 4, |r, col| if col % 2 == 1 { uint[(r, col)] * phase * (-I * t) } else { ZERO });
    if k == InteractionKind::PartialCnotEnvControl {
        // Conjugation by Hadamard on E commutes with the phase.
        let h = FRAC_1_SQRT_2;
        let hb = Mat::<c64>::from_fn(4, 4, |r, col| {
            if r % 2 != col % 2 {
                ZERO
            } else if r / 2 == 1 && col / 2 == 1 {
                c64::new(-h, 0.0)
            } else {
                c64::new(h, 0.0)
            }
        });
        return (&hb * &u * &hb, &hb * &du * &hb);
    }
    (u, du)
}

/// One collision step `U = U_int(τ)(1_E ⊗ e^{−iωt|1⟩⟨1|})` on E ⊗ S.
pub fn step_unitary(k: InteractionKind, g: f64, tau: f64, omega: f64, t: f64) -> Result<LabeledOperator> {
    if ![g, tau, omega, t].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("step parameters must be finite".into()));
    }
    LabeledOperator::new(es_spaces(), step_matrices(k, g, tau, omega, t).0)
}

/// `∂U/∂ω` of [`step_unitary`].
pub fn step_unitary_derivative(k: InteractionKind, g: f64, tau: f64, omega: f64, t: f64) -> Result<LabeledOperator> {
    if ![g, tau, omega, t].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("step parameters must be finite".into()));
    }
    LabeledOperator::new(es_spaces(), step_matrices(k, g, tau, omega, t).1)
}

/// Collision-model comb family with analytic ω-derivatives.
#[derive(Clone, Debug)]
pub struct CollisionFamily {
    pub scenario: Scenario,
    pub kind: InteractionKind,
    pub task: FrequencyTask,
}

pub fn build_comb_family(scenario: Scenario, kind: InteractionKind, task: FrequencyTask) -> Result<CollisionFamily> {
    task.check()?;
    Ok(CollisionFamily { scenario, kind, task })
}

/// Choi vector of a system operator K (output × input): component
/// `(m_in, m_out)` is `K[m_out, m_in]`.
fn choi_vector(spaces: Vec<SpaceLabel>, k: &CMat) -> LabeledVector {
    let d = k.nrows();
    LabeledVector::new(spaces, (0..k.ncols() * d).map(|x| k[(x % d, x / d)]).collect()).expect("length matches")
}

/// Environment block `⟨e'|U|e⟩` as a system operator.
fn env_block(u: &CMat, e_out: usize, e_in: usize) -> CMat {
    Mat::from_fn(2, 2, |so, si| u[(e_out * 2 + so, e_in * 2 + si)])
}

impl CollisionFamily {
    fn structure_teeth(&self) -> usize {
        if self.scenario.has_control() {
            self.task.n
        } else {
            1
        }
    }

    /// Single-step channel ensemble on ports (1, 2): vectors
    /// `vec(⟨i|U|e0⟩)` weighted by the initial-state branch.
    fn single_step(&self, omega: f64) -> Result<EnsembleDecomposition> {
        let (u, du) = step_matrices(self.kind, self.task.g, self.task.tau, omega, self.task.t);
        let spaces = ToothStructure::qubits(1).spaces();
        let mut vs = Vec::new();
        let mut ds = Vec::new();
        for (e0, w) in self.task.env_init_for(self.kind).branches() {
            for i in 0..2 {
                let k = env_block(&u, i, e0);
                let dk = env_block(&du, i, e0);
                vs.push(choi_vector(spaces.clone(), &k).scale(c64::new(w, 0.0)));
                ds.push(choi_vector(spaces.clone(), &dk).scale(c64::new(w, 0.0)));
            }
        }
        EnsembleDecomposition::new(spaces, vs, Some(ds))
    }

    fn nm_control(&self, omega: f64) -> Result<EnsembleDecomposition> {
        let (u, du) = step_matrices(self.kind, self.task.g, self.task.tau, omega, self.task.t);
        let n = self.task.n;
        let spaces = ToothStructure::qubits(n).spaces();
        let mut vs = Vec::new();
        let mut ds = Vec::new();
        for (e0, w) in self.task.env_init_for(self.kind).branches() {
            // Per prefix (m1…m2k): environment vector and its derivative.
            let mut val: Vec<[c64; 2]> = vec![[ZERO; 2]];
            let mut der: Vec<[c64; 2]> = vec![[ZERO; 2]];
            val[0][e0] = c64::new(w, 0.0);
            for _ in 0..n {
                let mut nv = Vec::with_capacity(val.len() * 4);
                let mut nd = Vec::with_capacity(val.len() * 4);
                for (x, dx) in val.iter().zip(&der) {
                    for mi in 0..2 {
                        for mo in 0..2 {
                            let mut a = [ZERO; 2];
                            let mut b = [ZERO; 2];
                            for eo in 0..2 {
                                for ei in 0..2 {
                                    let uu = u[(eo * 2 + mo, ei * 2 + mi)];
                                    let dd = du[(eo * 2 + mo, ei * 2 + mi)];
                                    a[eo] += uu * x[ei];
                                    b[eo] += dd * x[ei] + uu * dx[ei];
                                }
                            }
                            nv.push(a);
                            nd.push(b);
                        }
                    }
                }
                val = nv;
                der = nd;
            }
            for i in 0..2 {
                vs.push(LabeledVector::new(spaces.clone(), val.iter().map(|v| v[i]).collect())?);
                ds.push(LabeledVector::new(spaces.clone(), der.iter().map(|v| v[i]).collect())?);
            }
        }
        EnsembleDecomposition::new(spaces, vs, Some(ds))
    }

    fn nm_free(&self, omega: f64) -> Result<EnsembleDecomposition> {
        let (u, du) = step_matrices(self.kind, self.task.g, self.task.tau, omega, self.task.t);
        // U^N and its derivative Σ_k U^{N−1−k} U̇ U^k.
        let mut p = Mat::<c64>::identity(4, 4);
        let mut dp = Mat::<c64>::zeros(4, 4);
        for _ in 0..self.task.n {
            dp = &du * &p + &u * &dp;
            p = &u * &p;
        }
        let spaces = ToothStructure::qubits(1).spaces();
        let mut vs = Vec::new();
        let mut ds = Vec::new();
        for (e0, w) in self.task.env_init_for(self.kind).branches() {
            for i in 0..2 {
                vs.push(choi_vector(spaces.clone(), &env_block(&p, i, e0)).scale(c64::new(w, 0.0)));
                ds.push(choi_vector(spaces.clone(), &env_block(&dp, i, e0)).scale(c64::new(w, 0.0)));
            }
        }
        EnsembleDecomposition::new(spaces, vs, Some(ds))
    }

    fn m_free(&self, omega: f64) -> Result<EnsembleDecomposition> {
        let (u, du) = step_matrices(self.kind, self.task.g, self.task.tau, omega, self.task.t);
        let mut kraus: Vec<(CMat, CMat)> = Vec::new();
        for (e0, w) in self.task.env_init_for(self.kind).branches() {
            for i in 0..2 {
                let k = env_block(&u, i, e0);
                let dk = env_block(&du, i, e0);
                kraus.push((
                    Mat::from_fn(2, 2, |r, c| k[(r, c)] * w),
                    Mat::from_fn(2, 2, |r, c| dk[(r, c)] * w),
                ));
            }
        }
        // Products K_{i_N}···K_{i_1} over all index strings, i_1 slowest.
        let mut prods: Vec<(CMat, CMat)> = vec![(Mat::identity(2, 2), Mat::zeros(2, 2))];
        for _ in 0..self.task.n {
            let mut next = Vec::with_capacity(prods.len() * kraus.len());
            for (p, dp) in &prods {
                for (k, dk) in &kraus {
                    next.push((k * p, dk * p + k * dp));
                }
            }
            prods = next;
        }
        let spaces = ToothStructure::qubits(1).spaces();
        let vs = prods.iter().map(|(p, _)| choi_vector(spaces.clone(), p)).collect();
        let ds = prods.iter().map(|(_, dp)| choi_vector(spaces.clone(), dp)).collect();
        EnsembleDecomposition::new(spaces, vs, Some(ds))
    }
}

impl CombFamily for CollisionFamily {
    fn structure(&self) -> ToothStructure {
        ToothStructure::qubits(self.structure_teeth())
    }

    fn differentiability(&self) -> Differentiability {
        Differentiability::Analytic
    }

    fn domain(&self) -> (f64, f64) {
        self.task.omega_domain
    }

    fn ensemble(&self, omega: f64) -> Result<EnsembleDecomposition> {
        match self.scenario {
            Scenario::NonMarkovControl => self.nm_control(omega),
            Scenario::NonMarkovFree => self.nm_free(omega),
            Scenario::MarkovControl => product_ensemble(&self.single_step(omega)?, self.task.n),
            Scenario::MarkovFree => self.m_free(omega),
        }
    }
}
