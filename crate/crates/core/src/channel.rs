//! Adaptive estimation of N uses of a channel, viewed as the tensor-power
//! comb `E_θ^{⊗N}`.

use faer::c64;

use crate::comb::{
    performance_operator, CombFamily, Differentiability, EnsembleDecomposition, GaugeMatrix, PerformanceOperator,
    ToothStructure,
};
use crate::error::{Error, Result};
use crate::qfi::{comb_qfi_dual, QfiOptions, QfiResult};
use crate::tensor::{LabeledOperator, LabeledVector, SpaceId};

/// Largest number of channel uses accepted by [`adaptive_channel_qfi`].
pub const MAX_COPIES: usize = 4;

fn check_single_tooth(e: &EnsembleDecomposition) -> Result<()> {
    if e.spaces().len() != 2 {
        return Err(Error::Structure(format!(
            "channel ensemble must live on one (input, output) pair, got {} spaces",
            e.spaces().len()
        )));
    }
    Ok(())
}

fn relabel(v: &LabeledVector, spaces: &[crate::tensor::SpaceLabel]) -> LabeledVector {
    LabeledVector::new(spaces.to_vec(), v.entries().to_vec()).expect("same dimensions")
}

/// Product ensemble `|C_{(i_1…i_N)}⟩ = ⊗_k |E_{i_k}⟩` on ports 1..2N, with
/// derivatives by the product rule when the channel has them.
pub fn product_ensemble(e: &EnsembleDecomposition, n: usize) -> Result<EnsembleDecomposition> {
    check_single_tooth(e)?;
    if n == 0 {
        return Err(Error::Domain("need at least one copy".into()));
    }
    let (din, dout) = (e.spaces()[0].dim, e.spaces()[1].dim);
    let s = ToothStructure::canonical(&vec![(din, dout); n]);
    let spaces = s.spaces();
    let mut vals: Vec<LabeledVector> = Vec::new();
    let mut ders: Vec<LabeledVector> = Vec::new();
    let has_der = e.derivatives().is_some();
    for k in 0..n {
        let tooth = &spaces[2 * k..2 * k + 2];
        let ev: Vec<_> = e.vectors().iter().map(|v| relabel(v, tooth)).collect();
        let ed: Vec<_> = e.derivatives().unwrap_or(&[]).iter().map(|v| relabel(v, tooth)).collect();
        if k == 0 {
            vals = ev;
            ders = ed;
            continue;
        }
        let mut nv = Vec::with_capacity(vals.len() * ev.len());
        let mut nd = Vec::with_capacity(vals.len() * ev.len());
        for (a, x) in vals.iter().enumerate() {
            for (b, y) in ev.iter().enumerate() {
                nv.push(x.tensor(y)?);
                if has_der {
                    let mut d = ders[a].tensor(y)?;
                    d.axpy(c64::new(1.0, 0.0), &x.tensor(&ed[b])?);
                    nd.push(d);
                }
            }
        }
        vals = nv;
        ders = nd;
    }
    EnsembleDecomposition::new(spaces, vals, if has_der { Some(ders) } else { None })
}

fn relabel_op(op: &LabeledOperator, k: usize, din: usize, dout: usize) -> Result<LabeledOperator> {
    let s = ToothStructure::canonical(&vec![(din, dout); k + 1]).spaces();
    LabeledOperator::new(s[2 * k..2 * k + 2].to_vec(), op.matrix().clone())
}

/// Untransposed `4 Σ_i |Ċ_i⟩⟨Ċ_i|` of the N-fold product assembled from the
/// channel primitives `4Σ|Ė⟩⟨Ė|`, `2Σ|Ė⟩⟨E|`, `2Σ|E⟩⟨Ė|` and `E`.
fn n_copy_sum(e: &EnsembleDecomposition, n: usize) -> Result<LabeledOperator> {
    let ed = e.derivatives().ok_or_else(|| Error::Structure("channel ensemble has no derivatives".into()))?;
    let sp = e.spaces().to_vec();
    let (din, dout) = (sp[0].dim, sp[1].dim);
    let omega0 = LabeledOperator::sum_of_outer(sp.clone(), ed, ed)?.scale_real(4.0);
    let de = LabeledOperator::sum_of_outer(sp.clone(), ed, e.vectors())?.scale_real(2.0);
    let e_de = de.adjoint();
    let choi = e.operator();
    let s = ToothStructure::canonical(&vec![(din, dout); n]);
    let mut total = LabeledOperator::zeros(s.spaces())?;
    // Factor at each slot: 0 = E, 1 = Ω, 2 = (ĖE), 3 = (EĖ).
    let mut patterns: Vec<Vec<u8>> = Vec::new();
    for p in 0..n {
        let mut v = vec![0u8; n];
        v[p] = 1;
        patterns.push(v);
        for q in p + 1..n {
            let mut a = vec![0u8; n];
            a[p] = 2;
            a[q] = 3;
            patterns.push(a);
            let mut b = vec![0u8; n];
            b[p] = 3;
            b[q] = 2;
            patterns.push(b);
        }
    }
    for pat in patterns {
        let mut term: Option<LabeledOperator> = None;
        for (k, &f) in pat.iter().enumerate() {
            let factor = match f {
                0 => &choi,
                1 => &omega0,
                2 => &de,
                _ => &e_de,
            };
            let factor = relabel_op(factor, k, din, dout)?;
            term = Some(match term {
                None => factor,
                Some(t) => t.tensor(&factor)?,
            });
        }
        total = total.add(&term.expect("n ≥ 1"))?;
    }
    Ok(total)
}

/// Performance operator of `E_θ^{⊗N}`. At h = 0 it is assembled from the
/// single-channel primitives; otherwise from the product ensemble, whose
/// index set the gauge must cover.
pub fn n_copy_performance_operator(
    e: &EnsembleDecomposition,
    n: usize,
    h: &GaugeMatrix,
) -> Result<PerformanceOperator> {
    check_single_tooth(e)?;
    if n == 0 {
        return Err(Error::Domain("need at least one copy".into()));
    }
    let q = e.q().pow(n as u32);
    if h.dim() != q {
        return Err(Error::Structure(format!("gauge is {}×{} but the product ensemble has {q} vectors", h.dim(), h.dim())));
    }
    let (din, dout) = (e.spaces()[0].dim, e.spaces()[1].dim);
    let s = ToothStructure::canonical(&vec![(din, dout); n]);
    if h.matrix().norm_max() == 0.0 {
        let sum = n_copy_sum(e, n)?;
        let transposed: Vec<SpaceId> = s.probe_spaces().into_iter().map(|l| l.id).collect();
        return Ok(PerformanceOperator { op: sum.partial_transpose(&transposed)?, gauge: h.clone() });
    }
    performance_operator(&product_ensemble(e, n)?, h, &s)
}

/// `E_θ^{⊗N}` as a comb family.
pub struct TensorPowerFamily<F> {
    pub channel: F,
    pub n: usize,
}

impl<F: CombFamily> TensorPowerFamily<F> {
    pub fn new(channel: F, n: usize) -> Result<Self> {
        if channel.structure().n_teeth() != 1 {
            return Err(Error::Structure("tensor powers need a one-tooth channel family".into()));
        }
        if n == 0 {
            return Err(Error::Domain("need at least one copy".into()));
        }
        Ok(Self { channel, n })
    }
}

impl<F: CombFamily> CombFamily for TensorPowerFamily<F> {
    fn structure(&self) -> ToothStructure {
        let s = self.channel.structure();
        let (i, o) = &s.teeth()[0];
        ToothStructure::canonical(&vec![(i.dim, o.dim); self.n])
    }

    fn differentiability(&self) -> Differentiability {
        self.channel.differentiability()
    }

    fn domain(&self) -> (f64, f64) {
        self.channel.domain()
    }

    fn ensemble(&self, theta: f64) -> Result<EnsembleDecomposition> {
        product_ensemble(&self.channel.ensemble(theta)?, self.n)
    }
}

/// QFI of the optimal adaptive strategy with N uses of the channel.
pub fn adaptive_channel_qfi<F: CombFamily>(channel: F, n: usize, theta: f64, opts: &QfiOptions) -> Result<QfiResult> {
    if n > MAX_COPIES {
        return Err(Error::Domain(format!(
            "{n} channel uses requested; exact evaluation is limited to N ≤ {MAX_COPIES}"
        )));
    }
    let fam = TensorPowerFamily::new(channel, n)?;
    comb_qfi_dual(&fam, theta, opts)
}
