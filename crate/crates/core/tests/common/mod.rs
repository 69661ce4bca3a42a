#![allow(dead_code)]

use combqfi::comb::{CombFamily, Differentiability, EnsembleDecomposition, ExplicitFamily, ToothStructure};
use combqfi::tensor::{CMat, LabeledOperator, LabeledVector, SpaceLabel, ZERO};
use combqfi::Result;
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn qubit_ports(n: usize) -> Vec<SpaceLabel> {
    ToothStructure::qubits(n).spaces()
}

/// Choi vector of a single-qubit Kraus operator on ports (1, 2):
/// component `(m_in, m_out)` is `K[m_out, m_in]`.
pub fn choi_vector(k: &CMat) -> LabeledVector {
    let d = k.nrows();
    LabeledVector::new(qubit_ports(1), (0..d * d).map(|x| k[(x % d, x / d)]).collect()).unwrap()
}

/// `|C⟩ = |00⟩ + e^{−iθt}|11⟩` and its θ-derivative.
pub fn phase_ensemble(theta: f64, t: f64) -> EnsembleDecomposition {
    let ph = c64::from_polar(1.0, -theta * t);
    let v = LabeledVector::new(qubit_ports(1), vec![c(1.0, 0.0), ZERO, ZERO, ph]).unwrap();
    let d = LabeledVector::new(qubit_ports(1), vec![ZERO, ZERO, ZERO, ph * c(0.0, -t)]).unwrap();
    EnsembleDecomposition::new(qubit_ports(1), vec![v], Some(vec![d])).unwrap()
}

pub fn phase_family(t: f64) -> impl CombFamily {
    ExplicitFamily {
        structure: ToothStructure::qubits(1),
        differentiability: Differentiability::Analytic,
        domain: (0.0, 1.0),
        builder: move |theta| Ok(phase_ensemble(theta, t)),
    }
}

pub fn random_complex(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMat {
    Mat::from_fn(r, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = random_complex(rng, n, n);
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Orthonormal columns by Gram–Schmidt.
pub fn random_isometry(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let mut m = random_complex(rng, rows, cols);
    for k in 0..cols {
        for j in 0..k {
            let p: c64 = (0..rows).map(|i| m[(i, j)].conj() * m[(i, k)]).sum();
            for i in 0..rows {
                let v = m[(i, j)];
                m[(i, k)] -= p * v;
            }
        }
        let n = (0..rows).map(|i| m[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..rows {
            m[(i, k)] /= c(n, 0.0);
        }
    }
    m
}

/// Random qubit channel with `q` Kraus operators `K_i(θ) = A_i e^{−iθG}`,
/// evaluated at θ = 0 with derivatives `−i A_i G`.
pub fn random_channel(seed: u64, q: usize) -> EnsembleDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_isometry(&mut rng, 2 * q, 2);
    let g = random_hermitian(&mut rng, 2);
    let mut vs = Vec::new();
    let mut ds = Vec::new();
    for i in 0..q {
        let a = Mat::<c64>::from_fn(2, 2, |r, k| v[(2 * i + r, k)]);
        let da = &a * &g;
        let da = Mat::<c64>::from_fn(2, 2, |r, k| da[(r, k)] * c(0.0, -1.0));
        vs.push(choi_vector(&a));
        ds.push(choi_vector(&da));
    }
    EnsembleDecomposition::new(qubit_ports(1), vs, Some(ds)).unwrap()
}

pub fn fixed_family(ens: EnsembleDecomposition, structure: ToothStructure) -> impl CombFamily {
    ExplicitFamily {
        structure,
        differentiability: Differentiability::Analytic,
        domain: (0.0, 0.0),
        builder: move |_| -> Result<EnsembleDecomposition> { Ok(ens.clone()) },
    }
}

pub fn op_from_rows(spaces: Vec<SpaceLabel>, rows: &[&[c64]]) -> LabeledOperator {
    let n = rows.len();
    LabeledOperator::new(spaces, Mat::from_fn(n, n, |r, k| rows[r][k])).unwrap()
}
