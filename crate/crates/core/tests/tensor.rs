use combqfi::tensor::*;
use faer::{c64, Mat};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

fn q(k: usize) -> SpaceLabel {
    SpaceLabel::port(k, 2)
}

fn op(spaces: Vec<SpaceLabel>, rows: &[&[c64]]) -> LabeledOperator {
    let n = rows.len();
    LabeledOperator::new(spaces, Mat::from_fn(n, n, |r, k| rows[r][k])).unwrap()
}

fn pauli(name: char, k: usize) -> LabeledOperator {
    let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
    match name {
        'I' => op(vec![q(k)], &[&[o, z], &[z, o]]),
        'X' => op(vec![q(k)], &[&[z, o], &[o, z]]),
        'Y' => op(vec![q(k)], &[&[z, c(0.0, -1.0)], &[c(0.0, 1.0), z]]),
        'Z' => op(vec![q(k)], &[&[o, z], &[z, -o]]),
        _ => unreachable!(),
    }
}

fn phi_plus_times_two() -> LabeledOperator {
    let v = LabeledVector::new(vec![q(1), q(2)], vec![c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)]).unwrap();
    LabeledOperator::projector(&v)
}

fn random_hermitian(spaces: Vec<SpaceLabel>, vals: &[f64]) -> LabeledOperator {
    let d = total_dim(&spaces);
    let m = Mat::<c64>::from_fn(d, d, |r, k| {
        let (a, b) = (r.min(k), r.max(k));
        let idx = 2 * (a * d + b);
        let re = vals[idx % vals.len()];
        let im = if r == k { 0.0 } else { vals[(idx + 1) % vals.len()] };
        if r <= k {
            c(re, im)
        } else {
            c(re, -im)
        }
    });
    LabeledOperator::new(spaces, m).unwrap()
}

#[test]
fn kronecker_oracles() {
    let ii = tensor_product(&pauli('I', 1), &pauli('I', 2)).unwrap();
    assert!(ii.max_abs_diff(&LabeledOperator::identity(vec![q(1), q(2)]).unwrap()).unwrap() == 0.0);

    let zz = tensor_product(&pauli('Z', 1), &pauli('Z', 2)).unwrap();
    let diag = [1.0, -1.0, -1.0, 1.0];
    for r in 0..4 {
        for k in 0..4 {
            let want = if r == k { diag[r] } else { 0.0 };
            assert_eq!(zz.get(r, k), c(want, 0.0));
        }
    }

    let p0 = op(vec![q(1)], &[&[c(1.0, 0.0), ZERO], &[ZERO, ZERO]]);
    let px = tensor_product(&p0, &pauli('X', 2)).unwrap();
    for r in 0..4 {
        for k in 0..4 {
            let want = if r < 2 && k < 2 && r != k { 1.0 } else { 0.0 };
            assert_eq!(px.get(r, k).re, want, "({r},{k})");
        }
    }
}

#[test]
fn label_collision_is_rejected() {
    assert!(tensor_product(&pauli('X', 1), &pauli('Z', 1)).is_err());
}

#[test]
fn partial_trace_oracles() {
    let m = partial_trace(&phi_plus_times_two(), &[SpaceId::Port(2)]).unwrap();
    assert!(m.max_abs_diff(&pauli('I', 1)).unwrap() < 1e-15);

    // |C⟩ = |00⟩ + e^{−iωt}|11⟩
    let ph = c64::from_polar(1.0, -0.3 * 2.0);
    let v = LabeledVector::new(vec![q(1), q(2)], vec![c(1.0, 0.0), ZERO, ZERO, ph]).unwrap();
    let m = partial_trace(&LabeledOperator::projector(&v), &[SpaceId::Port(2)]).unwrap();
    assert!(m.max_abs_diff(&pauli('I', 1)).unwrap() < 1e-15);

    let ra = op(vec![q(1)], &[&[c(0.7, 0.0), c(0.1, 0.2)], &[c(0.1, -0.2), c(0.3, 0.0)]]);
    let rb = op(vec![q(2)], &[&[c(2.0, 0.0), c(0.0, 0.5)], &[c(0.0, -0.5), c(1.0, 0.0)]]);
    let m = partial_trace(&ra.tensor(&rb).unwrap(), &[SpaceId::Port(2)]).unwrap();
    assert!(m.max_abs_diff(&ra.scale_real(3.0)).unwrap() < 1e-14);

    assert!(partial_trace(&ra, &[SpaceId::Port(7)]).is_err());
}

#[test]
fn partial_transpose_oracles() {
    let swap = partial_transpose(&phi_plus_times_two(), &[SpaceId::Port(1)]).unwrap();
    let perm = [0, 2, 1, 3];
    for r in 0..4 {
        for k in 0..4 {
            let want = if perm[r] == k { 1.0 } else { 0.0 };
            assert_eq!(swap.get(r, k), c(want, 0.0));
        }
    }

    let ra = op(vec![q(1)], &[&[c(0.7, 0.0), c(0.1, 0.2)], &[c(0.1, -0.2), c(0.3, 0.0)]]);
    let rb = op(vec![q(2)], &[&[c(0.6, 0.0), c(0.0, 0.4)], &[c(0.0, -0.4), c(0.4, 0.0)]]);
    let rbt = op(vec![q(2)], &[&[c(0.6, 0.0), c(0.0, -0.4)], &[c(0.0, 0.4), c(0.4, 0.0)]]);
    let pt = partial_transpose(&ra.tensor(&rb).unwrap(), &[SpaceId::Port(2)]).unwrap();
    assert!(pt.max_abs_diff(&ra.tensor(&rbt).unwrap()).unwrap() < 1e-15);
}

#[test]
fn permutation_oracles() {
    let mut e = vec![ZERO; 8];
    e[0b011] = c(1.0, 0.0);
    let v = LabeledVector::new(vec![q(1), q(2), q(3)], e).unwrap();
    let p = LabeledOperator::projector(&v);
    // Slot 1 moves to the end: (1,2,3) → (2,3,1).
    let out = permute_systems(&p, &[SpaceId::Port(2), SpaceId::Port(3), SpaceId::Port(1)]).unwrap();
    assert_eq!(out.get(0b110, 0b110), c(1.0, 0.0));
    assert_eq!(out.trace(), c(1.0, 0.0));

    let ra = op(vec![q(1)], &[&[c(0.7, 0.0), c(0.1, 0.2)], &[c(0.1, -0.2), c(0.3, 0.0)]]);
    let rb = pauli('Y', 2);
    let ab = ra.tensor(&rb).unwrap();
    let same = permute_systems(&ab, &[SpaceId::Port(1), SpaceId::Port(2)]).unwrap();
    assert_eq!(same, ab);
    let ba = permute_systems(&ab, &[SpaceId::Port(2), SpaceId::Port(1)]).unwrap();
    assert!(ba.max_abs_diff(&rb.tensor(&ra).unwrap()).unwrap() < 1e-15);

    assert!(permute_systems(&ab, &[SpaceId::Port(1)]).is_err());
    assert!(permute_systems(&ab, &[SpaceId::Port(1), SpaceId::Port(1)]).is_err());
}

#[test]
fn eigen_oracles() {
    let (v, _) = hermitian_eig(&pauli('Z', 1)).unwrap();
    assert_eq!(v, vec![1.0, -1.0]);
    let (v, _) = hermitian_eig(&pauli('I', 1)).unwrap();
    assert_eq!(v, vec![1.0, 1.0]);
    let (v, _) = hermitian_eig(&pauli('X', 1).add(&pauli('Z', 1)).unwrap()).unwrap();
    assert!((v[0] - 2f64.sqrt()).abs() < 1e-14 && (v[1] + 2f64.sqrt()).abs() < 1e-14);

    let bad = op(vec![q(1)], &[&[ZERO, c(1.0, 0.0)], &[ZERO, ZERO]]);
    assert!(matches!(hermitian_eig(&bad), Err(combqfi::Error::Validation(_))));
}

#[test]
fn predicates_use_relative_tolerances() {
    let m = pauli('Z', 1).scale_real(1e6);
    assert!(m.is_hermitian(HERMITIAN_TOL));
    assert!(!m.is_psd(PSD_TOL));
    let p = op(vec![q(1)], &[&[c(1.0, 0.0), ZERO], &[ZERO, c(-1e-12, 0.0)]]);
    assert!(p.is_psd(PSD_TOL));
}

fn spaces_for(k: usize) -> Vec<SpaceLabel> {
    (1..=k).map(q).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs(k in 1usize..4, vals in prop::collection::vec(-1.0f64..1.0, 16..160)) {
        let a = random_hermitian(spaces_for(k), &vals);
        let (lam, vecs) = hermitian_eig(&a).unwrap();
        let d = a.dim();
        let mut rec = Mat::<c64>::zeros(d, d);
        for (l, v) in lam.iter().zip(&vecs) {
            for r in 0..d {
                for s in 0..d {
                    rec[(r, s)] += v.entries()[r] * v.entries()[s].conj() * *l;
                }
            }
        }
        let err = (0..d).flat_map(|r| (0..d).map(move |s| (r, s))).map(|(r, s)| (rec[(r, s)] - a.get(r, s)).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((vecs[i].inner(&vecs[j]) - c(want, 0.0)).norm() < 1e-10);
            }
        }
        prop_assert!(lam.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn partial_trace_keeps_trace(k in 2usize..4, pick in 0usize..3, vals in prop::collection::vec(-1.0f64..1.0, 16..160)) {
        let a = random_hermitian(spaces_for(k), &vals);
        let traced = [SpaceId::Port(1 + pick % k)];
        let t = partial_trace(&a, &traced).unwrap();
        prop_assert!((t.trace() - a.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_an_involution(k in 1usize..4, pick in 0usize..3, vals in prop::collection::vec(-1.0f64..1.0, 16..160)) {
        let a = random_hermitian(spaces_for(k), &vals);
        let ids = [SpaceId::Port(1 + pick % k)];
        let once = partial_transpose(&a, &ids).unwrap();
        prop_assert!(once.is_hermitian(HERMITIAN_TOL));
        prop_assert!((once.trace() - a.trace()).norm() < 1e-12);
        let twice = partial_transpose(&once, &ids).unwrap();
        prop_assert_eq!(twice, a);
    }

    #[test]
    fn permutation_round_trips(vals in prop::collection::vec(-1.0f64..1.0, 16..160), perm in Just(vec![3usize, 1, 2]).prop_shuffle()) {
        let a = random_hermitian(spaces_for(3), &vals);
        let order: Vec<SpaceId> = perm.iter().map(|&k| SpaceId::Port(k)).collect();
        let p = permute_systems(&a, &order).unwrap();
        prop_assert!((p.trace() - a.trace()).norm() < 1e-12);
        let ev_a = a.eigenvalues();
        let ev_p = p.eigenvalues();
        for (x, y) in ev_a.iter().zip(&ev_p) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let back = permute_systems(&p, &[SpaceId::Port(1), SpaceId::Port(2), SpaceId::Port(3)]).unwrap();
        prop_assert!(back.max_abs_diff(&a).unwrap() < 1e-15);
    }

    #[test]
    fn tensor_trace_factorizes(va in prop::collection::vec(-1.0f64..1.0, 8..40), vb in prop::collection::vec(-1.0f64..1.0, 8..40)) {
        let a = random_hermitian(vec![q(1)], &va);
        let b = random_hermitian(vec![q(2), q(3)], &vb);
        let ab = tensor_product(&a, &b).unwrap();
        prop_assert!((ab.trace() - a.trace() * b.trace()).norm() < 1e-12);
    }
}
