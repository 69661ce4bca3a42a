mod common;

use combqfi::channel::*;
use combqfi::collision::{build_comb_family, FrequencyTask, InteractionKind, Scenario};
use combqfi::comb::*;
use combqfi::qfi::{channel_qfi, comb_qfi_dual, QfiOptions};
use combqfi::tensor::*;
use combqfi::Error;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts() -> QfiOptions {
    QfiOptions::default()
}

#[test]
fn one_copy_is_the_channel_operator() {
    let e = random_channel(4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = GaugeMatrix::new(random_hermitian(&mut rng, 2)).unwrap();
    let a = n_copy_performance_operator(&e, 1, &h).unwrap();
    let b = performance_operator(&e, &h, &ToothStructure::qubits(1)).unwrap();
    assert!(a.op.max_abs_diff(&b.op).unwrap() < 1e-14);
}

#[test]
fn n_copy_formula_matches_tensor_construction() {
    for seed in 0..10 {
        let e = random_channel(100 + seed, 1 + (seed as usize % 3));
        for n in 2..=3 {
            let q = e.q().pow(n as u32);
            let formula = n_copy_performance_operator(&e, n, &GaugeMatrix::zeros(q)).unwrap();
            let prod = product_ensemble(&e, n).unwrap();
            let direct = performance_operator(&prod, &GaugeMatrix::zeros(q), &ToothStructure::qubits(n)).unwrap();
            assert!(formula.op.max_abs_diff(&direct.op).unwrap() < 1e-9, "seed {seed} N={n}");
            assert!(formula.op.is_hermitian(HERMITIAN_TOL));
        }
    }
}

#[test]
fn product_ensemble_is_the_tensor_power() {
    let e = random_channel(7, 2);
    let p = product_ensemble(&e, 2).unwrap();
    let second = LabeledOperator::new(vec![SpaceLabel::port(3, 2), SpaceLabel::port(4, 2)], e.operator().matrix().clone()).unwrap();
    let want = e.operator().tensor(&second).unwrap();
    assert!(p.operator().max_abs_diff(&want).unwrap() < 1e-13);
    assert!(validate_comb(&p.operator(), &ToothStructure::qubits(2), 1e-10).unwrap().passed);
}

#[test]
fn zero_derivative_channel_has_no_information() {
    let f = fixed_family(phase_ensemble(0.3, 0.0), ToothStructure::qubits(1));
    let r = adaptive_channel_qfi(f, 2, 0.0, &opts()).unwrap();
    assert!(r.j.abs() < 1e-8);
}

#[test]
fn noiseless_phase_scales_quadratically() {
    let t = 1.3;
    for n in 1..=3 {
        let r = adaptive_channel_qfi(phase_family(t), n, 0.4, &opts()).unwrap();
        let want = (n as f64 * t).powi(2);
        assert!((r.j - want).abs() < 1e-5 * want, "N={n}: {}", r.j);
    }
}

#[test]
fn one_use_equals_channel_qfi() {
    let e = random_channel(21, 2);
    let a = adaptive_channel_qfi(fixed_family(e.clone(), ToothStructure::qubits(1)), 1, 0.0, &opts()).unwrap().j;
    let b = channel_qfi(&fixed_family(e, ToothStructure::qubits(1)), 0.0, &opts()).unwrap();
    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
}

#[test]
fn two_bitflip_uses_match_markov_control_family() {
    let (omega, step) = (0.6, 1.7);
    let single = build_comb_family(Scenario::MarkovControl, InteractionKind::BitflipXX, FrequencyTask::uniform(omega, 1.0, 1, step)).unwrap();
    let a = adaptive_channel_qfi(single, 2, omega, &opts()).unwrap().j;
    let fam = build_comb_family(Scenario::MarkovControl, InteractionKind::BitflipXX, FrequencyTask::uniform(omega, 1.0, 2, 2.0 * step)).unwrap();
    let b = comb_qfi_dual(&fam, omega, &opts()).unwrap().j;
    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
}

#[test]
fn too_many_uses_are_refused() {
    let r = adaptive_channel_qfi(phase_family(1.0), MAX_COPIES + 1, 0.0, &opts());
    match r {
        Err(Error::Domain(msg)) => assert!(msg.contains("N ≤ 4"), "{msg}"),
        other => panic!("expected a refusal, got {:?}", other.map(|r| r.j)),
    }
    assert!(product_ensemble(&phase_ensemble(0.0, 1.0), 0).is_err());
}

#[test]
fn more_uses_never_hurt() {
    for kind in [InteractionKind::PartialSwap, InteractionKind::BitflipXX] {
        let mut prev = 0.0;
        for n in 1..=3 {
            let ch = build_comb_family(Scenario::MarkovControl, kind, FrequencyTask::uniform(0.3, 1.0, 1, 1.1)).unwrap();
            let j = adaptive_channel_qfi(ch, n, 0.3, &opts()).unwrap().j;
            assert!(j >= prev - 1e-6, "{kind} N={n}: {j} < {prev}");
            prev = j;
        }
    }
}
