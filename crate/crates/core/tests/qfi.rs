mod common;

use combqfi::collision::{build_comb_family, FrequencyTask, InteractionKind, Scenario};
use combqfi::comb::*;
use combqfi::qfi::*;
use combqfi::tensor::*;
use common::*;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn opts() -> QfiOptions {
    QfiOptions::default()
}

fn swap_family(scenario: Scenario, omega: f64, g: f64, n: usize, t_tot: f64) -> impl CombFamily {
    build_comb_family(scenario, InteractionKind::PartialSwap, FrequencyTask::uniform(omega, g, n, t_tot)).unwrap()
}

#[test]
fn phase_channel_gives_t_squared() {
    for t in [0.5, 1.0, 3.0] {
        let r = comb_qfi_dual(&phase_family(t), 0.3, &opts()).unwrap();
        assert!((r.j - t * t).abs() < 1e-6 * t * t, "t = {t}: {}", r.j);
        assert!((r.j - 4.0 * r.lambda).abs() < 1e-12);
        let me = comb_qfi_min_entropy(&phase_family(t), 0.3, &opts()).unwrap();
        assert!((me - t * t).abs() < 1e-6 * t * t);
    }
}

#[test]
fn trivial_interaction_recovers_noiseless_scaling() {
    // Two SWAP steps of duration τ = π/g each amount to the identity.
    let t_tot = 2.0 * PI;
    for scenario in Scenario::ALL {
        let r = comb_qfi_dual(&swap_family(scenario, 0.7, 1.0, 2, t_tot), 0.7, &opts()).unwrap();
        assert!((r.j - t_tot * t_tot).abs() < 1e-4 * t_tot * t_tot, "{scenario}: {}", r.j);
    }
}

#[test]
fn independent_of_omega() {
    let a = comb_qfi_dual(&swap_family(Scenario::NonMarkovControl, PI / 10.0, 1.0, 2, 4.0), PI / 10.0, &opts()).unwrap();
    let b = comb_qfi_dual(&swap_family(Scenario::NonMarkovControl, PI / 3.0, 1.0, 2, 4.0), PI / 3.0, &opts()).unwrap();
    assert!((a.j - b.j).abs() < 1e-6, "{} vs {}", a.j, b.j);
}

#[test]
fn zero_derivative_family_has_no_information() {
    let ens = phase_ensemble(0.0, 0.0);
    let f = fixed_family(ens, ToothStructure::qubits(1));
    assert!(comb_qfi_dual(&f, 0.0, &opts()).unwrap().j.abs() < 1e-8);
    assert!(comb_qfi_min_entropy(&f, 0.0, &opts()).unwrap().abs() < 1e-8);
    assert!(channel_qfi(&f, 0.0, &opts()).unwrap().abs() < 1e-8);
}

#[test]
fn routes_agree_on_small_swap_sweep() {
    for scenario in Scenario::ALL {
        for t_tot in [0.5, 3.0, 8.0] {
            let f = swap_family(scenario, PI / 10.0, 1.0, 2, t_tot);
            let d = comb_qfi_dual(&f, PI / 10.0, &opts()).unwrap().j;
            let m = comb_qfi_min_entropy(&f, PI / 10.0, &opts()).unwrap();
            assert!((d - m).abs() < 1e-6, "{scenario} t_tot = {t_tot}: {d} vs {m}");
        }
    }
}

#[test]
fn min_entropy_examples() {
    let s = ToothStructure::qubits(1);
    let so = opts().solver;
    let id = LabeledOperator::identity(qubit_ports(1)).unwrap();
    assert!(conditional_min_entropy(&id, &s, &so).unwrap().abs() < 1e-8);
    let phi = LabeledVector::new(qubit_ports(1), vec![c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)]).unwrap();
    let w = LabeledOperator::projector(&phi);
    assert!((conditional_min_entropy(&w, &s, &so).unwrap() + 1.0).abs() < 1e-8);
    let h = conditional_min_entropy(&w.scale_real(3.0), &s, &so).unwrap();
    assert!((h - (-1.0 - 3f64.log2())).abs() < 1e-8);
}

#[test]
fn min_entropy_reduces_to_largest_eigenvalue() {
    let s = ToothStructure::qubits(1);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let a = random_complex(&mut rng, 4, 4);
        let w = LabeledOperator::new(qubit_ports(1), &a * a.adjoint()).unwrap();
        let lmax = w.eigenvalues().into_iter().fold(f64::MIN, f64::max);
        let h = conditional_min_entropy(&w, &s, &opts().solver).unwrap();
        assert!((h + lmax.log2()).abs() < 1e-9, "{h} vs {}", -lmax.log2());
    }
}

#[test]
fn min_entropy_of_two_tooth_product() {
    // For W = 1_{12} ⊗ V on a two-tooth comb the optimal S is the trace-normalized
    // identity on (1,2), so λ = 2·λ_max(V).
    let s = ToothStructure::qubits(2);
    let phi = LabeledVector::new(vec![SpaceLabel::port(3, 2), SpaceLabel::port(4, 2)], vec![c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)])
        .unwrap();
    let w = LabeledOperator::identity(vec![SpaceLabel::port(1, 2), SpaceLabel::port(2, 2)])
        .unwrap()
        .tensor(&LabeledOperator::projector(&phi))
        .unwrap();
    let h = conditional_min_entropy(&w, &s, &opts().solver).unwrap();
    assert!((h + 2.0).abs() < 1e-7, "{h}");
}

#[test]
fn optimal_probe_for_phase_channel_is_balanced() {
    let t = 1.5;
    let f = phase_family(t);
    let r = comb_qfi_dual(&f, 0.2, &opts()).unwrap();
    let s = f.structure();
    let (probe, value) = optimal_probe_ensemble(&r.ensemble, &s, &r.h_opt, &opts()).unwrap();
    assert!((value - t * t).abs() < 1e-6);
    assert!(probe.validate(1e-8).unwrap().passed);
    assert!((probe.op.get(0, 0).re - 0.5).abs() < 1e-4, "{:?}", probe.op.matrix());
    let (rho, drho) = probe_output_state(&r.ensemble, &probe.purify().unwrap()).unwrap();
    assert!((state_qfi(&rho, &drho).unwrap() - t * t).abs() < 1e-5);
}

#[test]
fn optimal_probe_matches_dual_on_two_steps() {
    for scenario in [Scenario::NonMarkovControl, Scenario::MarkovControl] {
        let f = swap_family(scenario, PI / 10.0, 1.0, 2, 4.0);
        let r = comb_qfi_dual(&f, PI / 10.0, &opts()).unwrap();
        let (probe, value) = optimal_probe_ensemble(&r.ensemble, &f.structure(), &r.h_opt, &opts()).unwrap();
        assert!((value - r.j).abs() < 1e-6, "{scenario}: {value} vs {}", r.j);
        assert!(probe.validate(1e-8).unwrap().passed);
        let (rho, drho) = probe_output_state(&r.ensemble, &probe.purify().unwrap()).unwrap();
        let q = state_qfi(&rho, &drho).unwrap();
        assert!((q - r.j).abs() < 1e-5, "{scenario}: state QFI {q} vs {}", r.j);
    }
}

#[test]
fn channel_qfi_of_phase_channel() {
    for t in [0.3, 2.0] {
        let j = channel_qfi(&phase_family(t), 0.1, &opts()).unwrap();
        assert!((j - t * t).abs() < 1e-7 * t * t.max(1.0));
        // The scalar gauge −t/2 attains the optimum.
        let om = performance_operator(&phase_ensemble(0.1, t), &GaugeMatrix::scalar(-t / 2.0), &ToothStructure::qubits(1)).unwrap();
        let norm = om.op.partial_trace(&[SpaceId::Port(2)]).unwrap().hermitian_norm();
        assert!((norm - t * t).abs() < 1e-12);
    }
}

#[test]
fn channel_qfi_rejects_multi_tooth_families() {
    let f = swap_family(Scenario::NonMarkovControl, 0.3, 1.0, 2, 2.0);
    assert!(channel_qfi(&f, 0.3, &opts()).is_err());
}

#[test]
fn channel_qfi_matches_comb_route_for_single_steps() {
    for kind in InteractionKind::ALL {
        let f = build_comb_family(Scenario::MarkovControl, kind, FrequencyTask::uniform(0.4, 1.0, 1, 2.5)).unwrap();
        let a = channel_qfi(&f, 0.4, &opts()).unwrap();
        let b = comb_qfi_dual(&f, 0.4, &opts()).unwrap().j;
        assert!((a - b).abs() < 1e-7, "{kind}: {a} vs {b}");
    }
}

#[test]
fn restriction_cannot_increase_information() {
    for t_tot in [1.0, 5.0, 12.0] {
        let full = comb_qfi_dual(&swap_family(Scenario::NonMarkovControl, 0.3, 1.0, 2, t_tot), 0.3, &opts()).unwrap().j;
        let free = comb_qfi_dual(&swap_family(Scenario::NonMarkovFree, 0.3, 1.0, 2, t_tot), 0.3, &opts()).unwrap().j;
        assert!(free <= full + 1e-6, "t_tot = {t_tot}: {free} > {full}");
    }
}

#[test]
fn returned_gauge_is_stationary() {
    let f = swap_family(Scenario::NonMarkovControl, PI / 10.0, 1.0, 2, 3.0);
    let r = comb_qfi_dual(&f, PI / 10.0, &opts()).unwrap();
    let s = f.structure();
    let base = min_entropy_objective(&r.ensemble, &r.h_opt, &s, &opts().solver).unwrap();
    assert!((base - r.j).abs() < 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = r.h_opt.dim();
    for _ in 0..3 {
        let d = random_hermitian(&mut rng, q);
        let d = GaugeMatrix::new(Mat::from_fn(q, q, |i, j| d[(i, j)] * 1e-3)).unwrap();
        let v = min_entropy_objective(&r.ensemble, &r.h_opt.add(&d).unwrap(), &s, &opts().solver).unwrap();
        assert!(v >= base - 1e-6, "{v} < {base}");
    }
}

#[test]
fn dual_blocks_are_normalized_combs() {
    let f = swap_family(Scenario::NonMarkovControl, 0.3, 1.0, 3, 6.0);
    let r = comb_qfi_dual(&f, 0.3, &opts()).unwrap();
    assert_eq!(r.s_blocks.len(), 2);
    for (k, b) in r.s_blocks.iter().enumerate() {
        let s = ToothStructure::qubits(k + 1);
        assert!(validate_comb(b, &s, 1e-6).unwrap().passed, "block {k}");
    }
    assert!(r.gap < 1e-7);
}
