mod common;

use combqfi::collision::*;
use combqfi::comb::*;
use combqfi::tensor::*;
use common::*;
use faer::{c64, Mat};
use proptest::prelude::*;

fn kinds() -> [InteractionKind; 4] {
    InteractionKind::ALL
}

#[test]
fn free_evolution_step_is_diagonal() {
    let (omega, t) = (0.7, 1.9);
    let u = step_unitary(InteractionKind::PartialSwap, 0.0, 2.0, omega, t).unwrap();
    let ph = c64::from_polar(1.0, -omega * t);
    let want = [c(1.0, 0.0), ph, c(1.0, 0.0), ph];
    for r in 0..4 {
        for k in 0..4 {
            let w = if r == k { want[r] } else { ZERO };
            assert!((u.get(r, k) - w).norm() < 1e-15);
        }
    }
}

#[test]
fn quarter_swap_exchanges_environment_and_system() {
    let g = 2.0;
    let u = step_unitary(InteractionKind::PartialSwap, g, std::f64::consts::PI / (2.0 * g), 0.4, 0.0).unwrap();
    // cos(gτ) = 0 leaves −i·SWAP.
    let swap = [0, 2, 1, 3];
    for r in 0..4 {
        for k in 0..4 {
            let w = if swap[k] == r { c(0.0, -1.0) } else { ZERO };
            assert!((u.get(r, k) - w).norm() < 1e-15, "({r}, {k})");
        }
    }
}

#[test]
fn bitflip_interaction_flips_both() {
    let u = step_unitary(InteractionKind::BitflipXX, 1.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0).unwrap();
    // −i X⊗X maps |00⟩ to −i|11⟩.
    assert!((u.get(3, 0) - c(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn names_round_trip() {
    for k in kinds() {
        assert_eq!(k.name().parse::<InteractionKind>().unwrap(), k);
    }
    for s in Scenario::ALL {
        assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
    }
    assert!("swapp".parse::<InteractionKind>().is_err());
    assert!("markov".parse::<Scenario>().is_err());
}

#[test]
fn invalid_tasks_are_refused() {
    let mut task = FrequencyTask::uniform(0.1, 1.0, 2, 4.0);
    task.t = -1.0;
    assert!(build_comb_family(Scenario::NonMarkovControl, InteractionKind::PartialSwap, task).is_err());
    assert!(build_comb_family(Scenario::NonMarkovControl, InteractionKind::PartialSwap, FrequencyTask::uniform(0.1, 1.0, 0, 4.0)).is_err());
    assert!(step_unitary(InteractionKind::PartialSwap, f64::NAN, 1.0, 0.1, 1.0).is_err());
}

#[test]
fn single_step_scenarios_coincide() {
    for k in kinds() {
        let task = FrequencyTask::uniform(0.3, 1.0, 1, 2.7);
        let ops: Vec<LabeledOperator> = Scenario::ALL
            .iter()
            .map(|&s| build_comb_family(s, k, task.clone()).unwrap().evaluate(0.3).unwrap().0.op)
            .collect();
        for op in &ops[1..] {
            assert!(op.max_abs_diff(&ops[0]).unwrap() < 1e-10, "{k}");
        }
    }
}

#[test]
fn all_scenarios_give_valid_combs() {
    for k in kinds() {
        for s in Scenario::ALL {
            for n in 1..=3 {
                let f = build_comb_family(s, k, FrequencyTask::uniform(0.9, 0.8, n, 5.0)).unwrap();
                let (comb, _) = f.evaluate(0.9).unwrap();
                let r = validate_comb(&comb.op, &comb.structure, 1e-8).unwrap();
                assert!(r.passed, "{s} {k} N={n}: {r}");
            }
        }
    }
}

fn relabel(op: &LabeledOperator, spaces: Vec<SpaceLabel>) -> LabeledOperator {
    LabeledOperator::new(spaces, op.matrix().clone()).unwrap()
}

#[test]
fn markov_free_composes_the_step_channel() {
    for k in kinds() {
        let task = FrequencyTask::uniform(0.5, 1.2, 1, 1.4);
        let step = build_comb_family(Scenario::MarkovFree, k, task.clone()).unwrap().evaluate(0.5).unwrap().0.op;
        let second = relabel(&step, vec![SpaceLabel::port(2, 2), SpaceLabel::port(3, 2)]);
        let composed = link_product(&step, &second).unwrap();
        let composed = relabel(&composed, qubit_ports(1));
        let mut two = task;
        two.n = 2;
        let got = build_comb_family(Scenario::MarkovFree, k, two).unwrap().evaluate(0.5).unwrap().0.op;
        assert!(got.max_abs_diff(&composed).unwrap() < 1e-12, "{k}");
    }
}

/// Choi operator of the step unitary with environment wires `e_in → e_out`
/// and system ports `p → p+1`.
fn step_choi(u: &LabeledOperator, e_in: &str, e_out: &str, p: usize) -> LabeledOperator {
    let spaces = vec![SpaceLabel::named(e_in, 2), SpaceLabel::port(p, 2), SpaceLabel::named(e_out, 2), SpaceLabel::port(p + 1, 2)];
    let v = LabeledVector::new(spaces, (0..16).map(|x| u.get(x % 4, x / 4)).collect()).unwrap();
    LabeledOperator::projector(&v)
}

fn explicit_nm_control(k: InteractionKind, task: &FrequencyTask, omega: f64) -> LabeledOperator {
    let u = step_unitary(k, task.g, task.tau, omega, task.t).unwrap();
    let rho = match task.env_init_for(k) {
        EnvInit::Ground => op_from_rows(vec![SpaceLabel::named("E0", 2)], &[&[c(1.0, 0.0), ZERO], &[ZERO, ZERO]]),
        EnvInit::MaximallyMixed => LabeledOperator::identity(vec![SpaceLabel::named("E0", 2)]).unwrap().scale_real(0.5),
    };
    let mut acc = rho;
    for step in 0..task.n {
        let c = step_choi(&u, &format!("E{step}"), &format!("E{}", step + 1), 2 * step + 1);
        acc = link_product(&acc, &c).unwrap();
    }
    let last = SpaceId::Named(format!("E{}", task.n));
    let acc = acc.partial_trace(&[last]).unwrap();
    acc.permute(&ToothStructure::qubits(task.n).ids()).unwrap()
}

#[test]
fn ensemble_matches_link_product_contraction() {
    for k in kinds() {
        for n in 1..=3 {
            let task = FrequencyTask::uniform(0.8, 1.1, n, 4.2);
            let want = explicit_nm_control(k, &task, 0.8);
            let got = build_comb_family(Scenario::NonMarkovControl, k, task).unwrap().evaluate(0.8).unwrap().0.op;
            assert!(got.max_abs_diff(&want).unwrap() < 1e-9, "{k} N={n}");
        }
    }
}

#[test]
fn markov_control_is_a_product_of_steps() {
    let task = FrequencyTask::uniform(0.2, 0.6, 1, 1.5);
    let step = build_comb_family(Scenario::MarkovControl, InteractionKind::PartialCnotSysControl, task.clone())
        .unwrap()
        .evaluate(0.2)
        .unwrap()
        .0
        .op;
    let second = relabel(&step, vec![SpaceLabel::port(3, 2), SpaceLabel::port(4, 2)]);
    let want = step.tensor(&second).unwrap();
    let mut two = task;
    two.n = 2;
    let got = build_comb_family(Scenario::MarkovControl, InteractionKind::PartialCnotSysControl, two)
        .unwrap()
        .evaluate(0.2)
        .unwrap()
        .0
        .op;
    assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_are_unitary(g in -3.0f64..3.0, tau in 0.0f64..5.0, omega in -4.0f64..4.0, t in 0.0f64..5.0, ki in 0usize..4) {
        let u = step_unitary(kinds()[ki], g, tau, omega, t).unwrap();
        let m = u.matrix();
        let p = m.adjoint() * m;
        let id = Mat::<c64>::identity(4, 4);
        let err = (0..4).flat_map(|r| (0..4).map(move |k| (r, k))).map(|(r, k)| (p[(r, k)] - id[(r, k)]).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn step_derivative_matches_finite_difference(g in -2.0f64..2.0, tau in 0.0f64..3.0, omega in -2.0f64..2.0, t in 0.0f64..3.0, ki in 0usize..4) {
        let k = kinds()[ki];
        let h = 1e-6;
        let up = step_unitary(k, g, tau, omega + h, t).unwrap();
        let um = step_unitary(k, g, tau, omega - h, t).unwrap();
        let fd = up.sub(&um).unwrap().scale_real(0.5 / h);
        let du = step_unitary_derivative(k, g, tau, omega, t).unwrap();
        prop_assert!(fd.max_abs_diff(&du).unwrap() < 1e-7 * (1.0 + t));
    }

    #[test]
    fn ensemble_derivatives_match_finite_difference(omega in -2.0f64..2.0, t_tot in 0.5f64..6.0, ki in 0usize..4, si in 0usize..4) {
        let f = build_comb_family(Scenario::ALL[si], kinds()[ki], FrequencyTask::uniform(omega, 1.0, 2, t_tot)).unwrap();
        let h = 1e-6;
        let a = f.ensemble(omega + h).unwrap();
        let b = f.ensemble(omega - h).unwrap();
        let d = f.ensemble(omega).unwrap();
        for (i, dv) in d.derivatives().unwrap().iter().enumerate() {
            let fd = a.vectors()[i].sub(&b.vectors()[i]).scale(c(0.5 / h, 0.0));
            prop_assert!(fd.max_abs_diff(dv) < 1e-7 * (1.0 + t_tot));
        }
    }
}
