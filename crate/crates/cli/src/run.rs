//! Grid evaluation for the experiment subcommands.

use std::time::Instant;

use combqfi::channel::adaptive_channel_qfi;
use combqfi::collision::{build_comb_family, FrequencyTask, Scenario};
use combqfi::comb::{prepare_ensemble, state_qfi, CombFamily};
use combqfi::qfi::{comb_qfi_dual, comb_qfi_min_entropy_ensemble, optimal_probe_ensemble, probe_output_state};
use combqfi::variational::optimize_probe;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::table::Row;

/// Values below this are reported as failures rather than emitted.
const NEGATIVE_QFI_TOL: f64 = 1e-9;

/// One evaluated grid point.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub row: Row,
    /// Free-form details for the summary.
    pub note: String,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug)]
struct Point {
    scenario: Scenario,
    n: usize,
    t_tot: f64,
}

fn grid(kind: ExperimentKind, cfg: &ExperimentConfig) -> Vec<Point> {
    // The variational circuit and adaptive N-copy strategies fix the scenario.
    let scenarios = match kind {
        ExperimentKind::Variational => vec![Scenario::NonMarkovControl],
        ExperimentKind::ChannelNcopy => vec![Scenario::MarkovControl],
        _ => cfg.scenarios.clone(),
    };
    let mut pts = Vec::new();
    for &n in &cfg.n {
        for &scenario in &scenarios {
            for &t_tot in &cfg.t_tot {
                pts.push(Point { scenario, n, t_tot });
            }
        }
    }
    pts
}

fn task(cfg: &ExperimentConfig, n: usize, t_tot: f64) -> FrequencyTask {
    let mut t = FrequencyTask::uniform(cfg.omega, cfg.g, n, t_tot);
    if let Some(tau) = cfg.tau {
        t.tau = tau;
    }
    t
}

type PointResult = Result<(f64, Option<f64>, String), String>;

fn evaluate(kind: ExperimentKind, cfg: &ExperimentConfig, p: Point) -> PointResult {
    let task = task(cfg, p.n, p.t_tot);
    let err = |e: combqfi::Error| e.to_string();
    match kind {
        ExperimentKind::Sweep => {
            let f = build_comb_family(p.scenario, cfg.interaction, task).map_err(err)?;
            let r = comb_qfi_dual(&f, cfg.omega, &cfg.qfi).map_err(err)?;
            Ok((r.j, Some(r.gap), format!("{} iterations", r.iterations)))
        }
        ExperimentKind::Qfi => {
            let f = build_comb_family(p.scenario, cfg.interaction, task).map_err(err)?;
            let r = comb_qfi_dual(&f, cfg.omega, &cfg.qfi).map_err(err)?;
            let me = comb_qfi_min_entropy_ensemble(&r.ensemble, &f.structure(), &cfg.qfi).map_err(err)?;
            Ok((r.j, Some(r.gap), format!("min-entropy route {me:.10e} (difference {:.2e})", (me - r.j).abs())))
        }
        ExperimentKind::Probe => {
            let f = build_comb_family(p.scenario, cfg.interaction, task).map_err(err)?;
            let r = comb_qfi_dual(&f, cfg.omega, &cfg.qfi).map_err(err)?;
            let (probe, value) = optimal_probe_ensemble(&r.ensemble, &f.structure(), &r.h_opt, &cfg.qfi).map_err(err)?;
            let purified = probe.purify().map_err(err)?;
            let (rho, drho) = probe_output_state(&r.ensemble, &purified).map_err(err)?;
            let q = state_qfi(&rho, &drho).map_err(err)?;
            let m = probe.op.matrix();
            let off = (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)].norm())
                .fold(0.0, f64::max);
            Ok((
                r.j,
                Some(r.gap),
                format!("probe value {value:.10e}, output state QFI {q:.10e}, largest off-diagonal {off:.2e}"),
            ))
        }
        ExperimentKind::Variational => {
            let best = optimize_probe(&task, cfg.interaction, &cfg.optimizer).map_err(err)?;
            let f = build_comb_family(p.scenario, cfg.interaction, task).map_err(err)?;
            let ens = prepare_ensemble(&f, cfg.omega, &cfg.qfi.ensemble).map_err(err)?;
            let j = combqfi::qfi::comb_qfi_dual_ensemble(&ens, &f.structure(), &cfg.qfi).map_err(err)?.j;
            let ratio = if j > 0.0 { best.fisher / j } else { f64::NAN };
            Ok((
                best.fisher,
                None,
                format!("comb QFI {j:.10e}, ratio {ratio:.4}{}", if best.converged { "" } else { ", not converged" }),
            ))
        }
        ExperimentKind::ChannelNcopy => {
            let mut single = task.clone();
            single.n = 1;
            let ch = build_comb_family(Scenario::MarkovControl, cfg.interaction, single).map_err(err)?;
            let r = adaptive_channel_qfi(ch, p.n, cfg.omega, &cfg.qfi).map_err(err)?;
            Ok((r.j, Some(r.gap), format!("{} channel uses", p.n)))
        }
    }
}

/// Evaluates every grid point on the current rayon pool; results come back
/// in grid order.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Vec<Outcome> {
    grid(kind, cfg)
        .into_par_iter()
        .map(|p| {
            let start = Instant::now();
            let res = evaluate(kind, cfg, p);
            let wall_ms = if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
            let res = match res {
                Ok((q, _, _)) if q < -NEGATIVE_QFI_TOL => Err(format!("negative QFI {q:.3e}")),
                other => other,
            };
            let (qfi, gap, note, error) = match res {
                Ok((q, gap, note)) => (Some(q), gap, note, None),
                Err(e) => (None, None, String::new(), Some(e)),
            };
            Outcome {
                row: Row {
                    experiment: kind.name().to_string(),
                    scenario: p.scenario.name().to_string(),
                    interaction: cfg.interaction.name().to_string(),
                    n: p.n,
                    t_tot: p.t_tot,
                    omega: cfg.omega,
                    g: cfg.g,
                    qfi,
                    gap,
                    wall_ms,
                },
                note,
                error,
            }
        })
        .collect()
}
