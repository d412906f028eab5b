//! Executes scenarios and audits the resulting trajectories.

use std::sync::Arc;

use fabric_core::regulation::{monitor_trajectory, DampedFabric, Damper};
use fabric_core::simulation::{
    path_distance, relative_drift, resample_points, rollout, truncate_arclength, Trajectory, MIN_INITIAL_ENERGY,
};
use fabric_core::{FabricError, SecondOrderSystem, State, Vector};

use crate::build::{assemble, initial_state, Assembly};
use crate::error::{HarnessError, Result};
use crate::report::{Comparison, InvariantReport};
use crate::scenario::{PathTwin, RegulatorSpec, Scenario};

pub struct RunOutcome {
    /// `None` when the rollout aborted.
    pub trajectory: Option<Trajectory>,
    pub report: InvariantReport,
    pub abort: Option<FabricError>,
}

fn simulate(asm: &Assembly, scenario: &Scenario, system: &dyn SecondOrderSystem, s0: &State) -> std::result::Result<(Trajectory, bool), FabricError> {
    rollout(
        system,
        s0,
        scenario.dt,
        scenario.duration,
        Some(asm.energy.as_ref()),
        asm.potential.as_deref(),
        scenario.convergence,
    )
}

/// Runs the configured system and the audit set that applies to it.
/// Configuration problems are errors; numerical failures produce an
/// incomplete report.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutcome> {
    let asm = assemble(scenario)?;
    let s0 = initial_state(scenario);
    let mut report = InvariantReport::new(&scenario.name, scenario.seed);
    let (traj, converged) = match simulate(&asm, scenario, asm.system.as_ref(), &s0) {
        Ok(r) => r,
        Err(e) => {
            report.mark_aborted(e.to_string());
            return Ok(RunOutcome {
                trajectory: None,
                report,
                abort: Some(e),
            });
        }
    };
    report.steps = traj.len();
    report.converged = scenario.convergence.map(|_| converged);
    let abort = audit(scenario, &asm, &s0, &traj, converged, &mut report).err();
    if let Some(e) = &abort {
        report.mark_aborted(e.to_string());
    }
    Ok(RunOutcome {
        trajectory: Some(traj),
        report,
        abort,
    })
}

/// Like [`run_scenario`] but turns an aborted rollout into an error.
pub fn run_trajectory(scenario: &Scenario) -> Result<(Trajectory, InvariantReport)> {
    let out = run_scenario(scenario)?;
    match (out.trajectory, out.abort) {
        (Some(t), None) => Ok((t, out.report)),
        (_, Some(e)) => Err(HarnessError::Numerical(e)),
        (None, None) => unreachable!("a missing trajectory always carries its abort"),
    }
}

fn audit(
    scenario: &Scenario,
    asm: &Assembly,
    s0: &State,
    traj: &Trajectory,
    converged: bool,
    report: &mut InvariantReport,
) -> std::result::Result<(), FabricError> {
    let cfg = &scenario.audit;
    if scenario.is_pure_fabric() {
        audit_conservation(traj, cfg.drift_tolerance, report);
    }
    if let Some(twin) = &cfg.path_twin {
        audit_paths(scenario, asm, s0, traj, twin, report)?;
    }
    if scenario.convergence.is_some() {
        let last = traj.last().expect("non-empty trajectory");
        report.record(
            "converged",
            f64::from(u8::from(converged)),
            1.0,
            Comparison::AtLeast,
            Some(format!("t = {:.3} s, final speed {:.2e}", traj.times[traj.len() - 1], last.speed())),
        );
        if converged {
            if let Some(policy) = &asm.policy {
                let f = policy.accel(&State::at_rest(last.q.clone())?)?;
                report.record("zero_set_proximity", f.norm(), cfg.zero_set_tolerance, Comparison::Below, None);
            }
        }
    }
    match &scenario.regulator {
        RegulatorSpec::Capping1 { energy_max, .. } | RegulatorSpec::Capping2 { energy_max, .. } => {
            let max = traj.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            report.record(
                "energy_cap",
                max,
                energy_max + cfg.cap_tolerance,
                Comparison::AtMost,
                Some(format!("excess over cap {:.2e}", max - energy_max)),
            );
        }
        RegulatorSpec::TheoremMain { beta, .. } => {
            let h = traj.total_energies.as_ref().expect("potential present");
            let max_rise = h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0);
            let span = traj.times[traj.len() - 1];
            let rate = if span > 0.0 { (h[h.len() - 1] - h[0]) / span } else { 0.0 };
            let note = if *beta == 0.0 {
                format!("no damping: mean rate {rate:.1e}, 𝓗 conserved rather than descending")
            } else {
                format!("mean rate {rate:.3e}")
            };
            report.record("total_energy_descent", max_rise, cfg.descent_tolerance, Comparison::AtMost, Some(note));
        }
        _ => {}
    }
    if let (Some(sys), Some(psi)) = (&asm.damped_potential, &asm.potential) {
        let last = traj.last().expect("non-empty trajectory");
        report.record("potential_gradient_at_rest", psi.gradient(&last.q).norm(), cfg.zero_set_tolerance, Comparison::Below, None);
        let summary = monitor_trajectory(sys, &traj.states, traj.dt)?;
        report.record(
            "lyapunov_margin_fraction",
            summary.positive_fraction(),
            cfg.monitor_fraction,
            Comparison::AtLeast,
            Some(format!("min margin {:.3e}", summary.min_margin)),
        );
    }
    Ok(())
}

fn audit_conservation(traj: &Trajectory, tol: f64, report: &mut InvariantReport) {
    match relative_drift(&traj.energies) {
        Ok((max, _)) => report.record("energy_conservation", max, tol, Comparison::Below, None),
        Err(_) => {
            // Starting at rest: compare absolute energy instead.
            let max = traj.energies.iter().map(|e| e.abs()).fold(0.0, f64::max);
            report.record(
                "energy_conservation",
                max,
                MIN_INITIAL_ENERGY,
                Comparison::AtMost,
                Some("initial energy below threshold; absolute energy reported".into()),
            );
        }
    }
}

fn unit_path(traj: &Trajectory, twin: &PathTwin) -> std::result::Result<Vec<Vector>, FabricError> {
    resample_points(&truncate_arclength(&traj.positions(), twin.path_length)?, twin.samples)
}

fn audit_paths(
    scenario: &Scenario,
    asm: &Assembly,
    s0: &State,
    traj: &Trajectory,
    twin: &PathTwin,
    report: &mut InvariantReport,
) -> std::result::Result<(), FabricError> {
    let base = match unit_path(traj, twin) {
        Ok(p) => p,
        Err(e) => {
            report.record("path_consistency_speed", f64::INFINITY, twin.tolerance, Comparison::Below, Some(e.to_string()));
            return Ok(());
        }
    };
    let mut compare = |check: &str, system: &dyn SecondOrderSystem, start: &State| -> std::result::Result<(), FabricError> {
        let (t, _) = rollout(system, start, scenario.dt, scenario.duration, None, None, None)?;
        match unit_path(&t, twin).and_then(|p| path_distance(&base, &p)) {
            Ok(d) => report.record(check, d, twin.tolerance, Comparison::Below, None),
            Err(e) => report.record(check, f64::INFINITY, twin.tolerance, Comparison::Below, Some(e.to_string())),
        }
        Ok(())
    };
    compare("path_consistency_speed", asm.system.as_ref(), &s0.with_velocity_scaled(twin.speed_scale))?;
    if let Some(beta) = twin.damping {
        let damped: Arc<dyn SecondOrderSystem> = Arc::new(DampedFabric::new(asm.fabric.clone(), Damper::Scalar(beta))?);
        compare("path_consistency_damped", damped.as_ref(), s0)?;
    }
    Ok(())
}
