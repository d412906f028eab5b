//! Fixed-step RK4 rollouts, convergence detection, arc-length path
//! comparison and energy drift.

use crate::energy::FinslerEnergy;
use crate::error::{check_dim, FabricError, Result};
use crate::linalg::Vector;
use crate::potential::Potential;
use crate::state::{Accel, SecondOrderSystem, State};

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_STEPS: usize = 1_000_000;
pub const MIN_ARC_LENGTH: f64 = 1e-9;
pub const MIN_INITIAL_ENERGY: f64 = 1e-12;

fn lift(system: &dyn SecondOrderSystem, q: Vector, qd: Vector) -> Result<(Vector, Vector)> {
    let a = system.accel(&State { q, qd: qd.clone() })?;
    Ok((qd, a.0))
}

fn rk4_from(system: &dyn SecondOrderSystem, state: &State, k1a: &Vector, dt: f64) -> Result<State> {
    let (q, qd) = (&state.q, &state.qd);
    let k1q = qd.clone();
    let (k2q, k2a) = lift(system, q + &k1q * (0.5 * dt), qd + k1a * (0.5 * dt))?;
    let (k3q, k3a) = lift(system, q + &k2q * (0.5 * dt), qd + &k2a * (0.5 * dt))?;
    let (k4q, k4a) = lift(system, q + &k3q * dt, qd + &k3a * dt)?;
    let w = dt / 6.0;
    Ok(State {
        q: q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * w,
        qd: qd + (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * w,
    })
}

/// One classical Runge-Kutta step of `(q, q̇)' = (q̇, h(q, q̇))`.
pub fn step_rk4(system: &dyn SecondOrderSystem, state: &State, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(FabricError::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    check_dim("rk4 state", system.dim(), state.dim())?;
    let a = system.accel(state)?;
    let next = rk4_from(system, state, &a.0, dt)?;
    if next.is_finite() {
        Ok(next)
    } else {
        Err(FabricError::NonFiniteState { step: 0 })
    }
}

/// "At rest": speed and acceleration below tolerance for `hold_steps`
/// consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCriterion {
    pub speed_tol: f64,
    pub accel_tol: f64,
    pub hold_steps: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            speed_tol: 1e-4,
            accel_tol: 1e-4,
            hold_steps: 100,
        }
    }
}

impl ConvergenceCriterion {
    pub fn validate(&self) -> Result<()> {
        if self.speed_tol > 0.0 && self.accel_tol > 0.0 && self.hold_steps > 0 {
            Ok(())
        } else {
            Err(FabricError::InvalidArgument(format!("invalid convergence criterion {self:?}")))
        }
    }
}

/// A recorded rollout. `accels[k]` is the system acceleration at `states[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub accels: Vec<Accel>,
    /// `𝓛` per step.
    pub energies: Vec<f64>,
    /// `𝓗 = 𝓛 + ψ` per step, when a potential was supplied.
    pub total_energies: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, State::dim)
    }

    pub fn positions(&self) -> Vec<Vector> {
        self.states.iter().map(|s| s.q.clone()).collect()
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// Checks the structural invariants: equal lengths and times `k·dt`.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        let ok_len = self.times.len() == n
            && self.accels.len() == n
            && (self.energies.is_empty() || self.energies.len() == n)
            && self.total_energies.as_ref().is_none_or(|h| h.len() == n);
        if !ok_len {
            return Err(FabricError::InvalidArgument("trajectory sequence lengths differ".into()));
        }
        if self.times.iter().enumerate().any(|(k, &t)| t != k as f64 * self.dt) {
            return Err(FabricError::InvalidArgument("trajectory times are not uniform".into()));
        }
        Ok(())
    }
}

struct Recorder<'a> {
    energy: Option<&'a dyn FinslerEnergy>,
    potential: Option<&'a dyn Potential>,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn push(&mut self, k: usize, state: State, accel: Accel) -> Result<()> {
        let l = match self.energy {
            Some(e) => Some(e.evaluate(&state)?.value),
            None => None,
        };
        if let Some(l) = l {
            self.traj.energies.push(l);
            if let (Some(p), Some(h)) = (self.potential, self.traj.total_energies.as_mut()) {
                h.push(l + p.value(&state.q));
            }
        }
        self.traj.times.push(k as f64 * self.traj.dt);
        self.traj.states.push(state);
        self.traj.accels.push(accel);
        Ok(())
    }
}

/// Integrates `system` from `state0` for `duration` seconds (rounded to whole
/// steps), stopping early once `criterion` holds. Records `𝓛` when an energy
/// is given and `𝓗` when a potential is given as well.
pub fn rollout(
    system: &dyn SecondOrderSystem,
    state0: &State,
    dt: f64,
    duration: f64,
    energy: Option<&dyn FinslerEnergy>,
    potential: Option<&dyn Potential>,
    criterion: Option<ConvergenceCriterion>,
) -> Result<(Trajectory, bool)> {
    if !(dt > 0.0 && duration > 0.0 && dt.is_finite() && duration.is_finite()) {
        return Err(FabricError::InvalidArgument(format!("need dt > 0 and duration > 0, got {dt}, {duration}")));
    }
    check_dim("rollout state", system.dim(), state0.dim())?;
    if let Some(e) = energy {
        check_dim("rollout energy", system.dim(), e.dim())?;
    }
    if let Some(p) = potential {
        check_dim("rollout potential", system.dim(), p.dim())?;
        if energy.is_none() {
            return Err(FabricError::InvalidArgument("a potential needs an energy to record 𝓗".into()));
        }
    }
    if let Some(c) = criterion {
        c.validate()?;
    }
    let steps = (duration / dt).round() as usize;
    if steps > MAX_STEPS {
        return Err(FabricError::InvalidArgument(format!("{steps} steps exceed the cap of {MAX_STEPS}")));
    }

    let mut rec = Recorder {
        energy,
        potential,
        traj: Trajectory {
            dt,
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity(steps + 1),
            accels: Vec::with_capacity(steps + 1),
            energies: Vec::new(),
            total_energies: potential.map(|_| Vec::new()),
        },
    };

    let mut state = state0.clone();
    let mut held = 0usize;
    let mut converged = false;
    for k in 0..=steps {
        let a = system.accel(&state).map_err(|e| at_step(e, k))?;
        if !crate::linalg::all_finite(&a.0) {
            return Err(FabricError::NonFiniteState { step: k });
        }
        if let Some(c) = criterion {
            if state.speed() < c.speed_tol && a.norm() < c.accel_tol {
                held += 1;
            } else {
                held = 0;
            }
            converged = held >= c.hold_steps;
        }
        let next = if k < steps && !converged {
            let n = rk4_from(system, &state, &a.0, dt).map_err(|e| at_step(e, k + 1))?;
            if !n.is_finite() {
                return Err(FabricError::NonFiniteState { step: k + 1 });
            }
            Some(n)
        } else {
            None
        };
        rec.push(k, state, a)?;
        match next {
            Some(n) => state = n,
            None => break,
        }
    }
    Ok((rec.traj, converged))
}

fn at_step(e: FabricError, step: usize) -> FabricError {
    match e {
        FabricError::NonFiniteState { .. } | FabricError::InvalidState(_) => FabricError::NonFiniteState { step },
        other => other,
    }
}

/// Cumulative chord length of a polyline, starting at 0.
pub fn cumulative_arclength(points: &[Vector]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            total += (p - &points[i - 1]).norm();
        }
        acc.push(total);
    }
    acc
}

/// `K` points uniformly spaced in arc length along a polyline.
pub fn resample_points(points: &[Vector], samples: usize) -> Result<Vec<Vector>> {
    if samples < 2 {
        return Err(FabricError::InvalidArgument("need at least 2 samples".into()));
    }
    let s = cumulative_arclength(points);
    let total = s.last().copied().unwrap_or(0.0);
    if !(total > MIN_ARC_LENGTH) {
        return Err(FabricError::DegeneratePath { length: total });
    }
    let mut out = Vec::with_capacity(samples);
    let mut seg = 0usize;
    for i in 0..samples {
        let target = total * i as f64 / (samples - 1) as f64;
        while seg + 2 < points.len() && s[seg + 1] < target {
            seg += 1;
        }
        let len = s[seg + 1] - s[seg];
        let t = if len > 0.0 { ((target - s[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(&points[seg] + (&points[seg + 1] - &points[seg]) * t);
    }
    Ok(out)
}

/// `K` points uniformly spaced in arc length along the position curve.
pub fn resample_arclength(traj: &Trajectory, samples: usize) -> Result<Vec<Vector>> {
    resample_points(&traj.positions(), samples)
}

/// The initial piece of a polyline with arc length `length`, ending on an
/// interpolated point. Fails if the polyline is shorter.
pub fn truncate_arclength(points: &[Vector], length: f64) -> Result<Vec<Vector>> {
    let s = cumulative_arclength(points);
    let total = s.last().copied().unwrap_or(0.0);
    if !(length > MIN_ARC_LENGTH) || total < length {
        return Err(FabricError::DegeneratePath { length: total });
    }
    let mut out = vec![points[0].clone()];
    for i in 1..points.len() {
        if s[i] >= length {
            let t = (length - s[i - 1]) / (s[i] - s[i - 1]);
            out.push(&points[i - 1] + (&points[i] - &points[i - 1]) * t);
            break;
        }
        out.push(points[i].clone());
    }
    Ok(out)
}

/// `maxᵢ ‖aᵢ − bᵢ‖`.
pub fn path_distance(a: &[Vector], b: &[Vector]) -> Result<f64> {
    check_dim("path distance", a.len(), b.len())?;
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        check_dim("path distance point", x.len(), y.len())?;
        worst = worst.max((x - y).norm());
    }
    Ok(worst)
}

/// Relative drift of a scalar sequence: `(maxₜ |e(t) − e(0)|, |e(T) − e(0)|) / e(0)`.
pub fn relative_drift(values: &[f64]) -> Result<(f64, f64)> {
    let e0 = values.first().copied().unwrap_or(0.0);
    if !(e0 > MIN_INITIAL_ENERGY) {
        return Err(FabricError::DegenerateEnergy { energy: e0 });
    }
    let max = values.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    let last = (values[values.len() - 1] - e0).abs() / e0;
    Ok((max, last))
}

/// Relative drift of the recorded `𝓛`.
pub fn energy_drift(traj: &Trajectory) -> Result<(f64, f64)> {
    relative_drift(&traj.energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{FnSystem, SystemKind};
    use std::f64::consts::PI;

    fn free() -> FnSystem {
        FnSystem::new(2, SystemKind::Generator, |s: &State| Ok(Accel::zeros(s.dim())))
    }

    fn harmonic() -> FnSystem {
        FnSystem::new(2, SystemKind::Composite, |s: &State| Ok(Accel(-&s.q)))
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn free_step_is_exact() {
        let s = step_rk4(&free(), &State::from_slices(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.1).unwrap();
        assert_eq!(s.q.as_slice(), &[0.1, 0.0]);
        assert_eq!(s.qd.as_slice(), &[1.0, 0.0]);
    }

    fn harmonic_error(dt: f64) -> f64 {
        let s0 = State::from_slices(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let (traj, _) = rollout(&harmonic(), &s0, dt, PI, None, None, None).unwrap();
        let t = *traj.times.last().unwrap();
        (traj.last().unwrap().q[0] - t.cos()).abs()
    }

    #[test]
    fn harmonic_matches_cosine() {
        let s0 = State::from_slices(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let sys = harmonic();
        let mut s = s0;
        let dt = PI / 3142.0;
        for _ in 0..3142 {
            s = step_rk4(&sys, &s, dt).unwrap();
        }
        assert!((s.q[0] + 1.0).abs() < 1e-6 && s.q[1].abs() < 1e-6);
        assert!(harmonic_error(1e-3) < 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // Steps that divide π exactly so the comparison time is identical.
        let e1 = harmonic_error(PI / 200.0);
        let e2 = harmonic_error(PI / 400.0);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn blow_up_reports_step() {
        let sys = FnSystem::new(1, SystemKind::Composite, |s: &State| Ok(Accel(s.qd.map(|x| x * x * 1e10))));
        let s0 = State::from_slices(&[0.0], &[1.0]).unwrap();
        let r = rollout(&sys, &s0, 0.1, 100.0, None, None, None);
        assert!(matches!(r, Err(FabricError::NonFiniteState { step }) if step > 0));
    }

    #[test]
    fn rest_stays_at_rest_and_times_are_uniform() {
        let s0 = State::from_slices(&[0.3, -0.2], &[0.0, 0.0]).unwrap();
        let (traj, conv) = rollout(&free(), &s0, 1e-3, 1.0, None, None, None).unwrap();
        assert!(!conv);
        assert_eq!(traj.len(), 1001);
        assert!(traj.states.iter().all(|s| *s == traj.states[0]));
        traj.validate().unwrap();
    }

    #[test]
    fn convergence_needs_hold() {
        let s0 = State::from_slices(&[0.3, -0.2], &[0.0, 0.0]).unwrap();
        let c = ConvergenceCriterion::default();
        let (traj, conv) = rollout(&free(), &s0, 1e-3, 1.0, None, None, Some(c)).unwrap();
        assert!(conv);
        assert_eq!(traj.len(), c.hold_steps);
    }

    #[test]
    fn resample_segment() {
        let pts = vec![v(&[0.0, 0.0]), v(&[0.25, 0.0]), v(&[1.0, 0.0])];
        let r = resample_points(&pts, 3).unwrap();
        assert_eq!(r, vec![v(&[0.0, 0.0]), v(&[0.5, 0.0]), v(&[1.0, 0.0])]);
        assert!(matches!(
            resample_points(&[v(&[0.0]), v(&[0.0])], 3),
            Err(FabricError::DegeneratePath { .. })
        ));
    }

    #[test]
    fn resample_quarter_circle() {
        let n = (PI / 2.0 / 1e-3).ceil() as usize;
        let pts: Vec<Vector> = (0..=n)
            .map(|i| {
                let t = (i as f64 * 1e-3).min(PI / 2.0);
                v(&[t.cos(), t.sin()])
            })
            .collect();
        let r = resample_points(&pts, 200).unwrap();
        let worst = r
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let t = PI / 2.0 * i as f64 / 199.0;
                (p - v(&[t.cos(), t.sin()])).norm()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn truncate_and_distance() {
        let pts = vec![v(&[0.0, 0.0]), v(&[2.0, 0.0])];
        let t = truncate_arclength(&pts, 1.0).unwrap();
        assert_eq!(t, vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]);
        assert!(truncate_arclength(&pts, 3.0).is_err());
        let b: Vec<Vector> = t.iter().map(|p| p + v(&[0.0, 0.01])).collect();
        assert!((path_distance(&t, &b).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(path_distance(&t, &t).unwrap(), 0.0);
        assert!(path_distance(&t, &b[..1]).is_err());
    }

    #[test]
    fn drift_values() {
        assert_eq!(relative_drift(&[2.0, 2.0, 2.0]).unwrap(), (0.0, 0.0));
        let (max, _) = relative_drift(&[1.0, 1.001]).unwrap();
        assert!((max - 1e-3).abs() < 1e-12);
        assert!(matches!(relative_drift(&[0.0, 1.0]), Err(FabricError::DegenerateEnergy { .. })));
    }
}
