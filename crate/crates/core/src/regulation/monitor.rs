use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::energization::{EnergizedFabric, Z_EPS};
use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{check_spd, eigen_range, symmetrize, Matrix, Vector};
use crate::potential::Potential;
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

use super::{PotentialForcePolicy, SystemMetric};

/// `q̈ = h̃ − M⁻¹(∂ψ + B q̇) − β q̇` for a fabric `h̃` with system metric `M`.
pub struct DampedPotentialSystem {
    fabric: EnergizedFabric,
    force: PotentialForcePolicy,
    beta: f64,
}

impl DampedPotentialSystem {
    pub fn new(fabric: EnergizedFabric, metric: SystemMetric, potential: Arc<dyn Potential>, damping: Matrix, beta: f64) -> Result<Self> {
        let n = fabric.dim();
        check_dim("damped potential", n, potential.dim())?;
        check_dim("damped potential damping", n, damping.nrows())?;
        if beta < 0.0 {
            return Err(FabricError::InvalidArgument("beta must be >= 0".into()));
        }
        Ok(Self {
            fabric,
            force: PotentialForcePolicy {
                metric,
                potential,
                damping,
            },
            beta,
        })
    }

    pub fn fabric(&self) -> &EnergizedFabric {
        &self.fabric
    }

    pub fn metric(&self) -> &SystemMetric {
        &self.force.metric
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.force.potential
    }

    pub fn damping(&self) -> &Matrix {
        &self.force.damping
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The forcing term `−M⁻¹(∂ψ + Bq̇)` alone.
    pub fn policy(&self) -> &PotentialForcePolicy {
        &self.force
    }
}

impl SecondOrderSystem for DampedPotentialSystem {
    fn dim(&self) -> usize {
        self.fabric.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let fabric = self.fabric.accel(state)?;
        let f = self.force.accel(state)?;
        Ok(Accel(fabric.0 + f.0 - &state.qd * self.beta))
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

/// One monitor observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSample {
    /// `α₀ = (−q̇ᵀM h − ½ q̇ᵀṀq̇) / q̇ᵀMq̇`.
    pub alpha0: f64,
    /// `α̃ = α_𝓛 − α₀`.
    pub residual: f64,
    /// `λ_min(B + βM) − λ_max(α̃ M)`.
    pub margin: f64,
}

/// Aggregate over a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSummary {
    pub steps: usize,
    pub positive_steps: usize,
    pub min_margin: f64,
    pub max_abs_residual: f64,
}

impl MonitorSummary {
    pub fn positive_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.positive_steps as f64 / self.steps as f64
        }
    }
}

/// Tracks the split `α_𝓛 = α₀ + α̃` and the damping margin along a rollout.
/// `Ṁ` is a backward difference over consecutive observations.
pub struct LyapunovMonitor {
    damping: Matrix,
    beta: f64,
    dt: f64,
    prev_metric: Option<Matrix>,
    summary: MonitorSummary,
}

impl LyapunovMonitor {
    pub fn new(damping: Matrix, beta: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(FabricError::InvalidArgument("dt must be > 0".into()));
        }
        Ok(Self {
            damping,
            beta,
            dt,
            prev_metric: None,
            summary: MonitorSummary {
                steps: 0,
                positive_steps: 0,
                min_margin: f64::INFINITY,
                max_abs_residual: 0.0,
            },
        })
    }

    /// `fabric_part` is the fabric acceleration with its `α q̇` component
    /// removed; `alpha` is the energization coefficient.
    pub fn observe(&mut self, qd: &Vector, metric: &Matrix, fabric_part: &Vector, alpha: f64) -> Result<MonitorSample> {
        check_spd(metric)?;
        let metric_dot = match &self.prev_metric {
            Some(prev) => (metric - prev) / self.dt,
            None => Matrix::zeros(metric.nrows(), metric.ncols()),
        };
        self.prev_metric = Some(metric.clone());

        let z = qd.dot(&(metric * qd));
        let (alpha0, residual) = if z > Z_EPS {
            let a0 = (-qd.dot(&(metric * fabric_part)) - 0.5 * qd.dot(&(&metric_dot * qd))) / z;
            (a0, alpha - a0)
        } else {
            (0.0, 0.0)
        };

        let (m_min, m_max) = eigen_range(metric);
        let scaled_max = if residual >= 0.0 { residual * m_max } else { residual * m_min };
        let combined = symmetrize(&(&self.damping + metric * self.beta));
        let b_min = SymmetricEigen::new(combined).eigenvalues.min();
        let margin = b_min - scaled_max;

        self.summary.steps += 1;
        if margin > 0.0 {
            self.summary.positive_steps += 1;
        }
        self.summary.min_margin = self.summary.min_margin.min(margin);
        self.summary.max_abs_residual = self.summary.max_abs_residual.max(residual.abs());
        Ok(MonitorSample {
            alpha0,
            residual,
            margin,
        })
    }

    pub fn summary(&self) -> MonitorSummary {
        self.summary
    }
}

/// Runs the monitor over a recorded sequence of states of a damped-potential
/// system sampled every `dt`.
pub fn monitor_trajectory(system: &DampedPotentialSystem, states: &[State], dt: f64) -> Result<MonitorSummary> {
    let mut monitor = LyapunovMonitor::new(system.damping().clone(), system.beta(), dt)?;
    for s in states {
        let energized = system.fabric().evaluate(s)?;
        let fabric_part = &energized.accel.0 - &s.qd * energized.alpha;
        let m = system.metric().metric(s)?;
        monitor.observe(&s.qd, &m, &fabric_part, energized.alpha)?;
    }
    Ok(monitor.summary())
}
