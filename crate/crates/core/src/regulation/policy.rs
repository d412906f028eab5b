use std::sync::Arc;

use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{spd_solve, Matrix, Vector};
use crate::potential::Potential;
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

use super::SystemMetric;

/// A finite acceleration term `f(q, q̇)` that steers across a fabric.
pub trait NavigationPolicy: SecondOrderSystem {
    /// Human-readable description of `{q | f(q, 0) = 0}`.
    fn zero_set(&self) -> String {
        "unspecified".to_string()
    }
}

impl<T: NavigationPolicy + ?Sized> NavigationPolicy for Arc<T> {
    fn zero_set(&self) -> String {
        (**self).zero_set()
    }
}

/// `f ≡ c`, a persistent push.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    pub value: Vector,
}

impl SecondOrderSystem for ConstantPolicy {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        check_dim("constant policy", self.value.len(), state.dim())?;
        Ok(Accel(self.value.clone()))
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

impl NavigationPolicy for ConstantPolicy {
    fn zero_set(&self) -> String {
        if self.value.iter().all(|v| *v == 0.0) {
            "everywhere".into()
        } else {
            "empty".into()
        }
    }
}

/// Soft-normalized negative gradient plus damping:
/// `f = −∂ψ / (‖∂ψ‖ + ε) − B q̇`.
pub struct DefaultCompatiblePolicy {
    potential: Arc<dyn Potential>,
    eps: f64,
    damping: Matrix,
}

impl DefaultCompatiblePolicy {
    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }
}

pub fn default_compatible_policy(potential: Arc<dyn Potential>, eps: f64, damping: Matrix) -> Result<DefaultCompatiblePolicy> {
    if eps <= 0.0 {
        return Err(FabricError::InvalidArgument("soft-norm eps must be > 0".into()));
    }
    let n = potential.dim();
    check_dim("policy damping rows", n, damping.nrows())?;
    check_dim("policy damping cols", n, damping.ncols())?;
    Ok(DefaultCompatiblePolicy {
        potential,
        eps,
        damping,
    })
}

impl SecondOrderSystem for DefaultCompatiblePolicy {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        check_dim("compatible policy", self.dim(), state.dim())?;
        let g = self.potential.gradient(&state.q);
        let pull = &g / -(g.norm() + self.eps);
        Ok(Accel(pull - &self.damping * &state.qd))
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

impl NavigationPolicy for DefaultCompatiblePolicy {
    fn zero_set(&self) -> String {
        "critical points of the potential".into()
    }
}

/// Damped potential force through a system metric:
/// `f = −M⁻¹(∂ψ + B q̇)`.
pub struct PotentialForcePolicy {
    pub metric: SystemMetric,
    pub potential: Arc<dyn Potential>,
    pub damping: Matrix,
}

impl SecondOrderSystem for PotentialForcePolicy {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let m = self.metric.metric(state)?;
        let tau = -(self.potential.gradient(&state.q) + &self.damping * &state.qd);
        spd_solve(&m, &tau).map(Accel)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

impl NavigationPolicy for PotentialForcePolicy {
    fn zero_set(&self) -> String {
        "critical points of the potential".into()
    }
}

/// Outcome of [`check_compatible`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub samples: usize,
    /// Sample indices violating either compatibility condition.
    pub violations: Vec<usize>,
    /// Samples where `∂ψ ≠ 0`.
    pub nonzero_gradient_samples: usize,
}

impl CompatibilityReport {
    pub fn is_compatible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.violations.len() as f64 / self.samples as f64
        }
    }
}

/// Norm below which `∂ψ` or `f(q, 0)` counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Verifies `∂ψ = 0 ⇔ f(q, 0) = 0` and `−∂ψᵀ f(q, 0) > 0` wherever `f(q, 0) ≠ 0`.
pub fn check_compatible(potential: &dyn Potential, policy: &dyn SecondOrderSystem, samples: &[Vector]) -> Result<CompatibilityReport> {
    let mut report = CompatibilityReport {
        samples: samples.len(),
        violations: Vec::new(),
        nonzero_gradient_samples: 0,
    };
    for (i, q) in samples.iter().enumerate() {
        let grad = potential.gradient(q);
        let f = policy.accel(&State::at_rest(q.clone())?)?;
        let grad_zero = grad.norm() <= ZERO_TOL;
        let f_zero = f.norm() <= ZERO_TOL;
        if !grad_zero {
            report.nonzero_gradient_samples += 1;
        }
        let ok = if grad_zero || f_zero {
            grad_zero == f_zero
        } else {
            -grad.dot(&f.0) > 0.0
        };
        if !ok {
            report.violations.push(i);
        }
    }
    Ok(report)
}
