//! Navigation policies, dampers and energy regulators acting on fabrics.

mod capping;
mod convergence;
mod gate;
mod monitor;
mod policy;

use std::sync::Arc;

pub use capping::{cap1_lambda, cap2_term, energy_cap_2, energy_cap_lambda_1, Cap2Term, CappedFabric1, CappedFabric2};
pub use convergence::{regulator_term, regulator_theorem_main, TotalEnergySystem};
pub use gate::{validate_gate, GateFunction, GateVariant, LinearCapGate, LinearRampGate};
pub use monitor::{monitor_trajectory, DampedPotentialSystem, LyapunovMonitor, MonitorSample, MonitorSummary};
pub use policy::{
    check_compatible, default_compatible_policy, CompatibilityReport, ConstantPolicy, DefaultCompatiblePolicy,
    NavigationPolicy, PotentialForcePolicy,
};

use crate::energization::EnergizedFabric;
use crate::energy::FinslerEnergy;
use crate::error::{check_dim, FabricError, Result};
use crate::geometry::TransformTree;
use crate::linalg::{check_spd, spd_solve, Matrix};
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

pub const DEFAULT_ENERGY_MAX: f64 = 1.0;
pub const DEFAULT_GAMMA_MAX: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_BETA_MAX: f64 = 10.0;
pub const DEFAULT_SOFTNORM_EPS: f64 = 1e-6;

/// Regularization of the regulators that divide by `Z = q̇ᵀM_L q̇`:
/// the denominator becomes `Z + eps` and the term is scaled by `η_σ(‖q̇‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorGuard {
    pub eps: f64,
    pub sigma: f64,
}

impl Default for RegulatorGuard {
    fn default() -> Self {
        Self { eps: 1e-12, sigma: 1e-6 }
    }
}

impl RegulatorGuard {
    pub fn validate(&self) -> Result<()> {
        if self.eps > 0.0 && self.sigma > 0.0 {
            Ok(())
        } else {
            Err(FabricError::InvalidArgument(format!("invalid regulator guard {self:?}")))
        }
    }
}

/// Matrix damper `f_damp = −M_L⁻¹ B q̇`.
pub fn damper_matrix(energy: &dyn FinslerEnergy, state: &State, damping: &Matrix) -> Result<Accel> {
    check_dim("damper matrix", state.dim(), damping.nrows())?;
    check_spd(damping)?;
    let eval = energy.evaluate(state)?;
    spd_solve(&eval.metric, &-(damping * &state.qd)).map(Accel)
}

/// Scalar damper `−β q̇`.
pub fn damper_scalar(state: &State, beta: f64) -> Accel {
    Accel(&state.qd * -beta)
}

/// A damping term added to a fabric.
#[derive(Debug, Clone, PartialEq)]
pub enum Damper {
    Matrix(Matrix),
    Scalar(f64),
}

/// `energize(h) + f_damp`.
pub struct DampedFabric {
    fabric: EnergizedFabric,
    damper: Damper,
}

impl DampedFabric {
    pub fn new(fabric: EnergizedFabric, damper: Damper) -> Result<Self> {
        match &damper {
            Damper::Matrix(b) => {
                check_dim("damper matrix", fabric.dim(), b.nrows())?;
                check_spd(b)?;
            }
            Damper::Scalar(beta) if *beta < 0.0 => {
                return Err(FabricError::InvalidArgument("scalar damping must be >= 0".into()));
            }
            Damper::Scalar(_) => {}
        }
        Ok(Self { fabric, damper })
    }

    pub fn fabric(&self) -> &EnergizedFabric {
        &self.fabric
    }
}

impl SecondOrderSystem for DampedFabric {
    fn dim(&self) -> usize {
        self.fabric.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let base = self.fabric.accel(state)?;
        let damp = match &self.damper {
            Damper::Matrix(b) => damper_matrix(self.fabric.energy().as_ref(), state, b)?,
            Damper::Scalar(beta) => damper_scalar(state, *beta),
        };
        Ok(base + damp)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

/// `energize(h) + f` with an arbitrary navigation policy.
pub struct ForcedFabric {
    pub fabric: EnergizedFabric,
    pub policy: Arc<dyn NavigationPolicy>,
}

impl SecondOrderSystem for ForcedFabric {
    fn dim(&self) -> usize {
        self.fabric.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        Ok(self.fabric.accel(state)? + self.policy.accel(state)?)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

/// Source of the system metric `M` used in force form.
#[derive(Clone)]
pub enum SystemMetric {
    Constant(Matrix),
    /// The energy tensor `M_L` of an energy.
    Energy(Arc<dyn FinslerEnergy>),
    /// Root metric of a transform tree.
    Tree(Arc<TransformTree>),
}

impl SystemMetric {
    pub fn metric(&self, state: &State) -> Result<Matrix> {
        match self {
            SystemMetric::Constant(m) => Ok(m.clone()),
            SystemMetric::Energy(e) => Ok(e.evaluate(state)?.metric),
            SystemMetric::Tree(t) => Ok(t.root_spec(state)?.metric),
        }
    }
}
