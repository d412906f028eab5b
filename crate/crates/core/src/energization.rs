//! Energization: accelerating along the direction of motion so that a given
//! energy is conserved, turning any generator into a fabric.

use std::sync::Arc;

use crate::energy::{EnergyEval, FinslerEnergy};
use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{spd_sqrt_pair, Matrix, Vector};
use crate::potential::Potential;
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

/// Below this value of `q̇ᵀ M_L q̇` the exact formula is not evaluated.
pub const Z_EPS: f64 = 1e-12;

pub const DEFAULT_VANISHING_EPS: f64 = 1e-8;
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Which energization transform to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Exact,
    /// `α = −q̇ᵀ(M_L h + ξ_L) / (Z + ε)`.
    Vanishing { eps: f64 },
    /// Vanishing variant scaled by `η_σ(‖q̇‖)`.
    Robust { eps: f64, sigma: f64 },
}

impl Default for Variant {
    fn default() -> Self {
        Variant::Robust {
            eps: DEFAULT_VANISHING_EPS,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl Variant {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Variant::Exact => Ok(()),
            Variant::Vanishing { eps } if eps > 0.0 => Ok(()),
            Variant::Robust { eps, sigma } if eps > 0.0 && sigma > 0.0 => Ok(()),
            _ => Err(FabricError::InvalidArgument(format!("invalid energization parameters {self:?}"))),
        }
    }
}

/// Energized acceleration together with its coefficient along `q̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct Energized {
    pub accel: Accel,
    /// `α` for exact/vanishing; `η·α` for the robust variant.
    pub alpha: f64,
}

/// `η_σ(s) = 1 − exp(−s² / (2σ²))`.
pub fn eta(speed: f64, sigma: f64) -> f64 {
    -(-(speed * speed) / (2.0 * sigma * sigma)).exp_m1()
}

/// Applies a variant to an already evaluated generator and energy.
pub fn energize_eval(h: &Vector, eval: &EnergyEval, qd: &Vector, variant: Variant) -> Result<Energized> {
    check_dim("energize generator", qd.len(), h.len())?;
    let z = eval.z(qd);
    let work = qd.dot(&(&eval.metric * h + &eval.curvature));
    match variant {
        Variant::Exact => {
            if z <= Z_EPS {
                return Err(FabricError::DegenerateVelocity { z, threshold: Z_EPS });
            }
            let alpha = -work / z;
            Ok(Energized {
                accel: Accel(h + qd * alpha),
                alpha,
            })
        }
        Variant::Vanishing { eps } => {
            let alpha = -work / (z + eps);
            Ok(Energized {
                accel: Accel(h + qd * alpha),
                alpha,
            })
        }
        Variant::Robust { eps, sigma } => {
            let alpha = -work / (z + eps);
            let scale = eta(qd.norm(), sigma);
            Ok(Energized {
                accel: Accel((h + qd * alpha) * scale),
                alpha: scale * alpha,
            })
        }
    }
}

fn energize_with(h: &dyn SecondOrderSystem, energy: &dyn FinslerEnergy, state: &State, variant: Variant) -> Result<Energized> {
    let hv = h.accel(state)?;
    let eval = energy.evaluate(state)?;
    energize_eval(&hv, &eval, &state.qd, variant)
}

/// Exact energization `h + αq̇` with `α = −q̇ᵀ(M_L h + ξ_L)/(q̇ᵀ M_L q̇)`.
pub fn energize(h: &dyn SecondOrderSystem, energy: &dyn FinslerEnergy, state: &State) -> Result<Energized> {
    energize_with(h, energy, state, Variant::Exact)
}

pub fn energize_vanishing(h: &dyn SecondOrderSystem, energy: &dyn FinslerEnergy, state: &State, eps: f64) -> Result<Energized> {
    let v = Variant::Vanishing { eps };
    v.validate()?;
    energize_with(h, energy, state, v)
}

pub fn energize_robust(
    h: &dyn SecondOrderSystem,
    energy: &dyn FinslerEnergy,
    state: &State,
    eps: f64,
    sigma: f64,
) -> Result<Energized> {
    let v = Variant::Robust { eps, sigma };
    v.validate()?;
    energize_with(h, energy, state, v)
}

/// Energization with respect to the total energy `𝓛 + ψ`:
/// `α = −q̇ᵀ(M_L(h+f) + ξ_L + ∂ψ) / Z`.
pub fn energize_total(
    h_plus_f: &dyn SecondOrderSystem,
    energy: &dyn FinslerEnergy,
    potential: &dyn Potential,
    state: &State,
) -> Result<Energized> {
    let hv = h_plus_f.accel(state)?;
    let eval = energy.evaluate(state)?;
    let grad = potential.gradient(&state.q);
    check_dim("energize_total potential", state.dim(), grad.len())?;
    let z = eval.z(&state.qd);
    if z <= Z_EPS {
        return Err(FabricError::DegenerateVelocity { z, threshold: Z_EPS });
    }
    let alpha = -state.qd.dot(&(&eval.metric * &hv.0 + &eval.curvature + grad)) / z;
    Ok(Energized {
        accel: Accel(&hv.0 + &state.qd * alpha),
        alpha,
    })
}

/// A generator energized with respect to an energy: a fabric.
#[derive(Clone)]
pub struct EnergizedFabric {
    generator: Arc<dyn SecondOrderSystem>,
    energy: Arc<dyn FinslerEnergy>,
    variant: Variant,
}

impl EnergizedFabric {
    pub fn new(generator: Arc<dyn SecondOrderSystem>, energy: Arc<dyn FinslerEnergy>, variant: Variant) -> Result<Self> {
        check_dim("fabric energy", generator.dim(), energy.dim())?;
        variant.validate()?;
        Ok(Self {
            generator,
            energy,
            variant,
        })
    }

    pub fn generator(&self) -> &Arc<dyn SecondOrderSystem> {
        &self.generator
    }

    pub fn energy(&self) -> &Arc<dyn FinslerEnergy> {
        &self.energy
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn evaluate(&self, state: &State) -> Result<Energized> {
        energize_with(self.generator.as_ref(), self.energy.as_ref(), state, self.variant)
    }

    pub fn alpha(&self, state: &State) -> Result<f64> {
        self.evaluate(state).map(|e| e.alpha)
    }
}

impl SecondOrderSystem for EnergizedFabric {
    fn dim(&self) -> usize {
        self.generator.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        self.evaluate(state).map(|e| e.accel)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Fabric
    }
}

/// `P_⊥ = M^{-½}[I − v̂v̂ᵀ]M^{½}` with `v = M^{½} q̇`.
pub fn perpendicular_projector(metric: &Matrix, qd: &Vector) -> Result<Matrix> {
    let (root, inv_root) = spd_sqrt_pair(metric)?;
    let v = &root * qd;
    let norm = v.norm();
    if norm * norm <= Z_EPS {
        return Err(FabricError::DegenerateVelocity {
            z: norm * norm,
            threshold: Z_EPS,
        });
    }
    let vh = v / norm;
    let n = qd.len();
    Ok(inv_root * (Matrix::identity(n, n) - &vh * vh.transpose()) * root)
}

/// The pieces of a forced geometric fabric `energize(h) + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationDecomposition {
    /// Exchange rate `γ = q̇ᵀM_L f / q̇ᵀM_L q̇`.
    pub gamma: f64,
    /// `energize(h) + f`.
    pub direct: Accel,
    /// `energize(h)`.
    pub fabric: Accel,
    /// Steered fabric `energize(h + f)`.
    pub steered: Accel,
    /// Zero-work steering `P_⊥ f`.
    pub steering: Accel,
    velocity: Vector,
}

impl NavigationDecomposition {
    /// `energize(h + f) + γq̇`.
    pub fn steered_form(&self) -> Accel {
        Accel(&self.steered.0 + &self.velocity * self.gamma)
    }

    /// `(energize(h) + γq̇) + P_⊥ f`.
    pub fn projected_form(&self) -> Accel {
        Accel(&self.fabric.0 + &self.velocity * self.gamma + &self.steering.0)
    }
}

/// Splits navigation across an exact-energized fabric into steering and
/// energy regulation.
pub fn decompose_navigation(h: &Vector, f: &Vector, eval: &EnergyEval, qd: &Vector) -> Result<NavigationDecomposition> {
    check_dim("decompose policy", qd.len(), f.len())?;
    let fabric = energize_eval(h, eval, qd, Variant::Exact)?;
    let steered = energize_eval(&(h + f), eval, qd, Variant::Exact)?;
    let z = eval.z(qd);
    let gamma = qd.dot(&(&eval.metric * f)) / z;
    let steering = perpendicular_projector(&eval.metric, qd)? * f;
    Ok(NavigationDecomposition {
        gamma,
        direct: Accel(&fabric.accel.0 + f),
        fabric: fabric.accel,
        steered: steered.accel,
        steering: Accel(steering),
        velocity: qd.clone(),
    })
}
