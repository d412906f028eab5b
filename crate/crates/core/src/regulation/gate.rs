use crate::error::{FabricError, Result};

/// Which capping regulator a gate is shaped for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateVariant {
    /// `γ(0) = γ_max`, `γ(𝓛_max) = 0`.
    Capping1,
    /// `γ(0) = 0`, `γ(𝓛_max) = 1`, range in `[0, 1]`.
    Capping2,
}

/// Scalar schedule `γ(𝓛)` on the fabric energy.
pub trait GateFunction: Send + Sync {
    fn value(&self, energy: f64) -> f64;

    fn energy_max(&self) -> f64;

    fn variant(&self) -> GateVariant;
}

/// `γ(𝓛) = γ_max · max(0, 1 − 𝓛/𝓛_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCapGate {
    pub gamma_max: f64,
    pub energy_max: f64,
}

impl Default for LinearCapGate {
    fn default() -> Self {
        Self {
            gamma_max: 1.0,
            energy_max: 1.0,
        }
    }
}

impl GateFunction for LinearCapGate {
    fn value(&self, energy: f64) -> f64 {
        self.gamma_max * (1.0 - energy / self.energy_max).max(0.0)
    }

    fn energy_max(&self) -> f64 {
        self.energy_max
    }

    fn variant(&self) -> GateVariant {
        GateVariant::Capping1
    }
}

/// `γ(𝓛) = clamp(𝓛/𝓛_max, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRampGate {
    pub energy_max: f64,
}

impl Default for LinearRampGate {
    fn default() -> Self {
        Self { energy_max: 1.0 }
    }
}

impl GateFunction for LinearRampGate {
    fn value(&self, energy: f64) -> f64 {
        (energy / self.energy_max).clamp(0.0, 1.0)
    }

    fn energy_max(&self) -> f64 {
        self.energy_max
    }

    fn variant(&self) -> GateVariant {
        GateVariant::Capping2
    }
}

/// Checks the boundary values (exactly) and, for variant 2, the range on a
/// grid over `[0, 2·𝓛_max]`.
pub fn validate_gate(gate: &dyn GateFunction, expected: GateVariant) -> Result<()> {
    let lmax = gate.energy_max();
    if !(lmax > 0.0 && lmax.is_finite()) {
        return Err(FabricError::InvalidArgument(format!("gate energy_max {lmax} must be > 0")));
    }
    if gate.variant() != expected {
        return Err(FabricError::InvalidArgument(format!(
            "gate is shaped for {:?}, regulator needs {expected:?}",
            gate.variant()
        )));
    }
    let (g0, gmax) = (gate.value(0.0), gate.value(lmax));
    let ok = match expected {
        GateVariant::Capping1 => g0 > 0.0 && gmax == 0.0,
        GateVariant::Capping2 => {
            g0 == 0.0
                && gmax == 1.0
                && (0..=200).all(|i| {
                    let g = gate.value(2.0 * lmax * i as f64 / 200.0);
                    (0.0..=1.0).contains(&g)
                })
        }
    };
    if ok {
        Ok(())
    } else {
        Err(FabricError::InvalidArgument(format!(
            "gate boundary values violated: γ(0) = {g0}, γ(𝓛_max) = {gmax}"
        )))
    }
}
