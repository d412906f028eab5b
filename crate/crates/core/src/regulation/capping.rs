use std::sync::Arc;

use crate::energization::{eta, EnergizedFabric};
use crate::energy::{EnergyEval, FinslerEnergy};
use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{check_spd, spd_solve, Matrix, Vector};
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

use super::gate::{validate_gate, GateFunction, GateVariant};
use super::{NavigationPolicy, RegulatorGuard};

/// `λ = max{0, q̇ᵀM_L f / (q̇ᵀBq̇ + γ(𝓛))}` from an evaluated energy.
pub fn cap1_lambda(eval: &EnergyEval, qd: &Vector, f: &Vector, damping: &Matrix, gate: &dyn GateFunction) -> Result<f64> {
    let denom = qd.dot(&(damping * qd)) + gate.value(eval.value);
    if !(denom > 0.0) {
        return Err(FabricError::DegenerateDenominator {
            context: "energy cap 1",
            value: denom,
        });
    }
    Ok((qd.dot(&(&eval.metric * f)) / denom).max(0.0))
}

pub fn energy_cap_lambda_1(
    energy: &dyn FinslerEnergy,
    state: &State,
    f: &Accel,
    damping: &Matrix,
    gate: &dyn GateFunction,
) -> Result<f64> {
    check_dim("energy cap 1 policy", state.dim(), f.len())?;
    let eval = energy.evaluate(state)?;
    cap1_lambda(&eval, &state.qd, f, damping, gate)
}

/// Regulated term of the second capping design.
#[derive(Debug, Clone, PartialEq)]
pub struct Cap2Term {
    /// `λ = γ(𝓛) α_f`.
    pub lambda: f64,
    /// `η_σ(‖q̇‖) (λ − β) q̇`.
    pub term: Accel,
}

pub fn cap2_term(eval: &EnergyEval, qd: &Vector, f: &Vector, gate: &dyn GateFunction, beta: f64, guard: RegulatorGuard) -> Cap2Term {
    let z = eval.z(qd);
    let alpha_f = -qd.dot(&(&eval.metric * f)) / (z + guard.eps);
    let lambda = gate.value(eval.value) * alpha_f;
    let scale = eta(qd.norm(), guard.sigma);
    Cap2Term {
        lambda,
        term: Accel(qd * ((lambda - beta) * scale)),
    }
}

pub fn energy_cap_2(
    energy: &dyn FinslerEnergy,
    state: &State,
    f: &Accel,
    gate: &dyn GateFunction,
    beta: f64,
    guard: RegulatorGuard,
) -> Result<Cap2Term> {
    check_dim("energy cap 2 policy", state.dim(), f.len())?;
    let eval = energy.evaluate(state)?;
    Ok(cap2_term(&eval, &state.qd, f, gate, beta, guard))
}

/// `q̈ = h̃ + f − λ M_L⁻¹ B q̇` with the first capping `λ`.
pub struct CappedFabric1 {
    fabric: EnergizedFabric,
    policy: Arc<dyn NavigationPolicy>,
    damping: Matrix,
    gate: Arc<dyn GateFunction>,
}

impl CappedFabric1 {
    pub fn new(
        fabric: EnergizedFabric,
        policy: Arc<dyn NavigationPolicy>,
        damping: Matrix,
        gate: Arc<dyn GateFunction>,
    ) -> Result<Self> {
        check_dim("capping policy", fabric.dim(), policy.dim())?;
        check_dim("capping damping", fabric.dim(), damping.nrows())?;
        check_spd(&damping)?;
        validate_gate(gate.as_ref(), GateVariant::Capping1)?;
        Ok(Self {
            fabric,
            policy,
            damping,
            gate,
        })
    }

    pub fn lambda(&self, state: &State) -> Result<f64> {
        let f = self.policy.accel(state)?;
        energy_cap_lambda_1(self.fabric.energy().as_ref(), state, &f, &self.damping, self.gate.as_ref())
    }
}

impl SecondOrderSystem for CappedFabric1 {
    fn dim(&self) -> usize {
        self.fabric.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let fabric = self.fabric.accel(state)?;
        let f = self.policy.accel(state)?;
        let eval = self.fabric.energy().evaluate(state)?;
        let lambda = cap1_lambda(&eval, &state.qd, &f, &self.damping, self.gate.as_ref())?;
        let brake = if lambda > 0.0 {
            spd_solve(&eval.metric, &(&self.damping * &state.qd))? * lambda
        } else {
            Vector::zeros(state.dim())
        };
        Ok(Accel(fabric.0 + f.0 - brake))
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

/// `q̈ = h̃ + f + λq̇ − βq̇` with the second capping `λ`.
pub struct CappedFabric2 {
    fabric: EnergizedFabric,
    policy: Arc<dyn NavigationPolicy>,
    gate: Arc<dyn GateFunction>,
    beta: f64,
    guard: RegulatorGuard,
}

impl CappedFabric2 {
    pub fn new(
        fabric: EnergizedFabric,
        policy: Arc<dyn NavigationPolicy>,
        gate: Arc<dyn GateFunction>,
        beta: f64,
        beta_max: f64,
        guard: RegulatorGuard,
    ) -> Result<Self> {
        check_dim("capping policy", fabric.dim(), policy.dim())?;
        validate_gate(gate.as_ref(), GateVariant::Capping2)?;
        guard.validate()?;
        if !(0.0..=beta_max).contains(&beta) {
            return Err(FabricError::InvalidArgument(format!("beta {beta} outside [0, {beta_max}]")));
        }
        Ok(Self {
            fabric,
            policy,
            gate,
            beta,
            guard,
        })
    }
}

impl SecondOrderSystem for CappedFabric2 {
    fn dim(&self) -> usize {
        self.fabric.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let fabric = self.fabric.accel(state)?;
        let f = self.policy.accel(state)?;
        let eval = self.fabric.energy().evaluate(state)?;
        let t = cap2_term(&eval, &state.qd, &f, self.gate.as_ref(), self.beta, self.guard);
        Ok(Accel(fabric.0 + f.0 + t.term.0))
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energization::Variant;
    use crate::energy::{energy_rate, EuclideanEnergy};
    use crate::geometry::make_zero_generator;
    use crate::regulation::{ConstantPolicy, LinearCapGate, LinearRampGate};

    fn st(q: &[f64], qd: &[f64]) -> State {
        State::from_slices(q, qd).unwrap()
    }

    /// Euclidean state with 𝓛 = ½‖q̇‖² chosen so that `gate(𝓛)` takes a given value.
    #[test]
    fn cap1_case_table() {
        let e = EuclideanEnergy::new(2);
        let b = Matrix::identity(2, 2);
        let gate = LinearCapGate {
            gamma_max: 1.0,
            energy_max: 0.5,
        };
        // Moving against f: λ = 0.
        let s = st(&[0.0, 0.0], &[1.0, 0.0]);
        let lam = energy_cap_lambda_1(&e, &s, &Accel::from_slice(&[-1.0, 0.0]), &b, &gate).unwrap();
        assert_eq!(lam, 0.0);
        // At the cap (𝓛 = 0.5 = 𝓛_max, γ = 0): λ = 2 and 𝓛̇ = 0.
        let f = Accel::from_slice(&[2.0, 0.0]);
        let lam = energy_cap_lambda_1(&e, &s, &f, &b, &gate).unwrap();
        assert_eq!(lam, 2.0);
        let accel = Accel(&f.0 - &s.qd * lam);
        assert_eq!(energy_rate(&e, &s, &accel).unwrap(), 0.0);
    }

    #[test]
    fn cap1_unit_gate_value() {
        // γ(𝓛) = 1 at q̇ = (1,0): λ = 2/(1+1) = 1, 𝓛̇ = q̇ᵀf − λ q̇ᵀBq̇ = 2 − 1 = 1.
        struct One;
        impl GateFunction for One {
            fn value(&self, _: f64) -> f64 {
                1.0
            }
            fn energy_max(&self) -> f64 {
                1.0
            }
            fn variant(&self) -> GateVariant {
                GateVariant::Capping1
            }
        }
        let e = EuclideanEnergy::new(2);
        let s = st(&[0.0, 0.0], &[1.0, 0.0]);
        let f = Accel::from_slice(&[2.0, 0.0]);
        let lam = energy_cap_lambda_1(&e, &s, &f, &Matrix::identity(2, 2), &One).unwrap();
        assert_eq!(lam, 1.0);
        let rate = energy_rate(&e, &s, &Accel(&f.0 - &s.qd * lam)).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn cap1_bad_gate_denominator() {
        struct Negative;
        impl GateFunction for Negative {
            fn value(&self, _: f64) -> f64 {
                -5.0
            }
            fn energy_max(&self) -> f64 {
                1.0
            }
            fn variant(&self) -> GateVariant {
                GateVariant::Capping1
            }
        }
        let e = EuclideanEnergy::new(2);
        let s = st(&[0.0, 0.0], &[1.0, 0.0]);
        let r = energy_cap_lambda_1(&e, &s, &Accel::from_slice(&[1.0, 0.0]), &Matrix::identity(2, 2), &Negative);
        assert!(matches!(r, Err(FabricError::DegenerateDenominator { .. })));
    }

    #[test]
    fn cap2_examples() {
        let e = EuclideanEnergy::new(2);
        let gate = LinearRampGate { energy_max: 0.5 };
        let guard = RegulatorGuard::default();
        // 𝓛 = 0.5 = 𝓛_max so γ = 1; with β = 0 the regulated rate vanishes.
        let s = st(&[0.0, 0.0], &[0.6, 0.8]);
        let f = Accel::from_slice(&[1.0, -3.0]);
        let t = energy_cap_2(&e, &s, &f, &gate, 0.0, guard).unwrap();
        let rate = energy_rate(&e, &s, &Accel(&f.0 + &t.term.0)).unwrap();
        assert!(rate.abs() < 1e-9);
        // With β = 0.5 the rate is −β q̇ᵀM q̇.
        let t = energy_cap_2(&e, &s, &f, &gate, 0.5, guard).unwrap();
        let rate = energy_rate(&e, &s, &Accel(&f.0 + &t.term.0)).unwrap();
        assert!((rate + 0.5).abs() < 1e-9);
        // γ = 0 (𝓛 = 0 at rest) and β = 0: no term.
        let rest = st(&[0.0, 0.0], &[0.0, 0.0]);
        let t = energy_cap_2(&e, &rest, &f, &gate, 0.0, guard).unwrap();
        assert_eq!(t.term.norm(), 0.0);
    }

    #[test]
    fn capped_systems_validate_gates() {
        let e: Arc<dyn FinslerEnergy> = Arc::new(EuclideanEnergy::new(2));
        let fabric = EnergizedFabric::new(Arc::new(make_zero_generator(2)), e, Variant::default()).unwrap();
        let policy: Arc<dyn NavigationPolicy> = Arc::new(ConstantPolicy {
            value: Vector::from_vec(vec![1.0, 0.0]),
        });
        assert!(CappedFabric1::new(fabric.clone(), policy.clone(), Matrix::identity(2, 2), Arc::new(LinearRampGate::default())).is_err());
        assert!(CappedFabric2::new(fabric.clone(), policy.clone(), Arc::new(LinearCapGate::default()), 0.0, 10.0, RegulatorGuard::default()).is_err());
        assert!(CappedFabric2::new(fabric, policy, Arc::new(LinearRampGate::default()), 11.0, 10.0, RegulatorGuard::default()).is_err());
    }
}
