use std::sync::Arc;

use crate::energization::{energize_eval, eta, Variant};
use crate::energy::{EnergyEval, FinslerEnergy};
use crate::error::{check_dim, FabricError, Result};
use crate::linalg::Vector;
use crate::potential::Potential;
use crate::state::{Accel, SecondOrderSystem, State, SystemKind};

use super::{NavigationPolicy, RegulatorGuard};

/// `η_σ(‖q̇‖) (−q̇ᵀ∂ψ/(Z + ε) − β) q̇` from an evaluated energy and gradient.
pub fn regulator_term(eval: &EnergyEval, qd: &Vector, grad: &Vector, beta: f64, guard: RegulatorGuard) -> Accel {
    let z = eval.z(qd);
    let coeff = -qd.dot(grad) / (z + guard.eps) - beta;
    Accel(qd * (coeff * eta(qd.norm(), guard.sigma)))
}

/// Energy regulator driving a forced fabric to the zero set of its policy.
pub fn regulator_theorem_main(
    energy: &dyn FinslerEnergy,
    state: &State,
    potential: &dyn Potential,
    beta: f64,
    guard: RegulatorGuard,
) -> Result<Accel> {
    let eval = energy.evaluate(state)?;
    let grad = potential.gradient(&state.q);
    check_dim("regulator potential", state.dim(), grad.len())?;
    Ok(regulator_term(&eval, &state.qd, &grad, beta, guard))
}

/// `q̈ = energize_𝓛[h + f] + regulator`, which damps the total energy
/// `𝓗 = 𝓛 + ψ` at rate `−β q̇ᵀM_L q̇`.
pub struct TotalEnergySystem {
    generator: Arc<dyn SecondOrderSystem>,
    policy: Arc<dyn NavigationPolicy>,
    energy: Arc<dyn FinslerEnergy>,
    potential: Arc<dyn Potential>,
    beta: f64,
    guard: RegulatorGuard,
}

impl TotalEnergySystem {
    pub fn new(
        generator: Arc<dyn SecondOrderSystem>,
        policy: Arc<dyn NavigationPolicy>,
        energy: Arc<dyn FinslerEnergy>,
        potential: Arc<dyn Potential>,
        beta: f64,
        guard: RegulatorGuard,
    ) -> Result<Self> {
        let n = generator.dim();
        check_dim("total-energy policy", n, policy.dim())?;
        check_dim("total-energy energy", n, energy.dim())?;
        check_dim("total-energy potential", n, potential.dim())?;
        guard.validate()?;
        if beta < 0.0 {
            return Err(FabricError::InvalidArgument("beta must be >= 0".into()));
        }
        Ok(Self {
            generator,
            policy,
            energy,
            potential,
            beta,
            guard,
        })
    }

    pub fn policy(&self) -> &Arc<dyn NavigationPolicy> {
        &self.policy
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn energy(&self) -> &Arc<dyn FinslerEnergy> {
        &self.energy
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl SecondOrderSystem for TotalEnergySystem {
    fn dim(&self) -> usize {
        self.generator.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let drive = self.generator.accel(state)?.0 + self.policy.accel(state)?.0;
        let eval = self.energy.evaluate(state)?;
        let steered = energize_eval(&drive, &eval, &state.qd, Variant::Vanishing { eps: self.guard.eps })?;
        let grad = self.potential.gradient(&state.q);
        let reg = regulator_term(&eval, &state.qd, &grad, self.beta, self.guard);
        Ok(steered.accel + reg)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Forced
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energization::energize_total;
    use crate::energy::{EuclideanEnergy, RiemannianEnergy};
    use crate::geometry::make_attractor_generator;
    use crate::linalg::Matrix;
    use crate::potential::QuadraticPotential;
    use crate::regulation::default_compatible_policy;
    use crate::state::SumSystem;

    fn st(q: &[f64], qd: &[f64]) -> State {
        State::from_slices(q, qd).unwrap()
    }

    #[test]
    fn regulator_examples() {
        let e = EuclideanEnergy::new(2);
        let guard = RegulatorGuard::default();
        // ψ = ½‖q‖² at q = (1,0): ∂ψ = (1,0) ⊥ q̇ = (0,1).
        let psi = QuadraticPotential::new(Vector::zeros(2), 1.0);
        let t = regulator_theorem_main(&e, &st(&[1.0, 0.0], &[0.0, 1.0]), &psi, 0.0, guard).unwrap();
        assert_eq!(t.norm(), 0.0);
        // ∂ψ = (2,0) (gain 2 at q = (1,0)), q̇ = (1,0), β = 1: (−2 − 1) q̇.
        let psi2 = QuadraticPotential::new(Vector::zeros(2), 2.0);
        let t = regulator_theorem_main(&e, &st(&[1.0, 0.0], &[1.0, 0.0]), &psi2, 1.0, guard).unwrap();
        assert!((t[0] + 3.0).abs() < 1e-10 && t[1] == 0.0);
    }

    #[test]
    fn total_energy_rate_is_minus_beta_z() {
        let e: Arc<dyn FinslerEnergy> = Arc::new(RiemannianEnergy::conformal(2, 0, 0.3).unwrap());
        let goal = Vector::from_vec(vec![0.5, -0.5]);
        let psi: Arc<dyn Potential> = Arc::new(QuadraticPotential::new(goal.clone(), 1.0));
        let policy = Arc::new(default_compatible_policy(psi.clone(), 1e-6, Matrix::identity(2, 2)).unwrap());
        let gen = Arc::new(make_attractor_generator(goal));
        let beta = 0.7;
        let sys = TotalEnergySystem::new(gen.clone(), policy.clone(), e.clone(), psi.clone(), beta, RegulatorGuard::default()).unwrap();
        let s = st(&[1.3, 0.4], &[-0.2, 0.9]);
        let a = sys.accel(&s).unwrap();
        let eval = e.evaluate(&s).unwrap();
        let hdot = s.qd.dot(&(&eval.metric * &a.0 + &eval.curvature + psi.gradient(&s.q)));
        let z = eval.z(&s.qd);
        assert!((hdot + beta * z).abs() < 1e-9, "{hdot} vs {}", -beta * z);

        // Same acceleration as energizing h + f against 𝓛 + ψ and damping with −βq̇.
        let hf = SumSystem::new(vec![gen as Arc<dyn SecondOrderSystem>, policy as Arc<dyn SecondOrderSystem>]).unwrap();
        let total = energize_total(&hf, e.as_ref(), psi.as_ref(), &s).unwrap();
        let expected = &total.accel.0 - &s.qd * beta;
        assert!((&a.0 - expected).amax() < 1e-10);
    }
}
