//! Turns a validated [`Scenario`] into runnable systems.

use std::sync::Arc;

use fabric_core::energy::{EuclideanEnergy, FinslerEnergy, RiemannianEnergy};
use fabric_core::geometry::{
    make_attractor_generator, make_barrier_generator, make_constant_generator, make_tree_generator, make_zero_generator,
    ClearanceLeaf, Homogeneity, SphereDistanceMap, TaskMap, TransformTree,
};
use fabric_core::potential::{GaussianBump, Potential, QuadraticPotential, SumPotential};
use fabric_core::regulation::{
    default_compatible_policy, CappedFabric1, CappedFabric2, ConstantPolicy, DampedFabric, DampedPotentialSystem, Damper,
    ForcedFabric, LinearCapGate, LinearRampGate, NavigationPolicy, PotentialForcePolicy, SystemMetric, TotalEnergySystem,
};
use fabric_core::state::SumSystem;
use fabric_core::{EnergizedFabric, FabricError, Matrix, SecondOrderSystem, Spec, State, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};
use crate::scenario::{EnergySpec, GeneratorSpec, MetricSpec, PolicySpec, PotentialSpec, RegulatorSpec, Scenario};

/// Everything a run needs, built once per scenario.
pub struct Assembly {
    pub system: Arc<dyn SecondOrderSystem>,
    pub fabric: EnergizedFabric,
    pub generator: Arc<dyn SecondOrderSystem>,
    pub energy: Arc<dyn FinslerEnergy>,
    pub potential: Option<Arc<dyn Potential>>,
    pub policy: Option<Arc<dyn NavigationPolicy>>,
    /// Task maps used by the generator, for derivative checks.
    pub task_maps: Vec<Arc<dyn TaskMap>>,
    /// Present when the scenario is in damped-potential form.
    pub damped_potential: Option<Arc<DampedPotentialSystem>>,
}

fn config(field: &str, e: FabricError) -> HarnessError {
    HarnessError::validation(field, e.to_string())
}

pub fn build_potential(spec: &PotentialSpec) -> Result<Arc<dyn Potential>> {
    Ok(match spec {
        PotentialSpec::Quadratic { center, gain } => Arc::new(QuadraticPotential::new(center.clone(), *gain)),
        PotentialSpec::Gaussian { center, height, width } => Arc::new(GaussianBump::new(center.clone(), *height, *width)),
        PotentialSpec::Sum(terms) => {
            let built = terms.iter().map(build_potential).collect::<Result<Vec<_>>>()?;
            Arc::new(SumPotential::new(built).map_err(|e| config("potential", e))?)
        }
    })
}

pub fn build_energy(spec: &EnergySpec, n: usize) -> Result<Arc<dyn FinslerEnergy>> {
    Ok(match spec {
        EnergySpec::Euclidean => Arc::new(EuclideanEnergy::new(n)),
        EnergySpec::ConstantMetric { metric } => {
            Arc::new(RiemannianEnergy::constant(metric.clone()).map_err(|e| config("energy", e))?)
        }
        EnergySpec::Conformal { axis, gain } => {
            Arc::new(RiemannianEnergy::conformal(n, *axis, *gain).map_err(|e| config("energy", e))?)
        }
    })
}

fn build_generator(spec: &GeneratorSpec, n: usize) -> Result<(Arc<dyn SecondOrderSystem>, Vec<Arc<dyn TaskMap>>)> {
    Ok(match spec {
        GeneratorSpec::Zero => (Arc::new(make_zero_generator(n)), Vec::new()),
        GeneratorSpec::Barrier { field } => (Arc::new(make_barrier_generator(build_potential(field)?)), Vec::new()),
        GeneratorSpec::Attractor { goal } => (Arc::new(make_attractor_generator(goal.clone())), Vec::new()),
        GeneratorSpec::Constant { value } => (Arc::new(make_constant_generator(value.clone())), Vec::new()),
        GeneratorSpec::Tree {
            obstacles,
            metric_gain,
            accel_gain,
        } => {
            let base = Spec::new(Matrix::identity(n, n), Vector::zeros(n)).map_err(|e| config("generator", e))?;
            let mut tree = TransformTree::new(base);
            let leaf = Arc::new(ClearanceLeaf {
                metric_gain: *metric_gain,
                accel_gain: *accel_gain,
            });
            let mut maps: Vec<Arc<dyn TaskMap>> = Vec::new();
            for o in obstacles {
                let map: Arc<dyn TaskMap> = Arc::new(SphereDistanceMap {
                    center: o.center.clone(),
                    radius: o.radius,
                });
                tree.add_branch(map.clone(), leaf.clone()).map_err(|e| config("generator", e))?;
                maps.push(map);
            }
            (Arc::new(make_tree_generator(Arc::new(tree), Homogeneity::Hd2)), maps)
        }
    })
}

/// Initial state with seeded jitter applied.
pub fn initial_state(scenario: &Scenario) -> State {
    let mut s = scenario.initial_state.clone();
    if scenario.position_jitter > 0.0 || scenario.velocity_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        for x in s.q.iter_mut() {
            *x += scenario.position_jitter * rng.random_range(-1.0..1.0);
        }
        for x in s.qd.iter_mut() {
            *x += scenario.velocity_jitter * rng.random_range(-1.0..1.0);
        }
    }
    s
}

pub fn assemble(scenario: &Scenario) -> Result<Assembly> {
    let n = scenario.dimension;
    let (generator, task_maps) = build_generator(&scenario.generator, n)?;
    let energy = build_energy(&scenario.energy, n)?;
    let potential = scenario.potential.as_ref().map(build_potential).transpose()?;
    let fabric = EnergizedFabric::new(generator.clone(), energy.clone(), scenario.energization).map_err(|e| config("energization", e))?;

    let mut potential_force = None;
    let policy: Option<Arc<dyn NavigationPolicy>> = match &scenario.policy {
        PolicySpec::None => None,
        PolicySpec::Constant { value } => Some(Arc::new(ConstantPolicy { value: value.clone() })),
        PolicySpec::DefaultCompatible { eps, damping } => {
            let psi = potential.clone().expect("validated");
            Some(Arc::new(default_compatible_policy(psi, *eps, damping.clone()).map_err(|e| config("policy", e))?))
        }
        PolicySpec::PotentialForce { metric, damping } => {
            let metric = match metric {
                MetricSpec::Energy => SystemMetric::Energy(energy.clone()),
                MetricSpec::Constant(m) => SystemMetric::Constant(m.clone()),
            };
            potential_force = Some((metric.clone(), damping.clone()));
            Some(Arc::new(PotentialForcePolicy {
                metric,
                potential: potential.clone().expect("validated"),
                damping: damping.clone(),
            }))
        }
    };

    let mut damped_potential = None;
    let system: Arc<dyn SecondOrderSystem> = match (&scenario.regulator, &policy) {
        (RegulatorSpec::None | RegulatorSpec::DamperScalar { .. }, Some(_)) if scenario.is_damped_potential() => {
            let (metric, damping) = potential_force.expect("potential force policy");
            let beta = match scenario.regulator {
                RegulatorSpec::DamperScalar { beta } => beta,
                _ => 0.0,
            };
            let sys = DampedPotentialSystem::new(fabric.clone(), metric, potential.clone().expect("validated"), damping, beta)
                .map_err(|e| config("regulator", e))?;
            let sys = Arc::new(sys);
            damped_potential = Some(sys.clone());
            sys
        }
        (RegulatorSpec::None, None) => Arc::new(fabric.clone()),
        (RegulatorSpec::None, Some(p)) => Arc::new(ForcedFabric {
            fabric: fabric.clone(),
            policy: p.clone(),
        }),
        (RegulatorSpec::DamperMatrix { damping }, p) => {
            let damped = DampedFabric::new(fabric.clone(), Damper::Matrix(damping.clone())).map_err(|e| config("regulator", e))?;
            with_policy(Arc::new(damped), p)?
        }
        (RegulatorSpec::DamperScalar { beta }, p) => {
            let damped = DampedFabric::new(fabric.clone(), Damper::Scalar(*beta)).map_err(|e| config("regulator", e))?;
            with_policy(Arc::new(damped), p)?
        }
        (
            RegulatorSpec::Capping1 {
                damping,
                gamma_max,
                energy_max,
            },
            Some(p),
        ) => {
            let gate = Arc::new(LinearCapGate {
                gamma_max: *gamma_max,
                energy_max: *energy_max,
            });
            Arc::new(CappedFabric1::new(fabric.clone(), p.clone(), damping.clone(), gate).map_err(|e| config("regulator", e))?)
        }
        (
            RegulatorSpec::Capping2 {
                beta,
                beta_max,
                energy_max,
                guard,
            },
            Some(p),
        ) => {
            let gate = Arc::new(LinearRampGate { energy_max: *energy_max });
            Arc::new(
                CappedFabric2::new(fabric.clone(), p.clone(), gate, *beta, *beta_max, *guard).map_err(|e| config("regulator", e))?,
            )
        }
        (RegulatorSpec::TheoremMain { beta, guard }, Some(p)) => Arc::new(
            TotalEnergySystem::new(
                generator.clone(),
                p.clone(),
                energy.clone(),
                potential.clone().expect("validated"),
                *beta,
                *guard,
            )
            .map_err(|e| config("regulator", e))?,
        ),
        (_, None) => unreachable!("validation requires a policy for this regulator"),
    };

    Ok(Assembly {
        system,
        fabric,
        generator,
        energy,
        potential,
        policy,
        task_maps,
        damped_potential,
    })
}

fn with_policy(base: Arc<dyn SecondOrderSystem>, policy: &Option<Arc<dyn NavigationPolicy>>) -> Result<Arc<dyn SecondOrderSystem>> {
    match policy {
        None => Ok(base),
        Some(p) => {
            let p: Arc<dyn SecondOrderSystem> = p.clone();
            Ok(Arc::new(SumSystem::new(vec![base, p]).map_err(|e| config("policy", e))?))
        }
    }
}
