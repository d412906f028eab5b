//! Fixtures shared by the criterion benchmarks under `benches/`.

use std::sync::Arc;

use fabric_core::energization::Variant;
use fabric_core::energy::{FinslerEnergy, RiemannianEnergy};
use fabric_core::geometry::{
    make_attractor_generator, make_barrier_generator, make_tree_generator, ClearanceLeaf, Homogeneity, SphereDistanceMap,
    TransformTree,
};
use fabric_core::potential::{GaussianBump, Potential, QuadraticPotential};
use fabric_core::regulation::{default_compatible_policy, RegulatorGuard, TotalEnergySystem};
use fabric_core::{EnergizedFabric, Matrix, SecondOrderSystem, Spec, State, Vector};

pub fn conformal_energy() -> Arc<dyn FinslerEnergy> {
    Arc::new(RiemannianEnergy::conformal(2, 1, 0.5).expect("valid axis"))
}

pub fn barrier_fabric(variant: Variant) -> EnergizedFabric {
    let bump: Arc<dyn Potential> = Arc::new(GaussianBump::new(Vector::zeros(2), 1.0, 0.5));
    EnergizedFabric::new(Arc::new(make_barrier_generator(bump)), conformal_energy(), variant).expect("matching dimensions")
}

/// Tree generator with `obstacles` spheres spread along a line.
pub fn tree_generator(obstacles: usize) -> Arc<dyn SecondOrderSystem> {
    let base = Spec::new(Matrix::identity(2, 2), Vector::zeros(2)).expect("identity is SPD");
    let mut tree = TransformTree::new(base);
    let leaf = Arc::new(ClearanceLeaf {
        metric_gain: 1.0,
        accel_gain: 2.0,
    });
    for i in 0..obstacles {
        let map = Arc::new(SphereDistanceMap {
            center: Vector::from_column_slice(&[i as f64, 1.0]),
            radius: 0.25,
        });
        tree.add_branch(map, leaf.clone()).expect("matching dimensions");
    }
    Arc::new(make_tree_generator(Arc::new(tree), Homogeneity::Hd2))
}

pub fn total_energy_system() -> (TotalEnergySystem, Arc<dyn FinslerEnergy>, Arc<dyn Potential>) {
    let goal = Vector::from_column_slice(&[1.0, 0.5]);
    let psi: Arc<dyn Potential> = Arc::new(QuadraticPotential::new(goal.clone(), 1.0));
    let policy = Arc::new(default_compatible_policy(psi.clone(), 1e-6, Matrix::identity(2, 2)).expect("SPD damping"));
    let energy = conformal_energy();
    let sys = TotalEnergySystem::new(
        Arc::new(make_attractor_generator(goal)),
        policy,
        energy.clone(),
        psi.clone(),
        1.0,
        RegulatorGuard::default(),
    )
    .expect("consistent components");
    (sys, energy, psi)
}

pub fn moving_state() -> State {
    State::from_slices(&[-1.5, 0.2], &[1.0, 0.3]).expect("equal lengths")
}
