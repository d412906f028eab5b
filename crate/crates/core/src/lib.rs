//! Energy-conserving second-order "fabrics" and the tools to build, steer,
//! regulate and simulate them.
//!
//! A generator `h(q, q̇)` is energized against a Finsler energy `𝓛` so the
//! resulting system conserves `𝓛`; navigation policies then push the system
//! across the fabric while regulators bound or dissipate its energy.

pub mod energization;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod potential;
pub mod regulation;
pub mod simulation;
pub mod state;

pub use energization::{
    decompose_navigation, energize, energize_robust, energize_total, energize_vanishing, perpendicular_projector,
    EnergizedFabric, NavigationDecomposition, Variant,
};
pub use energy::{
    energy_rate, fd_check_energy_derivatives, hamiltonian, EnergyEval, EuclideanEnergy, FinslerEnergy, RiemannianEnergy,
};
pub use error::{FabricError, Result};
pub use geometry::{check_hd2, check_task_map, pullback_spec, Generator, TaskMap, TransformTree};
pub use linalg::{Matrix, Vector};
pub use potential::Potential;
pub use simulation::{
    energy_drift, path_distance, resample_arclength, rollout, step_rk4, ConvergenceCriterion, Trajectory,
};
pub use state::{Accel, SecondOrderSystem, Spec, State, SystemKind};
