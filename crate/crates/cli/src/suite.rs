//! Batch execution and the finite-difference derivative checks.

use std::path::{Path, PathBuf};

use fabric_core::energy::fd_check_energy_derivatives;
use fabric_core::geometry::check_task_map;
use fabric_core::potential::check_gradient;
use fabric_core::State;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::build::assemble;
use crate::error::{HarnessError, Result};
use crate::report::{Comparison, InvariantReport};
use crate::run::run_scenario;
use crate::scenario::{load_scenario, Scenario};

pub const DERIVATIVE_TOLERANCE: f64 = 1e-5;
const DERIVATIVE_SAMPLES: usize = 8;
const ENERGY_STEP: f64 = 1e-5;
const GRADIENT_STEP: f64 = 1e-6;

#[derive(Debug)]
pub struct SuiteEntry {
    pub path: PathBuf,
    pub result: Result<InvariantReport>,
}

impl SuiteEntry {
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(r) => r.exit_code(),
            Err(e) => e.exit_code(),
        }
    }

    pub fn passed(&self) -> bool {
        self.exit_code() == 0
    }
}

/// Scenario files in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| HarnessError::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads and audits every scenario in `dir` in parallel. Results come back
/// in file-name order.
pub fn run_suite(dir: &Path, seed: Option<u64>) -> Result<Vec<SuiteEntry>> {
    let files = scenario_files(dir)?;
    Ok(files
        .into_par_iter()
        .map(|path| {
            let result = load_scenario(&path).and_then(|s| {
                let s = match seed {
                    Some(seed) => s.with_seed(seed),
                    None => s,
                };
                run_scenario(&s).map(|o| o.report)
            });
            SuiteEntry { path, result }
        })
        .collect())
}

fn sample_states(scenario: &Scenario) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let q0 = &scenario.initial_state.q;
    (0..DERIVATIVE_SAMPLES)
        .map(|_| {
            let q = q0.map(|x| x + rng.random_range(-1.0..1.0));
            let qd = q0.map(|_| rng.random_range(-1.0..1.0));
            State { q, qd }
        })
        .collect()
}

/// Compares every analytic derivative the scenario relies on against
/// central differences at seeded sample states.
pub fn check_derivatives(scenario: &Scenario) -> Result<InvariantReport> {
    let asm = assemble(scenario)?;
    let states = sample_states(scenario);
    let mut report = InvariantReport::new(&scenario.name, scenario.seed);

    let mut worst = 0.0_f64;
    for s in &states {
        worst = worst.max(fd_check_energy_derivatives(asm.energy.as_ref(), s, ENERGY_STEP).map_err(HarnessError::Numerical)?.max_error());
    }
    report.record("energy_derivatives", worst, DERIVATIVE_TOLERANCE, Comparison::Below, None);

    if let Some(psi) = &asm.potential {
        let worst = states
            .iter()
            .map(|s| check_gradient(psi.as_ref(), &s.q, GRADIENT_STEP))
            .fold(0.0, f64::max);
        report.record("potential_gradient", worst, DERIVATIVE_TOLERANCE, Comparison::Below, None);
    }

    for (i, map) in asm.task_maps.iter().enumerate() {
        let mut worst = 0.0_f64;
        for s in &states {
            worst = worst.max(check_task_map(map.as_ref(), s, ENERGY_STEP).map_err(HarnessError::Numerical)?.max_error());
        }
        report.record(&format!("task_map_{i}_jacobian"), worst, DERIVATIVE_TOLERANCE, Comparison::Below, None);
    }
    Ok(report)
}
