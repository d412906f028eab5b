//! Scenario-driven harness for `fabric-core`: JSON scenarios, rollouts,
//! invariant audits and trajectory export.

pub mod build;
pub mod error;
pub mod export;
pub mod report;
pub mod run;
pub mod scenario;
pub mod suite;

pub use error::{HarnessError, Result};
pub use export::{export_trajectory, import_trajectory, Format};
pub use report::{CheckEntry, Comparison, InvariantReport};
pub use run::{run_scenario, run_trajectory, RunOutcome};
pub use scenario::{load_scenario, parse_scenario, Scenario};
pub use suite::{check_derivatives, run_suite, SuiteEntry};
