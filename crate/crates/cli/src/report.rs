use std::fmt;

use serde::{Deserialize, Serialize};

/// How a measured value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured < threshold`
    Below,
    /// `measured <= threshold`
    AtMost,
    /// `measured >= threshold`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub scenario: String,
    pub seed: u64,
    pub steps: usize,
    pub converged: Option<bool>,
    /// `false` when the rollout aborted before the audits could run.
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort: Option<String>,
    pub checks: Vec<CheckEntry>,
    pub passed: usize,
    pub failed: usize,
}

impl InvariantReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            steps: 0,
            converged: None,
            complete: true,
            abort: None,
            checks: Vec::new(),
            passed: 0,
            failed: 0,
        }
    }

    pub fn record(&mut self, check: &str, measured: f64, threshold: f64, comparison: Comparison, note: Option<String>) {
        let passed = match comparison {
            Comparison::Below => measured < threshold,
            Comparison::AtMost => measured <= threshold,
            Comparison::AtLeast => measured >= threshold,
        };
        debug_assert!(self.checks.iter().all(|c| c.check != check), "duplicate check {check}");
        if passed {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.checks.push(CheckEntry {
            check: check.to_string(),
            measured,
            threshold,
            comparison,
            passed,
            note,
        });
    }

    pub fn mark_aborted(&mut self, reason: String) {
        self.complete = false;
        self.abort = Some(reason);
    }

    pub fn get(&self, check: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.check == check)
    }

    pub fn all_passed(&self) -> bool {
        self.complete && self.failed == 0
    }

    /// 0 when every check passes, 1 on any failure, 3 when the run aborted.
    pub fn exit_code(&self) -> i32 {
        if !self.complete {
            3
        } else if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario {} (seed {}", self.scenario, self.seed)?;
        if self.steps > 0 {
            write!(f, ", {} steps", self.steps)?;
        }
        writeln!(f, ")")?;
        if let Some(reason) = &self.abort {
            writeln!(f, "  ABORTED: {reason}")?;
        }
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::Below => "<",
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
            };
            write!(
                f,
                "  [{}] {:<28} {:>12.4e} {op} {:.1e}",
                if c.passed { "pass" } else { "FAIL" },
                c.check,
                c.measured,
                c.threshold
            )?;
            if let Some(note) = &c.note {
                write!(f, "  ({note})")?;
            }
            writeln!(f)?;
        }
        write!(f, "  {} passed, {} failed", self.passed, self.failed)
    }
}
