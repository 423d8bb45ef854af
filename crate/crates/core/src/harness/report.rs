use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// JSON summary shared by all experiments.
#[derive(Clone, Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub experiment: String,
    pub spec_echo: serde_json::Value,
    pub results: T,
    pub violations: Vec<String>,
}

impl<T: Serialize> Report<T> {
    pub fn new(experiment: &str, spec: &impl Serialize, results: T, violations: Vec<String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            spec_echo: serde_json::to_value(spec).unwrap_or(serde_json::Value::Null),
            results,
            violations,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Worst-case tracker for one invariant.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    /// Largest observed `value − tolerance`-style excess (≤ 0 when passing).
    pub worst_violation: f64,
    pub passed: bool,
}

impl SuiteResult {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checks: 0,
            failures: 0,
            worst_violation: f64::NEG_INFINITY,
            passed: true,
        }
    }

    /// Records one check whose excess over its tolerance is `excess` (fails when > 0).
    pub fn record(&mut self, excess: f64) {
        self.checks += 1;
        if excess.is_nan() || excess > 0.0 {
            self.failures += 1;
            self.passed = false;
        }
        if excess.is_nan() {
            self.worst_violation = f64::NAN;
        } else if !self.worst_violation.is_nan() {
            self.worst_violation = self.worst_violation.max(excess);
        }
    }

    pub fn record_bool(&mut self, ok: bool) {
        self.record(if ok { -1.0 } else { 1.0 });
    }

    pub fn merge(&mut self, other: &SuiteResult) {
        self.checks += other.checks;
        self.failures += other.failures;
        self.passed &= other.passed;
        if other.worst_violation.is_nan() || self.worst_violation.is_nan() {
            self.worst_violation = f64::NAN;
        } else {
            self.worst_violation = self.worst_violation.max(other.worst_violation);
        }
    }
}
