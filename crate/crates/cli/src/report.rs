//! Machine-readable run reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `measured ≤ tolerance` (NaN fails).
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: measured <= tolerance,
            measured,
            tolerance,
        }
    }

    /// Passes when `measured > threshold`.
    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: measured > threshold,
            measured,
            tolerance: threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    /// Sorted by name.
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    /// Command-specific results.
    pub data: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    /// Set when the command stopped on bad usage or input.
    pub error: Option<String>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            data: BTreeMap::new(),
            warnings: Vec::new(),
            error: None,
            passed: true,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.to_string(), to_value(value));
        self
    }

    pub fn datum(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.data.insert(key.to_string(), to_value(value));
        self
    }

    pub fn check(&mut self, check: Check) -> &mut Self {
        self.checks.push(check);
        self
    }

    pub fn warn(&mut self, message: impl Into<String>) -> &mut Self {
        self.warnings.push(message.into());
        self
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Sort checks and settle `passed`.
    pub fn finish(&mut self) {
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        self.passed = self.error.is_none() && self.checks.iter().all(|c| c.pass);
    }

    /// 0 when every check passed, 1 on a failed check, 2 on a usage or input error.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            2
        } else if self.checks.iter().all(|c| c.pass) {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).expect("report values are plain data")
}
