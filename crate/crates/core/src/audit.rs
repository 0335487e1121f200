//! Worst-slack bookkeeping shared by the property audits.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub samples: usize,
    /// Smallest observed `lhs - rhs` for an inequality `lhs >= rhs`.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Logged-only checks never fail the report.
    pub enforced: bool,
    pub applicable: bool,
}

impl AuditCheck {
    pub fn start(name: impl Into<String>, tolerance: f64) -> SlackTracker {
        SlackTracker {
            name: name.into(),
            tolerance,
            worst: f64::INFINITY,
            samples: 0,
            enforced: true,
        }
    }

    pub fn not_applicable(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            worst_slack: f64::INFINITY,
            tolerance: 0.0,
            passed: true,
            enforced: false,
            applicable: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlackTracker {
    name: String,
    tolerance: f64,
    worst: f64,
    samples: usize,
    enforced: bool,
}

impl SlackTracker {
    pub fn logged_only(mut self) -> Self {
        self.enforced = false;
        self
    }

    pub fn record(&mut self, slack: f64) {
        self.samples += 1;
        // NaN slack counts as a violation
        if slack.is_nan() {
            self.worst = f64::NEG_INFINITY;
        } else if slack < self.worst {
            self.worst = slack;
        }
    }

    pub fn worst(&self) -> f64 {
        self.worst
    }

    pub fn finish(self) -> AuditCheck {
        AuditCheck {
            passed: self.worst >= -self.tolerance,
            name: self.name,
            samples: self.samples,
            worst_slack: self.worst,
            tolerance: self.tolerance,
            enforced: self.enforced,
            applicable: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn push(&mut self, check: AuditCheck) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.enforced)
    }

    pub fn get(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| c.enforced && !c.passed)
    }
}
