//! Checkers for the norm-decay and neuron-death dynamics. Each returns a
//! [`TheoremReport`] whose verdict is a pure function of the recorded
//! evidence and the thresholds documented on the checker.

use std::fmt;

use serde::Serialize;
use serde_json::Value;

pub mod ap;
pub mod basis;
pub mod digits;
pub mod thm1;
pub mod thm2;

pub use ap::{a_p_curve, a_p_exact, ApPolynomial, TinyConfig};
pub use basis::{check_theorem3, check_theorem4, BasisRun, PosNegHistory, Thm3Params, Thm4Params};
pub use digits::{digit_association, AssociationTable};
pub use thm1::{check_theorem1, Thm1Params};
pub use thm2::{check_decay_rate, check_theorem2, decay_constant, expected_decay_rate, loss_decay_rate, Thm2Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The checker could not gather the evidence it needs.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub verdict: Verdict,
    /// One line per checked property, in evaluation order.
    pub checks: Vec<Check>,
    pub evidence: Value,
    pub config: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl TheoremReport {
    pub fn new(theorem: &str, config: impl Serialize) -> Self {
        Self {
            theorem: theorem.to_string(),
            verdict: Verdict::Pass,
            checks: Vec::new(),
            evidence: Value::Null,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
        }
    }

    /// Records a check; any failure turns the verdict to `Fail`.
    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> &mut Self {
        if !pass && self.verdict == Verdict::Pass {
            self.verdict = Verdict::Fail;
        }
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
        self
    }

    pub fn inconclusive(&mut self, reason: impl Into<String>) -> &mut Self {
        self.verdict = Verdict::Inconclusive;
        self.checks.push(Check {
            name: "evidence".into(),
            pass: false,
            detail: reason.into(),
        });
        self
    }

    pub fn with_evidence(mut self, evidence: impl Serialize) -> Self {
        self.evidence = serde_json::to_value(evidence).unwrap_or(Value::Null);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite JSON")
    }
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        writeln!(f, "{} {verdict}", self.theorem)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", if c.pass { "ok" } else { "xx" }, c.name, c.detail)?;
        }
        Ok(())
    }
}
