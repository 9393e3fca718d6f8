//! Verification reports shared by the library suites and the CLI.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// `fail` dominates `inconclusive`, which dominates `pass`.
    pub fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub details: Value,
    /// Wall-clock milliseconds; not part of the deterministic content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl Check {
    pub fn new(name: impl Into<String>, status: Status, details: Value) -> Self {
        Check {
            name: name.into(),
            status,
            details,
            timing_ms: None,
        }
    }

    /// Runs `f`, recording its duration.
    pub fn timed(name: impl Into<String>, f: impl FnOnce() -> (Status, Value)) -> Self {
        let start = Instant::now();
        let (status, details) = f();
        Check {
            name: name.into(),
            status,
            details,
            timing_ms: Some(start.elapsed().as_secs_f64() * 1e3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub suite: String,
    pub config: Value,
    pub checks: Vec<Check>,
    pub overall: Status,
}

impl Report {
    pub fn new(suite: impl Into<String>, config: Value) -> Self {
        Report {
            tool: "crc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            suite: suite.into(),
            config,
            checks: Vec::new(),
            overall: Status::Pass,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.overall = self.overall.combine(check.status);
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        for c in other.checks {
            self.push(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.overall == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report with timing fields removed, for byte-level comparisons.
    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.timing_ms = None;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn aggregation_and_round_trip() {
        let mut r = Report::new("demo", json!({}));
        r.push(Check::new("a", Status::Pass, json!(null)));
        assert_eq!(r.overall, Status::Pass);
        r.push(Check::new("b", Status::Inconclusive, json!(null)));
        assert_eq!(r.overall, Status::Inconclusive);
        r.push(Check::new("c", Status::Fail, json!(null)));
        assert_eq!(r.overall, Status::Fail);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<Report>(&text).unwrap(), r);
    }
}
