//! Named bound checks collected into reports.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="` or `"=="`.
    pub relation: &'static str,
    pub holds: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: "<=",
            holds: value <= bound,
        }
    }

    pub fn eq(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: "==",
            holds: value == bound,
        }
    }

    /// A check decided elsewhere (e.g. exact rational comparison).
    pub fn decided(name: impl Into<String>, value: f64, bound: f64, relation: &'static str, holds: bool) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation,
            holds,
        }
    }
}

pub fn all_hold(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.holds)
}

/// Names of the failed checks.
pub fn failures(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{}: {} {} {} fails", c.name, c.value, c.relation, c.bound))
        .collect()
}
