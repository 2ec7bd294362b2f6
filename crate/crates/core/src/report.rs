//! Structured pass/fail records for verified inequality instances.

use serde::Serialize;

/// Outcome of one checked bound. `Inconclusive` is reserved for searches
/// whose failure proves nothing (an optimizer not finding a witness is not a
/// counterexample).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundStatus {
    Pass,
    Inconclusive,
    Fail,
}

/// Record of one verified inequality instance, read as `lhs >= rhs` with
/// `slack = lhs - rhs`; it passes iff `slack >= -tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub id: String,
    pub instance: String,
    pub lhs_bits: f64,
    pub rhs_bits: f64,
    pub slack_bits: f64,
    pub tolerance_bits: f64,
    pub status: BoundStatus,
    pub witness: Option<String>,
}

impl BoundReport {
    /// A hard check: failing means the inequality is violated on this instance.
    pub fn check(id: &str, instance: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        BoundReport {
            id: id.to_string(),
            instance: instance.to_string(),
            lhs_bits: lhs,
            rhs_bits: rhs,
            slack_bits: slack,
            tolerance_bits: tol,
            status: if slack >= -tol { BoundStatus::Pass } else { BoundStatus::Fail },
            witness: None,
        }
    }

    /// A search-based check: a miss is reported as inconclusive, never as a
    /// violation.
    pub fn check_searched(id: &str, instance: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let mut r = Self::check(id, instance, lhs, rhs, tol);
        if r.status == BoundStatus::Fail {
            r.status = BoundStatus::Inconclusive;
        }
        r
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == BoundStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct SuiteSummary {
    pub pass: usize,
    pub inconclusive: usize,
    pub fail: usize,
}

impl SuiteSummary {
    pub fn add(&mut self, status: BoundStatus) {
        match status {
            BoundStatus::Pass => self.pass += 1,
            BoundStatus::Inconclusive => self.inconclusive += 1,
            BoundStatus::Fail => self.fail += 1,
        }
    }

    /// Worst status of a set of reports: fail > inconclusive > pass.
    pub fn combine_statuses(reports: &[BoundReport]) -> BoundStatus {
        let mut s = BoundStatus::Pass;
        for r in reports {
            match r.status {
                BoundStatus::Fail => return BoundStatus::Fail,
                BoundStatus::Inconclusive => s = BoundStatus::Inconclusive,
                BoundStatus::Pass => {}
            }
        }
        s
    }
}

impl std::fmt::Display for SuiteSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "pass/inconclusive/fail = {}/{}/{}",
            self.pass, self.inconclusive, self.fail
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_slack_above_minus_tolerance() {
        let r = BoundReport::check("b", "i", 1.0, 1.0 + 5e-10, 1e-9);
        assert!(r.passed());
        let r = BoundReport::check("b", "i", 1.0, 1.0 + 2e-9, 1e-9);
        assert_eq!(r.status, BoundStatus::Fail);
        let r = BoundReport::check_searched("b", "i", 1.0, 2.0, 1e-9);
        assert_eq!(r.status, BoundStatus::Inconclusive);
    }
}
