//! Result record for a single evaluated check.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One identity/comparison evaluated at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    /// Stable identifier of the check (identity name, comparison name, ...).
    pub id: String,
    /// sup-norm residual over all basis slot combinations; `None` for checks
    /// that were skipped before anything could be evaluated.
    pub residual: Option<f64>,
    /// Tolerance the residual was compared against; `None` for purely
    /// diagnostic records.
    pub tol: Option<f64>,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

impl CheckResult {
    pub fn graded(id: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            id: id.into(),
            residual: Some(residual),
            tol: Some(tol),
            status: if residual < tol { CheckStatus::Pass } else { CheckStatus::Fail },
            skip_reason: None,
        }
    }

    pub fn skipped(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            residual: None,
            tol: None,
            status: CheckStatus::Skipped,
            skip_reason: Some(reason.into()),
        }
    }

    /// Skipped, but with the hypothesis residual that failed the gate.
    pub fn skipped_with_residual(
        id: impl Into<String>,
        residual: f64,
        reason: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            residual: Some(residual),
            tol: None,
            status: CheckStatus::Skipped,
            skip_reason: Some(reason.into()),
        }
    }

    /// Residual reported without a pass/fail grade.
    pub fn diagnostic(id: impl Into<String>, residual: f64) -> Self {
        Self {
            id: id.into(),
            residual: Some(residual),
            tol: None,
            status: CheckStatus::Pass,
            skip_reason: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}
