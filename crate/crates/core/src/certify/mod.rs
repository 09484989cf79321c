//! Numerical certificates for the convergence inequalities of the
//! alternating minimiser.
//!
//! Every check is an entry `lhs ≤ rhs` evaluated on recorded runs or on
//! sampled parameters. Entries whose premises fail are reported as
//! [`Status::NotAsserted`] rather than as failures.

mod constants;
mod global;
mod local;
mod oracle;
mod synthetic;

pub use constants::{
    best_linear_bounds_check, gradient_identity_check, parameter_pairs, regularity_constants_check, RegularitySample,
};
pub use global::{
    basin_precondition, cea_certificate, directional_convexity_probe, global_certificate, quantitative_dc_condition,
    realisation_error_sq, BasinCheck, ProbeResult, QuantitativeDcInput, PROBE_STEP,
};
pub use local::{
    decrease_certificate, energy_monotone_certificate, local_rate_certificate, quasi_stationarity_level,
    surrogate_certificate, surrogate_from_record, SurrogateStep,
};
pub use oracle::{delta_star, minimiser_grid_oracle, MinimiserOracle, OptimalSet, OracleKind, GRID_POINT_LIMIT};
pub use synthetic::{circle_oracle, CircleModel, QuadraticModel, ReducedObjective};

use serde::{Deserialize, Serialize};

/// Slack granted to every inequality: `lhs ≤ rhs + abs + rel·|rhs|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-8, rel: 1e-8 }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn allows(&self, lhs: f64, rhs: f64) -> bool {
        lhs.is_finite() && rhs.is_finite() && lhs <= rhs + self.abs + self.rel * rhs.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A premise of the inequality does not hold; nothing is claimed.
    NotAsserted,
    /// The inequality is vacuous or could not be evaluated.
    Inconclusive,
}

/// One checked inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub name: String,
    /// The inequality in words or symbols.
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub status: Status,
    pub tolerance: Tolerance,
    #[serde(default)]
    pub detail: String,
}

impl CertificateEntry {
    pub fn compare(name: &str, anchor: &str, lhs: f64, rhs: f64, tol: Tolerance) -> Self {
        CertificateEntry {
            name: name.into(),
            anchor: anchor.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            status: if tol.allows(lhs, rhs) {
                Status::Pass
            } else {
                Status::Fail
            },
            tolerance: tol,
            detail: String::new(),
        }
    }

    pub fn skipped(name: &str, anchor: &str, status: Status, reason: impl Into<String>) -> Self {
        CertificateEntry {
            name: name.into(),
            anchor: anchor.into(),
            lhs: 0.0,
            rhs: 0.0,
            margin: 0.0,
            status,
            tolerance: Tolerance::default(),
            detail: reason.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Tracks the entry with the smallest margin over a family of inequalities
/// that must all hold.
#[derive(Debug, Clone)]
pub(crate) struct WorstCase {
    name: String,
    anchor: String,
    tol: Tolerance,
    worst: Option<(f64, f64, f64, String)>,
    failures: usize,
    checked: usize,
}

impl WorstCase {
    pub(crate) fn new(name: &str, anchor: &str, tol: Tolerance) -> Self {
        WorstCase {
            name: name.into(),
            anchor: anchor.into(),
            tol,
            worst: None,
            failures: 0,
            checked: 0,
        }
    }

    pub(crate) fn push(&mut self, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        if !self.tol.allows(lhs, rhs) {
            self.failures += 1;
        }
        // NaN margins rank lowest so they surface in the report.
        let margin = rhs - lhs;
        let key = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if self.worst.as_ref().is_none_or(|(k, ..)| key < *k) {
            self.worst = Some((key, lhs, rhs, at()));
        }
    }

    pub(crate) fn finish(self) -> CertificateEntry {
        match self.worst {
            None => CertificateEntry::skipped(&self.name, &self.anchor, Status::Inconclusive, "nothing to check"),
            Some((_, lhs, rhs, at)) => {
                let mut e = CertificateEntry::compare(&self.name, &self.anchor, lhs, rhs, self.tol);
                if self.failures > 0 {
                    e.status = Status::Fail;
                }
                e.detail = format!("worst at {at}; {} of {} checks failed", self.failures, self.checked);
                e
            }
        }
    }
}

/// Named certificate entries in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub entries: Vec<CertificateEntry>,
}

impl CertificateReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: CertificateEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = CertificateEntry>) {
        self.entries.extend(entries);
    }

    pub fn get(&self, name: &str) -> Option<&CertificateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CertificateEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    /// No entry failed. Skipped entries do not count against the report.
    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_semantics() {
        let t = Tolerance::default();
        assert!(t.allows(1.0, 1.0));
        assert!(t.allows(1.0 + 1e-9, 1.0));
        assert!(!t.allows(1.0 + 1e-6, 1.0));
        assert!(!t.allows(f64::NAN, 1.0));
        assert!(Tolerance::absolute(0.0).allows(-1.0, -1.0));
    }

    #[test]
    fn worst_case_keeps_smallest_margin_and_counts_failures() {
        let mut w = WorstCase::new("x", "a ≤ b", Tolerance::absolute(0.0));
        w.push(0.0, 1.0, || "0".into());
        w.push(0.9, 1.0, || "1".into());
        w.push(0.5, 1.0, || "2".into());
        let e = w.finish();
        assert_eq!(e.status, Status::Pass);
        assert_eq!(e.lhs, 0.9);
        assert!(e.detail.contains("at 1"));

        let mut w = WorstCase::new("x", "a ≤ b", Tolerance::absolute(0.0));
        w.push(2.0, 1.0, || "0".into());
        w.push(0.0, 1.0, || "1".into());
        let e = w.finish();
        assert_eq!(e.status, Status::Fail);
        assert!(e.detail.contains("1 of 2"));
    }

    #[test]
    fn report_pass_ignores_skipped() {
        let mut r = CertificateReport::new();
        r.push(CertificateEntry::compare("a", "", 0.0, 1.0, Tolerance::default()));
        r.push(CertificateEntry::skipped("b", "", Status::NotAsserted, "premise"));
        assert!(r.all_pass());
        r.push(CertificateEntry::compare("c", "", 2.0, 1.0, Tolerance::default()));
        assert!(!r.all_pass());
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.get("b").unwrap().status, Status::NotAsserted);
    }
}
