//! Exact oracles and estimators.

mod domination;
mod gibbs;
mod psi;
mod stats;

pub use domination::{verify_potts_domination, verify_potts_domination_with_beta};
pub use gibbs::{
    detailed_balance_error, exact_gibbs, ising_plus_phase, occupation_measure, restrict_to_phase, tv_distance,
    MAX_STATES,
};
pub use psi::{
    conv_entry, convolve_log, log_sum_exp, verify_psi_tail_bounds, verify_simple_convolution, PsiPmf, PsiTails,
};
pub use stats::{fit_log_slope, histogram, histogram_csv, hitting_time, median, quantile, HistogramRow, LogFit};

use serde::Serialize;
use serde_json::Value;

/// Outcome of an exhaustive inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub params: Value,
    pub pass: bool,
    /// Smallest slack seen; negative exactly when some case failed.
    pub worst_margin: f64,
    /// Failing cases (capped), or notable cases when everything passed.
    pub witnesses: Vec<Value>,
}

pub(crate) const MAX_WITNESSES: usize = 20;

impl Report {
    pub(crate) fn new(check: &str, params: Value) -> Self {
        Report { check: check.to_string(), params, pass: true, worst_margin: f64::INFINITY, witnesses: Vec::new() }
    }

    /// Records one case; `margin < -tol` counts as a failure.
    pub(crate) fn record(&mut self, margin: f64, tol: f64, witness: impl FnOnce() -> Value) {
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if margin < -tol || margin.is_nan() {
            self.pass = false;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
