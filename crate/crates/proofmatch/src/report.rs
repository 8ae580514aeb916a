//! The JSON evaluation report written by `baseline` and `evaluate`.

use proofmatch_core::eval::{EvalReport, UsageHistogram};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UsageJson {
    /// Fraction of proofs top-ranked by two or more statements.
    pub multi: f64,
    /// Fraction top-ranked by exactly one statement.
    pub single: f64,
    /// Fraction never top-ranked.
    pub unused: f64,
}

impl From<&UsageHistogram> for UsageJson {
    fn from(h: &UsageHistogram) -> Self {
        Self {
            multi: h.multi,
            single: h.single,
            unused: h.unused,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportJson {
    /// Scoring method: "tfidf", "dice" or "neural".
    pub method: String,
    /// Input mode: "both", "text" or "math".
    pub mode: String,
    /// Evaluation set: "dev" or "test".
    pub set: String,
    pub n: usize,
    /// Pruning width used for global decoding.
    pub k: usize,
    pub mrr: f64,
    pub accuracy_local: f64,
    pub accuracy_global: f64,
    pub degraded_global: bool,
    pub usage: UsageJson,
}

impl ReportJson {
    pub fn new(
        method: &str,
        mode: &str,
        set: &str,
        k: usize,
        report: &EvalReport,
        usage: &UsageHistogram,
    ) -> Self {
        Self {
            method: method.to_string(),
            mode: mode.to_string(),
            set: set.to_string(),
            n: report.n,
            k,
            mrr: report.mrr,
            accuracy_local: report.accuracy_local,
            accuracy_global: report.accuracy_global,
            degraded_global: report.degraded_global,
            usage: UsageJson::from(usage),
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
