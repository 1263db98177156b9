use std::fmt::Write as _;

use morphoseek::cost::ValidationReport;
use morphoseek::kernel::Kernel;
use serde::{Deserialize, Serialize};

use crate::config::Snapshot;

pub const REPORT_SCHEMA: &str = "morphoseek-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub kernel: Kernel,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub min_prior_distance: f64,
    pub n_inputs: usize,
    pub verdict: Verdict,
    /// Verdict recorded in a replayed bundle.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<Verdict>,
}

impl Row {
    pub fn new(id: &str, kernel: Kernel, report: &ValidationReport) -> Self {
        Row {
            id: id.to_string(),
            kernel,
            max_rel_err: report.max_rel_err,
            mean_rel_err: report.mean_rel_err,
            min_prior_distance: report.min_prior_distance,
            n_inputs: report.n_inputs,
            verdict: Verdict::from_passed(report.passed),
            expected: None,
        }
    }

    pub fn mismatched(&self) -> bool {
        self.expected.is_some_and(|e| e != self.verdict)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Snapshot,
    pub rows: Vec<Row>,
    /// Relations whose verdict differs between the two compared kernels.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discriminating: Option<Vec<String>>,
}

impl Report {
    pub fn new(config: Snapshot, mut rows: Vec<Row>) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id).then(a.kernel.name().cmp(b.kernel.name())));
        Report {
            schema: REPORT_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: config.hash(),
            config,
            rows,
            discriminating: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Pass)
    }

    pub fn mismatches(&self) -> usize {
        self.rows.iter().filter(|r| r.mismatched()).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Plain-text table. Numbers use the same shortest round-trip digits as
    /// the JSON form.
    pub fn to_table(&self) -> String {
        let with_expected = self.rows.iter().any(|r| r.expected.is_some());
        let id_width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
        let mut out = String::new();
        let _ = write!(
            out,
            "{:<id_width$}  {:<9}  {:<24}  {:<24}  {:<24}  {:<7}",
            "id", "kernel", "max_rel_err", "mean_rel_err", "min_prior_distance", "verdict"
        );
        if with_expected {
            out.push_str("  expected");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{:<id_width$}  {:<9}  {:<24e}  {:<24e}  {:<24e}  {:<7}",
                r.id,
                r.kernel.name(),
                r.max_rel_err,
                r.mean_rel_err,
                r.min_prior_distance,
                r.verdict.to_string()
            );
            if let Some(e) = r.expected {
                let mark = if r.mismatched() { "  MISMATCH" } else { "" };
                let _ = write!(out, "  {e}{mark}");
            }
            out.push('\n');
        }
        if let Some(list) = &self.discriminating {
            if list.is_empty() {
                out.push_str("discriminating: none\n");
            } else {
                let _ = writeln!(out, "discriminating: {}", list.join(", "));
            }
        }
        let _ = writeln!(out, "seed {}  config {}", self.seed, self.config_hash);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use morphoseek::cost::ValidationConfig;

    fn snapshot() -> Snapshot {
        Snapshot {
            command: "verify".into(),
            seed: 3,
            kernel: Kernel::Cyclic,
            against: None,
            grid: "3x16x16".into(),
            validation: ValidationConfig::default(),
            search: None,
        }
    }

    fn row(id: &str, kernel: Kernel, passed: bool) -> Row {
        let report = ValidationReport {
            max_rel_err: 1.25e-13,
            mean_rel_err: 0.1,
            min_prior_distance: 3.0,
            n_inputs: 5,
            passed,
        };
        Row::new(id, kernel, &report)
    }

    #[test]
    fn rows_are_sorted_by_id_then_kernel() {
        let report = Report::new(
            snapshot(),
            vec![
                row("b", Kernel::Noncyclic, true),
                row("b", Kernel::Cyclic, true),
                row("a", Kernel::Noncyclic, false),
            ],
        );
        let keys: Vec<_> = report.rows.iter().map(|r| (r.id.as_str(), r.kernel)).collect();
        assert_eq!(
            keys,
            [("a", Kernel::Noncyclic), ("b", Kernel::Cyclic), ("b", Kernel::Noncyclic)]
        );
        assert!(!report.all_pass());
    }

    #[test]
    fn table_and_json_carry_the_same_numbers() {
        let report = Report::new(snapshot(), vec![row("negate_ssh", Kernel::Cyclic, true)]);
        let table = report.to_table();
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let max = json["rows"][0]["max_rel_err"].as_f64().unwrap();
        assert_eq!(max, 1.25e-13);
        assert!(table.contains("1.25e-13"), "{table}");
        assert!(table.contains("PASS"));
        assert_eq!(json["config_hash"].as_str().unwrap(), report.config_hash);
    }

    #[test]
    fn mismatch_needs_an_expectation() {
        let mut r = row("x", Kernel::Cyclic, false);
        assert!(!r.mismatched());
        r.expected = Some(Verdict::Pass);
        assert!(r.mismatched());
    }
}
