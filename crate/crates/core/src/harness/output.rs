//! Suite bookkeeping and CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ScenarioSpec;
use crate::bvp1d::{verify_gsff, EigenCurves, FlowReport, GapProfile, VerifyOptions};
use crate::error::Result;
use crate::tol::Tolerances;

/// Outcome of one scenario in a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub label: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FlowReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// The error came from a numerical engine rather than the input.
    #[serde(default)]
    pub numerical_failure: bool,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.passed())
    }
}

/// Builds and verifies one scenario, capturing failures.
pub fn run_spec(spec: &ScenarioSpec, opts: &VerifyOptions, tol: &Tolerances) -> SuiteEntry {
    let result = spec.build(tol).and_then(|sc| verify_gsff(&sc, opts, tol));
    match result {
        Ok(report) => SuiteEntry {
            label: spec.label(),
            seed: spec.seed,
            report: Some(report),
            error: None,
            numerical_failure: false,
        },
        Err(e) => SuiteEntry {
            label: spec.label(),
            seed: spec.seed,
            report: None,
            numerical_failure: e.is_numerical(),
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub passed: usize,
    pub mismatches: usize,
    pub failures: usize,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSummary {
    /// Summary with entries sorted by label.
    pub fn new(mut entries: Vec<SuiteEntry>) -> Self {
        entries.sort_by(|a, b| a.label.cmp(&b.label));
        let passed = entries.iter().filter(|e| e.passed()).count();
        let failures = entries.iter().filter(|e| e.error.is_some()).count();
        Self {
            total: entries.len(),
            passed,
            mismatches: entries.len() - passed - failures,
            failures,
            entries,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }

    pub fn any_numerical_failure(&self) -> bool {
        self.entries.iter().any(|e| e.numerical_failure)
    }
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    e.into()
}

/// One row per scenario.
pub fn write_summary_csv<W: Write>(summary: &SuiteSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "seed",
        "sf_partition",
        "sf_oracle",
        "maslov_partition",
        "maslov_crossings",
        "equal",
        "passed",
        "error",
    ])
    .map_err(csv_error)?;
    for e in &summary.entries {
        let opt = |x: Option<i64>| x.map(|v| v.to_string()).unwrap_or_default();
        let r = e.report.as_ref();
        w.write_record([
            e.label.clone(),
            e.seed.map(|s| s.to_string()).unwrap_or_default(),
            opt(r.map(|r| r.sf_partition)),
            opt(r.map(|r| r.sf_oracle)),
            opt(r.map(|r| r.maslov_partition)),
            opt(r.and_then(|r| r.maslov_crossings)),
            r.map(|r| r.equal.to_string()).unwrap_or_default(),
            e.passed().to_string(),
            e.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `s, lambda_1, ..., lambda_K`; shorter rows are padded with
/// empty fields.
pub fn write_curves_csv<W: Write>(curves: &EigenCurves, out: W) -> Result<()> {
    let k = curves.values.iter().map(Vec::len).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["s".to_string()];
    header.extend((1..=k).map(|i| format!("lambda_{i}")));
    w.write_record(&header).map_err(csv_error)?;
    for (s, vals) in curves.s.iter().zip(&curves.values) {
        let mut row = vec![format!("{s}")];
        row.extend((0..k).map(|i| vals.get(i).map(|v| format!("{v}")).unwrap_or_default()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `s, gap_increment`.
pub fn write_gap_csv<W: Write>(profile: &GapProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "gap_increment"]).map_err(csv_error)?;
    for (s, g) in profile.s.iter().zip(&profile.increments) {
        w.write_record([format!("{s}"), format!("{g}")]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp1d::EigenCurves;

    #[test]
    fn curves_csv_pads_rows() {
        let c = EigenCurves {
            s: vec![0.0, 1.0],
            values: vec![vec![-1.0], vec![-1.0, 2.5]],
        };
        let mut buf = Vec::new();
        write_curves_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "s,lambda_1,lambda_2\n0,-1,\n1,-1,2.5\n");
    }
}
