//! Per-decision telemetry rows and the bookkeeping audit over them.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::session::DecisionRecord;

/// One CSV row per (seed, step, role) decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub seed: u64,
    pub t: u64,
    pub role: String,
    pub p_hat: f64,
    pub threshold: f64,
    pub verdict: String,
    pub flag: String,
    pub sensitivity_est: f64,
    /// Empty until the window holds a negative.
    pub specificity_est: Option<f64>,
    pub threshold_after: f64,
    pub episode: u64,
    pub n_maxima: usize,
    pub queried: bool,
    pub aggregated: bool,
    pub retrained: bool,
    pub success: bool,
    pub failure_state: Option<String>,
}

impl TelemetryRow {
    pub fn from_record(seed: u64, r: &DecisionRecord) -> Self {
        TelemetryRow {
            seed,
            t: r.t,
            role: r.role.as_str().to_string(),
            p_hat: r.p_hat,
            threshold: r.threshold_before,
            verdict: r.verdict.as_str().to_string(),
            flag: r.flag.as_str().to_string(),
            sensitivity_est: r.sensitivity_est,
            specificity_est: r.specificity_est,
            threshold_after: r.threshold_after,
            episode: r.episode,
            n_maxima: r.maxima.len(),
            queried: r.flag.queried(),
            aggregated: r.teacher_pixel.is_some(),
            retrained: r.retrained,
            success: r.success,
            failure_state: r.failure_state.map(|s| s.as_str().to_string()),
        }
    }
}

pub fn write_csv<W: Write>(rows: &[TelemetryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TelemetryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}

/// Findings of [`audit`]; `passed` is the conjunction of every check.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub decisions: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub interactive_demos: usize,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Checks that every (seed, step, role) carries exactly one known flag,
/// that a query happened exactly on ambiguous verdicts, that each seed's
/// steps have both roles, and that aggregated demos number TP + FP + FN.
pub fn audit(rows: &[TelemetryRow]) -> AuditReport {
    let mut rep = AuditReport { decisions: rows.len(), ..AuditReport::default() };
    let mut seen = HashSet::new();
    for (i, r) in rows.iter().enumerate() {
        let line = i + 2;
        if !seen.insert((r.seed, r.t, r.role.clone())) {
            rep.violations.push(format!("row {line}: duplicate decision for ({}, {}, {})", r.seed, r.t, r.role));
        }
        match r.flag.as_str() {
            "TP" => rep.tp += 1,
            "TN" => rep.tn += 1,
            "FP" => rep.fp += 1,
            "FN" => rep.fn_ += 1,
            other => rep.violations.push(format!("row {line}: unknown flag `{other}`")),
        }
        let queried = matches!(r.flag.as_str(), "TP" | "FP");
        if queried != (r.verdict == "Ambiguous") || queried != r.queried {
            rep.violations.push(format!("row {line}: verdict {} with flag {}", r.verdict, r.flag));
        }
        let should_aggregate = matches!(r.flag.as_str(), "TP" | "FP" | "FN");
        if r.aggregated != should_aggregate {
            rep.violations.push(format!("row {line}: aggregation does not match flag {}", r.flag));
        }
        if r.aggregated {
            rep.interactive_demos += 1;
        }
    }
    for r in rows {
        let other = if r.role == "pick" { "place" } else { "pick" };
        if !seen.contains(&(r.seed, r.t, other.to_string())) {
            rep.violations.push(format!("seed {} step {}: no {other} decision", r.seed, r.t));
        }
    }
    if rep.interactive_demos != rep.tp + rep.fp + rep.fn_ {
        rep.violations.push("interactive demos differ from TP + FP + FN".into());
    }
    rep.passed = rep.violations.is_empty();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, role: &str, verdict: &str, flag: &str) -> TelemetryRow {
        TelemetryRow {
            seed: 0,
            t,
            role: role.into(),
            p_hat: 0.5,
            threshold: 0.5,
            verdict: verdict.into(),
            flag: flag.into(),
            sensitivity_est: 0.9,
            specificity_est: None,
            threshold_after: 0.5,
            episode: 0,
            n_maxima: 1,
            queried: matches!(flag, "TP" | "FP"),
            aggregated: flag != "TN",
            retrained: false,
            success: false,
            failure_state: None,
        }
    }

    #[test]
    fn clean_rows_pass() {
        let rows = vec![row(0, "pick", "Ambiguous", "TP"), row(0, "place", "Confident", "TN")];
        let rep = audit(&rows);
        assert!(rep.passed, "{:?}", rep.violations);
        assert_eq!(rep.interactive_demos, 1);
    }

    #[test]
    fn violations_are_caught() {
        let mut bad = row(0, "place", "Confident", "FP");
        bad.queried = true;
        let rows = vec![row(0, "pick", "Ambiguous", "TP"), bad.clone(), bad, row(1, "pick", "Confident", "XX")];
        let rep = audit(&rows);
        assert!(!rep.passed);
        assert!(rep.violations.iter().any(|v| v.contains("duplicate")));
        assert!(rep.violations.iter().any(|v| v.contains("unknown flag")));
        assert!(rep.violations.iter().any(|v| v.contains("verdict Confident")));
        assert!(rep.violations.iter().any(|v| v.contains("no place decision")));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = row(3, "pick", "Confident", "FN");
        r.specificity_est = Some(0.25);
        r.failure_state = Some("failure_a".into());
        let rows = vec![r, row(3, "place", "Confident", "TN")];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,t,role,p_hat,threshold,verdict,flag,sensitivity_est,specificity_est"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }
}
