//! Reporting helpers for the acceptance suite in `tests/acceptance.rs`.
//! Each criterion prints exactly one `A<n> PASS|FAIL: detail` line.

use std::io::Write;

/// Written straight to stderr so the line shows up without `--nocapture`.
pub fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{id} {verdict}: {detail}");
}

/// Reports, then fails the calling test unless `pass`.
pub fn check(id: &str, pass: bool, detail: String) {
    report(id, pass, &detail);
    assert!(pass, "{id}: {detail}");
}
