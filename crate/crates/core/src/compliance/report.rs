use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{EndpointStats, Party};
use crate::detect::{Evidence, Finding};

use super::{ClauseSource, Violation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("violation {clause_id} has no supporting findings")]
    UnsupportedViolation { clause_id: String },
    #[error("violation {clause_id} references finding {index}, but only {count} exist")]
    DanglingFinding {
        clause_id: String,
        index: usize,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub device_name: String,
    pub capture_summary: Vec<EndpointStats>,
    pub findings: Vec<Finding>,
    pub violations: Vec<Violation>,
    pub generated_at: String,
}

impl AuditReport {
    pub fn validate(&self) -> Result<(), ReportError> {
        for v in &self.violations {
            if v.supporting_findings.is_empty() {
                return Err(ReportError::UnsupportedViolation {
                    clause_id: v.clause_id.clone(),
                });
            }
            if let Some(&index) = v.supporting_findings.iter().find(|&&i| i >= self.findings.len()) {
                return Err(ReportError::DanglingFinding {
                    clause_id: v.clause_id.clone(),
                    index,
                    count: self.findings.len(),
                });
            }
        }
        Ok(())
    }
}

/// JSON output has sorted object keys at every level; Markdown has the
/// sections Summary, Endpoint Statistics, Findings and Violations.
pub fn render_report(report: &AuditReport, format: ReportFormat) -> Result<Vec<u8>, ReportError> {
    report.validate()?;
    Ok(match format {
        ReportFormat::Json => {
            // Value objects are BTreeMap-backed, which sorts keys
            let value = serde_json::to_value(report).expect("report serializes");
            let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Markdown => markdown(report).into_bytes(),
    })
}

fn party(p: Party) -> &'static str {
    match p {
        Party::FirstParty => "first-party",
        Party::ThirdParty => "third-party",
        Party::Unknown => "unknown",
    }
}

fn evidence_text(e: &Evidence) -> String {
    match e {
        Evidence::Transaction(i) => format!("txn #{i}"),
        Evidence::File { file, line } => format!("{file}:{line}"),
        Evidence::Probe { request, status } => format!("GET {request} -> {status}"),
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn markdown(r: &AuditReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Audit report: {}\n", r.device_name);
    let _ = writeln!(md, "Generated at {}\n", r.generated_at);

    md.push_str("## Summary\n\n");
    let total_bytes: u64 = r.capture_summary.iter().map(|s| s.total_bytes).sum();
    let txns: usize = r.capture_summary.iter().map(|s| s.transaction_count).sum();
    let _ = writeln!(md, "- Hosts contacted: {}", r.capture_summary.len());
    let _ = writeln!(md, "- Transactions: {txns}");
    let _ = writeln!(md, "- Bytes transferred: {total_bytes}");
    let _ = writeln!(md, "- Findings: {}", r.findings.len());
    let mut per_detector: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &r.findings {
        *per_detector.entry(f.detector_id.as_str()).or_default() += 1;
    }
    for (id, n) in &per_detector {
        let _ = writeln!(md, "  - {id}: {n}");
    }
    let _ = writeln!(md, "- Violations: {}\n", r.violations.len());

    md.push_str("## Endpoint Statistics\n\n");
    if r.capture_summary.is_empty() {
        md.push_str("No traffic.\n\n");
    } else {
        md.push_str("| Host | Party | Bytes | Share | Transactions | All TLS |\n");
        md.push_str("|---|---|---:|---:|---:|---|\n");
        for s in &r.capture_summary {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.2}% | {} | {} |",
                cell(&s.host),
                party(s.party),
                s.total_bytes,
                s.byte_fraction * 100.0,
                s.transaction_count,
                if s.all_tls { "yes" } else { "no" }
            );
        }
        md.push('\n');
    }

    md.push_str("## Findings\n\n");
    if r.findings.is_empty() {
        md.push_str("No findings.\n\n");
    }
    for (i, f) in r.findings.iter().enumerate() {
        let _ = writeln!(md, "### [{i}] {} ({:?})\n", f.detector_id, f.severity);
        let _ = writeln!(md, "{}\n", f.summary);
        let evidence: Vec<String> = f.evidence.iter().map(evidence_text).collect();
        let _ = writeln!(md, "- Evidence: {}", evidence.join(", "));
        if !f.matched_fields.is_empty() {
            let _ = writeln!(md, "- Matched: {}", f.matched_fields.join(", "));
        }
        md.push('\n');
    }

    md.push_str("## Violations\n\n");
    if r.violations.is_empty() {
        md.push_str("No violations.\n");
    }
    for v in &r.violations {
        let source = match v.source {
            ClauseSource::Regulation => "regulation",
            ClauseSource::PrivacyPolicy => "privacy policy",
        };
        let _ = writeln!(md, "### {} ({source})\n", v.clause_id);
        let _ = writeln!(md, "> {}\n", v.quoted_text);
        let ids: Vec<String> = v.supporting_findings.iter().map(|i| format!("[{i}]")).collect();
        let _ = writeln!(md, "Supporting findings: {}\n", ids.join(", "));
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compliance::{default_catalog, map_findings};
    use crate::detect::{DetectorId, Severity};

    fn report() -> AuditReport {
        let findings = vec![Finding {
            detector_id: DetectorId::Cleartext,
            severity: Severity::High,
            summary: "plain HTTP".into(),
            evidence: vec![Evidence::Transaction(0)],
            matched_fields: vec!["api.toymaker.test".into(), "FirstParty".into()],
        }];
        AuditReport {
            device_name: "hydration".into(),
            capture_summary: vec![EndpointStats {
                host: "api.toymaker.test".into(),
                party: Party::FirstParty,
                total_bytes: 10,
                byte_fraction: 1.0,
                transaction_count: 1,
                all_tls: false,
            }],
            violations: map_findings(&findings, &default_catalog()),
            findings,
            generated_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    fn empty() -> AuditReport {
        AuditReport {
            device_name: "none".into(),
            capture_summary: vec![],
            findings: vec![],
            violations: vec![],
            generated_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn json_keys_sorted() {
        let out = String::from_utf8(render_report(&report(), ReportFormat::Json).unwrap()).unwrap();
        let top: Vec<usize> = [
            "capture_summary",
            "device_name",
            "findings",
            "generated_at",
            "violations",
        ]
        .iter()
        .map(|k| out.find(&format!("\"{k}\"")).unwrap())
        .collect();
        assert!(top.windows(2).all(|w| w[0] < w[1]));
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(value["violations"][0]["clause_id"], "COPPA-312.8");
    }

    #[test]
    fn markdown_sections_and_quote() {
        let md = String::from_utf8(render_report(&report(), ReportFormat::Markdown).unwrap()).unwrap();
        let pos: Vec<usize> = ["## Summary", "## Endpoint Statistics", "## Findings", "## Violations"]
            .iter()
            .map(|h| md.find(h).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(md.contains("encrypted via Secure Socket Layer (SSL) technology."));
    }

    #[test]
    fn empty_report_renders() {
        let md = String::from_utf8(render_report(&empty(), ReportFormat::Markdown).unwrap()).unwrap();
        assert!(md.contains("## Violations"));
        let json = render_report(&empty(), ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["findings"], serde_json::json!([]));
    }

    #[test]
    fn rendering_is_deterministic() {
        for format in [ReportFormat::Json, ReportFormat::Markdown] {
            assert_eq!(
                render_report(&report(), format).unwrap(),
                render_report(&report(), format).unwrap()
            );
        }
    }

    #[test]
    fn invalid_reports_rejected() {
        let mut r = report();
        r.violations[0].supporting_findings = vec![5];
        assert!(matches!(
            render_report(&r, ReportFormat::Json),
            Err(ReportError::DanglingFinding { .. })
        ));
        r.violations[0].supporting_findings.clear();
        assert!(matches!(
            render_report(&r, ReportFormat::Json),
            Err(ReportError::UnsupportedViolation { .. })
        ));
    }
}
