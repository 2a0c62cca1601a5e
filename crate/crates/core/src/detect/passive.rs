//! Detectors that only look at recorded transactions.

use std::collections::HashMap;

use crate::capture::{classify_party, DeviceProfile, HttpTransaction, Method, Party};

use super::{DetectorId, Evidence, Finding, PiiDictionary, Severity};

fn party_label(party: Party) -> &'static str {
    match party {
        Party::FirstParty => "FirstParty",
        Party::ThirdParty => "ThirdParty",
        Party::Unknown => "Unknown",
    }
}

/// One finding per host reached over plain HTTP, in order of first contact.
pub fn detect_cleartext(txns: &[HttpTransaction], profile: &DeviceProfile) -> Vec<Finding> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_host: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, t) in txns.iter().enumerate().filter(|(_, t)| !t.tls) {
        by_host
            .entry(t.host.as_str())
            .or_insert_with(|| {
                order.push(t.host.as_str());
                Vec::new()
            })
            .push(i);
    }
    order
        .into_iter()
        .map(|host| {
            let idx = by_host.remove(host).unwrap_or_default();
            let party = classify_party(host, profile);
            let severity = if party == Party::FirstParty {
                Severity::High
            } else {
                Severity::Medium
            };
            Finding {
                detector_id: DetectorId::Cleartext,
                severity,
                summary: format!(
                    "{} unencrypted HTTP transaction(s) with {} host {host}",
                    idx.len(),
                    party_label(party)
                ),
                evidence: idx.into_iter().map(Evidence::Transaction).collect(),
                matched_fields: vec![host.to_string(), party_label(party).to_string()],
            }
        })
        .collect()
}

/// PII keys on the wire. Cleartext transactions to any host yield
/// `D_PII_EXPOSURE` (request and response sides); requests to third-party
/// hosts yield `D_PII_THIRD_PARTY` whether or not they were encrypted.
pub fn detect_pii_exposure(txns: &[HttpTransaction], dict: &PiiDictionary, profile: &DeviceProfile) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, t) in txns.iter().enumerate() {
        let req_kinds = dict.kinds_in_message(&t.req_body, t.req_content_type(), t.query());
        if !t.tls {
            let resp_kinds = dict.kinds_in_message(&t.resp_body, t.resp_content_type(), None);
            let kinds: Vec<String> = dict
                .kinds()
                .filter(|k| req_kinds.iter().chain(&resp_kinds).any(|f| f == k))
                .map(str::to_string)
                .collect();
            if !kinds.is_empty() {
                out.push(Finding {
                    detector_id: DetectorId::PiiExposure,
                    severity: Severity::High,
                    summary: format!(
                        "{} {} to {} carries {} in cleartext",
                        t.method,
                        t.path,
                        t.host,
                        kinds.join(", ")
                    ),
                    evidence: vec![Evidence::Transaction(i)],
                    matched_fields: kinds,
                });
            }
        }
        if !req_kinds.is_empty() && classify_party(&t.host, profile) == Party::ThirdParty {
            out.push(Finding {
                detector_id: DetectorId::PiiThirdParty,
                severity: Severity::Medium,
                summary: format!("request to third-party host {} sends {}", t.host, req_kinds.join(", ")),
                evidence: vec![Evidence::Transaction(i)],
                matched_fields: req_kinds,
            });
        }
    }
    out
}

/// Groups POST requests by (header, value) and reports values that recur at
/// least `min_repeats` times over at least `min_span` seconds.
pub fn detect_token_reuse(
    txns: &[HttpTransaction],
    header_names: &[String],
    min_repeats: usize,
    min_span: f64,
) -> Vec<Finding> {
    let threshold = min_repeats.max(2);
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, t) in txns.iter().enumerate().filter(|(_, t)| t.method == Method::Post) {
        for name in header_names {
            if let Some(value) = t.req_headers.get(name) {
                groups
                    .entry((name.as_str(), value))
                    .or_insert_with(|| {
                        order.push((name.as_str(), value));
                        Vec::new()
                    })
                    .push(i);
            }
        }
    }
    order
        .into_iter()
        .filter_map(|key| {
            let idx = groups.remove(&key)?;
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(txns[i].ts_start), hi.max(txns[i].ts_start))
            });
            let span = hi - lo;
            if idx.len() < threshold || span < min_span {
                return None;
            }
            let (name, value) = key;
            Some(Finding {
                detector_id: DetectorId::TokenReuse,
                severity: Severity::Medium,
                summary: format!("{name} value reused on {} POST requests over {span:.1} s", idx.len()),
                evidence: idx.into_iter().map(Evidence::Transaction).collect(),
                matched_fields: vec![name.to_string(), value.to_string()],
            })
        })
        .collect()
}

/// Successful credential-free GETs that return PII.
pub fn detect_unauthenticated_resource(
    txns: &[HttpTransaction],
    dict: &PiiDictionary,
    auth_headers: &[String],
) -> Vec<Finding> {
    txns.iter()
        .enumerate()
        .filter(|(_, t)| t.method == Method::Get && t.status == 200)
        .filter(|(_, t)| {
            !t.req_headers.contains("authorization")
                && !t.req_headers.contains("cookie")
                && !auth_headers.iter().any(|h| t.req_headers.contains(h))
        })
        .filter_map(|(i, t)| {
            let kinds = dict.kinds_in_message(&t.resp_body, t.resp_content_type(), None);
            (!kinds.is_empty()).then(|| Finding {
                detector_id: DetectorId::NoAuth,
                severity: Severity::High,
                summary: format!(
                    "GET {} on {} returns {} without any credential",
                    t.path,
                    t.host,
                    kinds.join(", ")
                ),
                evidence: vec![Evidence::Transaction(i)],
                matched_fields: kinds,
            })
        })
        .collect()
}
