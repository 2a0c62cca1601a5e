use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::HttpTransaction;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty host pattern")]
    EmptyPattern,
    #[error("pattern `{0}` is listed as both first-party and third-party")]
    Overlap(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdPartyHost {
    pub pattern: String,
    pub service: String,
}

/// Which hosts a device talks to, split by owner. Patterns are exact host
/// names or `*.suffix` wildcards, compared case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_name: String,
    #[serde(default)]
    pub first_party_hosts: Vec<String>,
    #[serde(default)]
    pub third_party_hosts: Vec<ThirdPartyHost>,
}

impl DeviceProfile {
    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let profile: DeviceProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let third: Vec<String> = self
            .third_party_hosts
            .iter()
            .map(|t| t.pattern.to_ascii_lowercase())
            .collect();
        for p in self
            .first_party_hosts
            .iter()
            .chain(self.third_party_hosts.iter().map(|t| &t.pattern))
        {
            if p.trim().is_empty() || p == "*." {
                return Err(ProfileError::EmptyPattern);
            }
        }
        if let Some(dup) = self
            .first_party_hosts
            .iter()
            .find(|p| third.contains(&p.to_ascii_lowercase()))
        {
            return Err(ProfileError::Overlap(dup.clone()));
        }
        Ok(())
    }

    /// Service label of the first third-party pattern matching `host`.
    pub fn third_party_service(&self, host: &str) -> Option<&str> {
        if self.first_party_hosts.iter().any(|p| pattern_matches(p, host)) {
            return None;
        }
        self.third_party_hosts
            .iter()
            .find(|t| pattern_matches(&t.pattern, host))
            .map(|t| t.service.as_str())
    }
}

fn pattern_matches(pattern: &str, host: &str) -> bool {
    let host = host.trim_end_matches('.');
    match pattern.strip_prefix("*.") {
        Some(suffix) => {
            host.len() > suffix.len() + 1
                && host.as_bytes()[host.len() - suffix.len() - 1] == b'.'
                && host[host.len() - suffix.len()..].eq_ignore_ascii_case(suffix)
        }
        None => pattern.eq_ignore_ascii_case(host),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    FirstParty,
    ThirdParty,
    Unknown,
}

pub fn classify_party(host: &str, profile: &DeviceProfile) -> Party {
    if profile.first_party_hosts.iter().any(|p| pattern_matches(p, host)) {
        Party::FirstParty
    } else if profile
        .third_party_hosts
        .iter()
        .any(|t| pattern_matches(&t.pattern, host))
    {
        Party::ThirdParty
    } else {
        Party::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointStats {
    pub host: String,
    pub party: Party,
    pub total_bytes: u64,
    pub byte_fraction: f64,
    pub transaction_count: usize,
    pub all_tls: bool,
}

/// Per-host traffic totals, largest first (ties by host name).
pub fn endpoint_stats(txns: &[HttpTransaction], profile: &DeviceProfile) -> Vec<EndpointStats> {
    let mut per_host: BTreeMap<&str, (u64, usize, bool)> = BTreeMap::new();
    for t in txns {
        let entry = per_host.entry(t.host.as_str()).or_insert((0, 0, true));
        entry.0 += t.req_bytes + t.resp_bytes;
        entry.1 += 1;
        entry.2 &= t.tls;
    }
    let grand: u64 = per_host.values().map(|v| v.0).sum();
    let mut stats: Vec<EndpointStats> = per_host
        .into_iter()
        .map(|(host, (total, count, all_tls))| EndpointStats {
            host: host.to_string(),
            party: classify_party(host, profile),
            total_bytes: total,
            byte_fraction: if grand == 0 { 0.0 } else { total as f64 / grand as f64 },
            transaction_count: count,
            all_tls,
        })
        .collect();
    stats.sort_by(|a, b| b.total_bytes.cmp(&a.total_bytes).then_with(|| a.host.cmp(&b.host)));
    stats
}
