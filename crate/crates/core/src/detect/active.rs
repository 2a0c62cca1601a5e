//! Probes that send requests to a live target.
//!
//! All requests go through one paced [`ProbeClient`], one at a time.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::client::{ClientError, ProbeClient};

use super::{DetectorId, Evidence, Finding, Severity};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("oracle inconclusive: all {probes} probes returned status {status}")]
    OracleInconclusive { status: u16, probes: usize },
    #[error("scripted action failed: {0}")]
    ActionFailed(String),
    #[error("invalid probe: {0}")]
    InvalidProbe(String),
}

impl From<ClientError> for ProbeError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Unreachable(m) => ProbeError::TargetUnreachable(m),
            other => ProbeError::InvalidProbe(other.to_string()),
        }
    }
}

pub const PREFIX_PLACEHOLDER: &str = "{prefix}";

#[derive(Debug, Clone)]
pub struct OracleProbe {
    /// Request path containing `{prefix}` once, e.g. `/api/photo/{prefix}`.
    pub path_template: String,
    pub alphabet: Vec<char>,
    pub prefix_len: usize,
    pub probe_count: usize,
    pub seed: u64,
    /// Prefixes believed valid; probed before the random ones.
    pub known_valid_prefixes: Vec<String>,
    pub headers: Vec<(String, String)>,
}

impl OracleProbe {
    fn validate(&self) -> Result<(), ProbeError> {
        if self.path_template.matches(PREFIX_PLACEHOLDER).count() != 1 {
            return Err(ProbeError::InvalidProbe(format!(
                "path template must contain {PREFIX_PLACEHOLDER} exactly once"
            )));
        }
        if self.alphabet.is_empty() || self.prefix_len == 0 {
            return Err(ProbeError::InvalidProbe("empty alphabet or zero prefix length".into()));
        }
        if self.probe_count + self.known_valid_prefixes.len() == 0 {
            return Err(ProbeError::InvalidProbe("no probes requested".into()));
        }
        Ok(())
    }

    /// Known prefixes followed by `probe_count` seeded random ones.
    pub fn prefixes(&self) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let random = (0..self.probe_count).map(|_| {
            (0..self.prefix_len)
                .map(|_| self.alphabet[rng.gen_range(0..self.alphabet.len())])
                .collect::<String>()
        });
        self.known_valid_prefixes.iter().cloned().chain(random).collect()
    }
}

/// Sends truncated-token requests and reports `D_ORACLE` when the statuses
/// split into at least two classes.
pub fn probe_response_oracle(client: &ProbeClient, probe: &OracleProbe) -> Result<Vec<Finding>, ProbeError> {
    probe.validate()?;
    let prefixes = probe.prefixes();
    let mut first_by_status: BTreeMap<u16, String> = BTreeMap::new();
    for prefix in &prefixes {
        let path = probe.path_template.replace(PREFIX_PLACEHOLDER, prefix);
        let resp = client.get(&path, &probe.headers)?;
        tracing::debug!(%path, status = resp.status, "oracle probe");
        first_by_status.entry(resp.status).or_insert(path);
    }
    if first_by_status.len() < 2 {
        let status = first_by_status.keys().next().copied().unwrap_or(0);
        return Err(ProbeError::OracleInconclusive {
            status,
            probes: prefixes.len(),
        });
    }
    let statuses: Vec<String> = first_by_status.keys().map(u16::to_string).collect();
    Ok(vec![Finding {
        detector_id: DetectorId::Oracle,
        severity: Severity::Medium,
        summary: format!(
            "truncated-token requests split into statuses {} across {} probes",
            statuses.join("/"),
            prefixes.len()
        ),
        evidence: first_by_status
            .into_iter()
            .map(|(status, request)| Evidence::Probe { request, status })
            .collect(),
        matched_fields: statuses,
    }])
}

/// A resource URL from before an overwrite, with the credentials its owner
/// would use to fetch it.
#[derive(Debug, Clone)]
pub struct StaleTarget {
    pub old_url: String,
    pub headers: Vec<(String, String)>,
}

/// Runs `overwrite_action`, then fetches the URL it reports as replaced.
/// `D_STALE_RESOURCE` when that still returns 200 with a body.
pub fn probe_stale_resource<F>(client: &ProbeClient, overwrite_action: F) -> Result<Vec<Finding>, ProbeError>
where
    F: FnOnce(&ProbeClient) -> Result<StaleTarget, ProbeError>,
{
    let target = overwrite_action(client)?;
    let resp = client.get(&target.old_url, &target.headers)?;
    if resp.status == 200 && !resp.body.is_empty() {
        Ok(vec![Finding {
            detector_id: DetectorId::StaleResource,
            severity: Severity::High,
            summary: format!(
                "overwritten resource {} still served ({} bytes)",
                target.old_url,
                resp.body.len()
            ),
            evidence: vec![Evidence::Probe {
                request: target.old_url.clone(),
                status: resp.status,
            }],
            matched_fields: vec![target.old_url],
        }])
    } else {
        Ok(Vec::new())
    }
}

/// Stand-in image bytes used by the scripted uploads.
pub const PROBE_IMAGE: &[u8] = &[
    0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, b'J', b'F', b'I', b'F', 0x00, 0xFF, 0xD9,
];

fn json_field(body: &[u8], field: &str) -> Result<String, ProbeError> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| ProbeError::ActionFailed(format!("response is not JSON: {e}")))?;
    value
        .get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProbeError::ActionFailed(format!("response lacks `{field}`")))
}

/// Registers a throwaway account on a toy API and returns `(user_id, auth_token)`.
pub fn create_probe_account(client: &ProbeClient) -> Result<(String, String), ProbeError> {
    let body = json!({
        "name": "probe",
        "gender": "unspecified",
        "birthday": "2012-01-01",
        "weight_kg": 30.0,
        "height_cm": 130.0,
        "age_years": 7
    })
    .to_string();
    let headers = [("Content-Type".to_string(), "application/json".to_string())];
    let resp = client.send("POST", "/api/account", &headers, body.as_bytes())?;
    if resp.status != 200 {
        return Err(ProbeError::ActionFailed(format!(
            "account creation returned {}",
            resp.status
        )));
    }
    Ok((
        json_field(&resp.body, "user_id")?,
        json_field(&resp.body, "auth_token")?,
    ))
}

/// Uploads a photo for `user_id`; returns the issued photo token.
pub fn upload_photo(client: &ProbeClient, user_id: &str, auth_token: &str) -> Result<String, ProbeError> {
    let headers = [
        ("X-Auth-Token".to_string(), auth_token.to_string()),
        ("Content-Type".to_string(), "image/jpeg".to_string()),
    ];
    let resp = client.send("PUT", &format!("/api/photo/{user_id}"), &headers, PROBE_IMAGE)?;
    if resp.status != 200 {
        return Err(ProbeError::ActionFailed(format!(
            "photo upload for user `{user_id}` returned {}",
            resp.status
        )));
    }
    json_field(&resp.body, "token")
}

/// Overwrite action for an existing account: upload twice and report the
/// first photo's URL.
pub fn overwrite_user_photo(
    client: &ProbeClient,
    user_id: &str,
    auth_token: &str,
    prefix_len: usize,
) -> Result<StaleTarget, ProbeError> {
    let old = upload_photo(client, user_id, auth_token)?;
    let new = upload_photo(client, user_id, auth_token)?;
    if old == new {
        return Err(ProbeError::ActionFailed("overwrite returned the same token".into()));
    }
    let Some(prefix) = old.get(..prefix_len) else {
        return Err(ProbeError::ActionFailed(format!("token `{old}` shorter than prefix")));
    };
    Ok(StaleTarget {
        old_url: format!("/api/photo/{prefix}/{old}"),
        headers: vec![("Authorization".into(), format!("Bearer {auth_token}"))],
    })
}

/// Overwrite action that first creates its own account.
pub fn overwrite_own_photo(client: &ProbeClient, prefix_len: usize) -> Result<StaleTarget, ProbeError> {
    let (user_id, auth_token) = create_probe_account(client)?;
    overwrite_user_photo(client, &user_id, &auth_token, prefix_len)
}
