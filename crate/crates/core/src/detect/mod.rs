//! Vulnerability detectors.
//!
//! Passive detectors ([`passive`]) are pure functions over a transaction
//! list. Active probes ([`active`]) talk to a live target through a paced
//! [`crate::client::ProbeClient`]. Both produce [`Finding`]s with a shared
//! JSON shape.

pub mod active;
pub mod passive;
mod pii;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capture::{DeviceProfile, HttpTransaction};

pub use pii::{PiiDictionary, PiiError, PiiKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorId {
    #[serde(rename = "D_CLEARTEXT")]
    Cleartext,
    #[serde(rename = "D_PII_EXPOSURE")]
    PiiExposure,
    #[serde(rename = "D_TOKEN_REUSE")]
    TokenReuse,
    #[serde(rename = "D_NO_AUTH")]
    NoAuth,
    #[serde(rename = "D_ORACLE")]
    Oracle,
    #[serde(rename = "D_STALE_RESOURCE")]
    StaleResource,
    #[serde(rename = "D_PII_THIRD_PARTY")]
    PiiThirdParty,
    #[serde(rename = "D_SECRET_CONSTANT")]
    SecretConstant,
}

impl DetectorId {
    pub const ALL: [DetectorId; 8] = [
        DetectorId::Cleartext,
        DetectorId::PiiExposure,
        DetectorId::TokenReuse,
        DetectorId::NoAuth,
        DetectorId::Oracle,
        DetectorId::StaleResource,
        DetectorId::PiiThirdParty,
        DetectorId::SecretConstant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Cleartext => "D_CLEARTEXT",
            DetectorId::PiiExposure => "D_PII_EXPOSURE",
            DetectorId::TokenReuse => "D_TOKEN_REUSE",
            DetectorId::NoAuth => "D_NO_AUTH",
            DetectorId::Oracle => "D_ORACLE",
            DetectorId::StaleResource => "D_STALE_RESOURCE",
            DetectorId::PiiThirdParty => "D_PII_THIRD_PARTY",
            DetectorId::SecretConstant => "D_SECRET_CONSTANT",
        }
    }

    pub fn evidence_kind(self) -> EvidenceKind {
        match self {
            DetectorId::SecretConstant => EvidenceKind::File,
            DetectorId::Oracle | DetectorId::StaleResource => EvidenceKind::Probe,
            _ => EvidenceKind::Transaction,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown detector id `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceKind {
    Transaction,
    File,
    Probe,
}

/// A transaction index (zero-based, into the analyzed capture), a source
/// location, or an active-probe request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evidence {
    Transaction(usize),
    File { file: String, line: usize },
    Probe { request: String, status: u16 },
}

impl Evidence {
    pub fn kind(&self) -> EvidenceKind {
        match self {
            Evidence::Transaction(_) => EvidenceKind::Transaction,
            Evidence::File { .. } => EvidenceKind::File,
            Evidence::Probe { .. } => EvidenceKind::Probe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub detector_id: DetectorId,
    pub severity: Severity,
    pub summary: String,
    pub evidence: Vec<Evidence>,
    pub matched_fields: Vec<String>,
}

impl Finding {
    /// Evidence must be present and of the kind the detector produces.
    pub fn validate(&self) -> Result<(), String> {
        if self.evidence.is_empty() {
            return Err(format!("{} finding without evidence", self.detector_id));
        }
        let want = self.detector_id.evidence_kind();
        if let Some(bad) = self.evidence.iter().find(|e| e.kind() != want) {
            return Err(format!("{} finding carries {bad:?}", self.detector_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub pii: PiiDictionary,
    /// Custom headers that count as credentials for the no-auth check.
    pub auth_headers: Vec<String>,
    /// Headers whose values are tracked for token reuse.
    pub token_headers: Vec<String>,
    pub min_repeats: usize,
    pub min_span: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            pii: PiiDictionary::default(),
            auth_headers: vec!["X-Auth-Token".into()],
            token_headers: vec!["X-Auth-Token".into()],
            min_repeats: 2,
            min_span: 0.0,
        }
    }
}

/// Runs every passive detector and concatenates their findings in a fixed
/// detector order.
pub fn run_passive(txns: &[HttpTransaction], profile: &DeviceProfile, config: &DetectorConfig) -> Vec<Finding> {
    let mut out = passive::detect_cleartext(txns, profile);
    out.extend(passive::detect_pii_exposure(txns, &config.pii, profile));
    out.extend(passive::detect_token_reuse(
        txns,
        &config.token_headers,
        config.min_repeats,
        config.min_span,
    ));
    out.extend(passive::detect_unauthenticated_resource(
        txns,
        &config.pii,
        &config.auth_headers,
    ));
    out
}
