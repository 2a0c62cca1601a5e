use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{DetectorId, Finding};

pub const DEFAULT_CATALOG_JSON: &str = include_str!("default_catalog.json");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("catalog schema error: {0}")]
    CatalogSchemaError(String),
    #[error("duplicate clause id `{0}`")]
    DuplicateClauseId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClauseSource {
    Regulation,
    PrivacyPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceClause {
    pub clause_id: String,
    pub source: ClauseSource,
    pub quoted_text: String,
    pub triggering_detectors: BTreeSet<DetectorId>,
}

/// Parses and validates a catalog: a JSON array of clauses with unique ids,
/// non-empty text and at least one triggering detector each.
pub fn load_clause_catalog(text: &str) -> Result<Vec<ComplianceClause>, CatalogError> {
    let clauses: Vec<ComplianceClause> =
        serde_json::from_str(text).map_err(|e| CatalogError::CatalogSchemaError(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for clause in &clauses {
        if clause.clause_id.trim().is_empty() {
            return Err(CatalogError::CatalogSchemaError("empty clause_id".into()));
        }
        if clause.quoted_text.trim().is_empty() {
            return Err(CatalogError::CatalogSchemaError(format!(
                "clause `{}` has no quoted_text",
                clause.clause_id
            )));
        }
        if clause.triggering_detectors.is_empty() {
            return Err(CatalogError::CatalogSchemaError(format!(
                "clause `{}` has no triggering detectors",
                clause.clause_id
            )));
        }
        if !seen.insert(clause.clause_id.as_str()) {
            return Err(CatalogError::DuplicateClauseId(clause.clause_id.clone()));
        }
    }
    Ok(clauses)
}

pub fn default_catalog() -> Vec<ComplianceClause> {
    load_clause_catalog(DEFAULT_CATALOG_JSON).expect("shipped catalog is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub clause_id: String,
    pub source: ClauseSource,
    pub quoted_text: String,
    /// Indices into the finding list, ascending.
    pub supporting_findings: Vec<usize>,
}

/// One violation per clause (in catalog order) that at least one finding
/// triggers.
pub fn map_findings(findings: &[Finding], catalog: &[ComplianceClause]) -> Vec<Violation> {
    catalog
        .iter()
        .filter_map(|clause| {
            let supporting: Vec<usize> = findings
                .iter()
                .enumerate()
                .filter(|(_, f)| clause.triggering_detectors.contains(&f.detector_id))
                .map(|(i, _)| i)
                .collect();
            (!supporting.is_empty()).then(|| Violation {
                clause_id: clause.clause_id.clone(),
                source: clause.source,
                quoted_text: clause.quoted_text.clone(),
                supporting_findings: supporting,
            })
        })
        .collect()
}
