//! Finding-to-clause mapping and audit report rendering.

mod catalog;
mod report;

pub use catalog::{
    default_catalog, load_clause_catalog, map_findings, CatalogError, ClauseSource, ComplianceClause, Violation,
    DEFAULT_CATALOG_JSON,
};
pub use report::{render_report, AuditReport, ReportError, ReportFormat};
