use thiserror::Error;

use super::HttpTransaction;

#[derive(Debug, Error)]
#[error("line {line}: {reason}")]
pub struct SchemaError {
    pub line: usize,
    pub reason: String,
}

/// Parses a JSONL transaction log. Blank lines are skipped; the first
/// malformed line aborts with its 1-based line number.
pub fn parse_transaction_log(text: &str) -> Result<Vec<HttpTransaction>, SchemaError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let txn: HttpTransaction = serde_json::from_str(line).map_err(|e| SchemaError {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        txn.check_invariants()
            .map_err(|reason| SchemaError { line: idx + 1, reason })?;
        out.push(txn);
    }
    Ok(out)
}

pub fn write_transaction_log(txns: &[HttpTransaction]) -> String {
    let mut out = String::new();
    for txn in txns {
        // HttpTransaction contains only string-keyed maps and plain values
        out.push_str(&serde_json::to_string(txn).expect("transaction serializes"));
        out.push('\n');
    }
    out
}
