use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use thiserror::Error;
use walkdir::WalkDir;

use crate::detect::{DetectorId, Evidence, Finding, Severity};

use super::{shannon_entropy, SecretRule};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read source root {path}: {reason}")]
    UnreadableRoot { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub findings: Vec<Finding>,
    /// Files that were skipped, with the reason.
    pub warnings: Vec<String>,
    pub files_scanned: usize,
}

fn assignment_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?x)
            ([A-Za-z_$][A-Za-z0-9_$]*)["']?          # identifier, maybe closing a quoted key
            \s*(?::\s*[A-Za-z_][A-Za-z0-9_.<>\[\]]*\s*)? # optional type annotation
            (?::=|=|:)\s*
            (?:"((?:[^"\\]|\\.)*)"|'((?:[^'\\]|\\.)*)')
            "#,
        )
        .expect("static regex")
    })
}

fn is_scalar_literal(value: &str) -> bool {
    let v = value.trim();
    v.eq_ignore_ascii_case("true") || v.eq_ignore_ascii_case("false") || v.parse::<f64>().is_ok()
}

/// Triggers fired by one literal: `name_pattern` and/or `entropy`.
fn triggers(identifier: &str, value: &str, rules: &[SecretRule]) -> Vec<&'static str> {
    let entropy = shannon_entropy(value).unwrap_or(0.0);
    let len = value.chars().count();
    let by_name = rules.iter().any(|r| r.name_matches(identifier));
    let by_entropy = rules
        .iter()
        .any(|r| len >= r.min_value_length && entropy >= r.entropy_threshold);
    let mut out = Vec::new();
    if by_name {
        out.push("name_pattern");
    }
    if by_entropy {
        out.push("entropy");
    }
    out
}

fn scan_text(rel: &str, text: &str, rules: &[SecretRule]) -> Vec<Finding> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for caps in assignment_regex().captures_iter(line) {
            let identifier = &caps[1];
            let Some(value) = caps.get(2).or_else(|| caps.get(3)).map(|m| m.as_str()) else {
                continue;
            };
            if value.is_empty() || is_scalar_literal(value) {
                continue;
            }
            let fired = triggers(identifier, value, rules);
            if fired.is_empty() {
                continue;
            }
            out.push(Finding {
                detector_id: DetectorId::SecretConstant,
                severity: Severity::High,
                summary: format!(
                    "{identifier} holds a {}-character plaintext literal ({})",
                    value.chars().count(),
                    fired.join(", ")
                ),
                evidence: vec![Evidence::File {
                    file: rel.to_string(),
                    line: idx + 1,
                }],
                matched_fields: std::iter::once(identifier.to_string())
                    .chain(fired.iter().map(|s| s.to_string()))
                    .collect(),
            });
        }
    }
    out
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

enum FileOutcome {
    Scanned(Vec<Finding>),
    Skipped(String),
}

/// Scans every regular file under `root` in parallel. Findings are ordered
/// by (path, line); unreadable or non-UTF-8 files become warnings.
pub fn scan_secrets(root: &Path, rules: &[SecretRule]) -> Result<ScanReport, ScanError> {
    let meta = std::fs::metadata(root).map_err(|e| ScanError::UnreadableRoot {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })?;
    if !meta.is_dir() {
        return Err(ScanError::UnreadableRoot {
            path: root.to_path_buf(),
            reason: "not a directory".into(),
        });
    }
    std::fs::read_dir(root).map_err(|e| ScanError::UnreadableRoot {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })?;

    let default_rules;
    let rules = if rules.is_empty() {
        default_rules = [SecretRule::default()];
        &default_rules[..]
    } else {
        rules
    };

    let mut warnings = Vec::new();
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => warnings.push(format!("walk error: {e}")),
        }
    }

    let outcomes: Vec<(String, FileOutcome)> = files
        .par_iter()
        .map(|path| {
            let rel = relative(root, path);
            let outcome = match std::fs::read(path) {
                Err(e) => FileOutcome::Skipped(format!("{rel}: unreadable ({e})")),
                Ok(bytes) if bytes.contains(&0) => FileOutcome::Skipped(format!("{rel}: binary file")),
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(text) => FileOutcome::Scanned(scan_text(&rel, &text, rules)),
                    Err(_) => FileOutcome::Skipped(format!("{rel}: not UTF-8 text")),
                },
            };
            (rel, outcome)
        })
        .collect();

    let mut findings = Vec::new();
    let mut files_scanned = 0;
    for (_, outcome) in outcomes {
        match outcome {
            FileOutcome::Scanned(f) => {
                files_scanned += 1;
                findings.extend(f);
            }
            FileOutcome::Skipped(w) => {
                tracing::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    findings.sort_by(|a, b| evidence_key(a).cmp(&evidence_key(b)));
    Ok(ScanReport {
        findings,
        warnings,
        files_scanned,
    })
}

fn evidence_key(f: &Finding) -> (&str, usize) {
    match f.evidence.first() {
        Some(Evidence::File { file, line }) => (file.as_str(), *line),
        _ => ("", 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(text: &str) -> Vec<Finding> {
        scan_text("f.java", text, &[SecretRule::default()])
    }

    #[test]
    fn low_entropy_name_match() {
        let f = scan(r#"APP_SECRET = "changeme""#);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].matched_fields, ["APP_SECRET", "name_pattern"]);
    }

    #[test]
    fn entropy_only_match() {
        let f = scan(r#"const blob = "q8Zr1KxV0pLw7TnB";"#);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].matched_fields, ["blob", "entropy"]);
    }

    #[test]
    fn assignment_forms() {
        let text = r#"
public static final String A_TOKEN = "x1";
val apiKey: String = "k";
password := "pw"
"secret_key": "abc"
db_password: 'hunter'
"#;
        let lines: Vec<usize> = scan(text)
            .iter()
            .map(|f| match f.evidence[0] {
                Evidence::File { line, .. } => line,
                _ => 0,
            })
            .collect();
        assert_eq!(lines, [2, 3, 4, 5, 6]);
    }

    #[test]
    fn scalars_and_comparisons_ignored() {
        assert!(scan("API_KEY = 12345678\nTOKEN = true\n").is_empty());
        assert!(scan(r#"MY_TOKEN = "12345678""#).is_empty());
        assert!(scan(r#"if (token == "abc") {}"#).is_empty());
        assert!(scan(r#"LOG_TAG = "PetApp""#).is_empty());
    }

    #[test]
    fn tree_scan_is_sorted_and_relative() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("b/c")).unwrap();
        std::fs::write(dir.path().join("b/c/K.java"), "x\nSECRET = \"abcdefgh\"\n").unwrap();
        std::fs::write(dir.path().join("a.py"), "TOKEN = 'zz'\n").unwrap();
        std::fs::write(dir.path().join("bin.dat"), [0u8, 159, 146, 150]).unwrap();
        std::fs::write(dir.path().join("latin.txt"), [b'a', 0xE9, b'\n']).unwrap();
        let report = scan_secrets(dir.path(), &[]).unwrap();
        let keys: Vec<_> = report.findings.iter().map(evidence_key).collect();
        assert_eq!(keys, [("a.py", 1), ("b/c/K.java", 2)]);
        assert_eq!(report.warnings.len(), 2);
        assert_eq!(report.files_scanned, 2);
    }

    #[test]
    fn empty_tree_and_missing_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("Plain.java"), "int x = 3;\n").unwrap();
        assert!(scan_secrets(dir.path(), &[]).unwrap().findings.is_empty());
        assert!(matches!(
            scan_secrets(&dir.path().join("nope"), &[]),
            Err(ScanError::UnreadableRoot { .. })
        ));
    }
}
