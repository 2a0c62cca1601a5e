use regex::{Regex, RegexBuilder};
use thiserror::Error;

use crate::flatconfig::{self, FlatConfigError};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error(transparent)]
    Config(#[from] FlatConfigError),
    #[error("bad name pattern `{pattern}`: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("min_value_length must be at least 1")]
    ZeroLength,
    #[error("entropy_threshold must be a non-negative number, got {0}")]
    BadThreshold(f64),
}

pub const DEFAULT_NAME_PATTERN: &str = "SECRET|TOKEN|API_?KEY|PASSWORD|PRIVATE_?KEY";

#[derive(Debug, Clone)]
pub struct SecretRule {
    name_pattern: Regex,
    pub min_value_length: usize,
    pub entropy_threshold: f64,
}

impl Default for SecretRule {
    fn default() -> Self {
        Self::new(DEFAULT_NAME_PATTERN, 8, 3.0).expect("default rule is valid")
    }
}

impl SecretRule {
    /// `name_pattern` is matched case-insensitively anywhere in the identifier.
    pub fn new(name_pattern: &str, min_value_length: usize, entropy_threshold: f64) -> Result<Self, RuleError> {
        let name_pattern = RegexBuilder::new(name_pattern)
            .case_insensitive(true)
            .build()
            .map_err(|source| RuleError::BadPattern {
                pattern: name_pattern.to_string(),
                source,
            })?;
        if min_value_length == 0 {
            return Err(RuleError::ZeroLength);
        }
        if !(entropy_threshold.is_finite() && entropy_threshold >= 0.0) {
            return Err(RuleError::BadThreshold(entropy_threshold));
        }
        Ok(Self {
            name_pattern,
            min_value_length,
            entropy_threshold,
        })
    }

    pub fn name_pattern(&self) -> &str {
        self.name_pattern.as_str()
    }

    pub fn name_matches(&self, identifier: &str) -> bool {
        self.name_pattern.is_match(identifier)
    }
}

/// Reads rules from flat `key = value` text. Each `name_pattern` line starts
/// a new rule; `min_value_length` and `entropy_threshold` set fields of the
/// current rule (a default-pattern rule is started if none is open).
pub fn load_rules(text: &str) -> Result<Vec<SecretRule>, RuleError> {
    struct Draft {
        pattern: String,
        min_len: usize,
        threshold: f64,
    }
    let fresh = |pattern: String| Draft {
        pattern,
        min_len: 8,
        threshold: 3.0,
    };
    let mut drafts: Vec<Draft> = Vec::new();
    for entry in flatconfig::parse(text)? {
        match entry.key.as_str() {
            "name_pattern" => drafts.push(fresh(entry.value.clone())),
            "min_value_length" => {
                if drafts.is_empty() {
                    drafts.push(fresh(DEFAULT_NAME_PATTERN.into()));
                }
                let last = drafts.last_mut().expect("draft exists");
                last.min_len = entry.parse()?;
            }
            "entropy_threshold" => {
                if drafts.is_empty() {
                    drafts.push(fresh(DEFAULT_NAME_PATTERN.into()));
                }
                let last = drafts.last_mut().expect("draft exists");
                last.threshold = entry.parse()?;
            }
            _ => return Err(entry.unknown().into()),
        }
    }
    if drafts.is_empty() {
        return Ok(vec![SecretRule::default()]);
    }
    drafts
        .into_iter()
        .map(|d| SecretRule::new(&d.pattern, d.min_len, d.threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_names() {
        let r = SecretRule::default();
        for id in [
            "APP_SECRET",
            "authToken",
            "STRIPE_API_KEY",
            "apikey",
            "db_password",
            "PRIVATEKEY",
        ] {
            assert!(r.name_matches(id), "{id}");
        }
        assert!(!r.name_matches("LOG_TAG"));
    }

    #[test]
    fn rules_file() {
        let rules = load_rules(
            "# custom\nname_pattern = ^NOOK_\nmin_value_length = 4\nname_pattern = PASS\nentropy_threshold = 4.5\n",
        )
        .unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].min_value_length, 4);
        assert_eq!(rules[1].entropy_threshold, 4.5);
        assert_eq!(load_rules("").unwrap().len(), 1);
        assert_eq!(
            load_rules("entropy_threshold = 2.5").unwrap()[0].name_pattern(),
            DEFAULT_NAME_PATTERN
        );
        assert!(matches!(load_rules("colour = red"), Err(RuleError::Config(_))));
        assert!(matches!(load_rules("min_value_length = 0"), Err(RuleError::ZeroLength)));
        assert!(matches!(
            load_rules("entropy_threshold = -1"),
            Err(RuleError::BadThreshold(_))
        ));
        assert!(matches!(
            load_rules("name_pattern = ("),
            Err(RuleError::BadPattern { .. })
        ));
    }
}
