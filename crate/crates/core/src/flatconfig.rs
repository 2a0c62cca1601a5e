//! Flat `key = value` configuration text.
//!
//! One entry per line, `#` starts a comment line, blank lines are ignored.
//! Keys may repeat; callers decide what repetition means.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlatConfigError {
    #[error("line {line}: expected `key = value`")]
    MissingSeparator { line: usize },
    #[error("line {line}: empty key")]
    EmptyKey { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn invalid(&self, reason: impl Into<String>) -> FlatConfigError {
        FlatConfigError::InvalidValue {
            line: self.line,
            key: self.key.clone(),
            reason: reason.into(),
        }
    }

    pub fn unknown(&self) -> FlatConfigError {
        FlatConfigError::UnknownKey {
            line: self.line,
            key: self.key.clone(),
        }
    }

    pub fn parse<T: std::str::FromStr>(&self) -> Result<T, FlatConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| self.invalid(e.to_string()))
    }

    pub fn parse_bool(&self) -> Result<bool, FlatConfigError> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Ok(true),
            "false" | "off" | "no" | "0" => Ok(false),
            _ => Err(self.invalid("expected a boolean")),
        }
    }
}

pub fn parse(text: &str) -> Result<Vec<Entry>, FlatConfigError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or(FlatConfigError::MissingSeparator { line })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(FlatConfigError::EmptyKey { line });
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}
