use std::collections::BTreeSet;

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

pub type PiiKind = String;

#[derive(Debug, Error)]
pub enum PiiError {
    #[error("PII dictionary has no patterns")]
    Empty,
    #[error("duplicate PII kind `{0}`")]
    DuplicateKind(String),
    #[error("bad pattern for `{kind}`: {source}")]
    BadPattern {
        kind: String,
        #[source]
        source: regex::Error,
    },
}

/// Key-name patterns per PII kind. A field key matches a kind when the
/// whole key matches the pattern, ignoring case.
#[derive(Debug, Clone)]
pub struct PiiDictionary {
    patterns: Vec<(PiiKind, Regex)>,
}

const DEFAULT_PATTERNS: [(&str, &str); 7] = [
    (
        "name",
        r"name|first_?name|last_?name|full_?name|child_?name|user_?name|nick_?name",
    ),
    ("gender", r"gender|sex"),
    ("birthday", r"birthday|birth_?date|date_?of_?birth|dob"),
    ("weight", r"weight|weight_?kg|weight_?lbs?|body_?weight"),
    ("height", r"height|height_?cm|height_?in"),
    ("age", r"age|age_?years"),
    ("photo", r"photo|photo_?url|avatar|profile_?(pic|picture|photo|image)"),
];

/// Kind reported for image payloads.
const PHOTO: &str = "photo";

impl Default for PiiDictionary {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERNS.iter().map(|(k, p)| (k.to_string(), p.to_string())))
            .expect("built-in patterns are valid")
    }
}

impl PiiDictionary {
    pub fn new(patterns: impl IntoIterator<Item = (String, String)>) -> Result<Self, PiiError> {
        let mut compiled: Vec<(PiiKind, Regex)> = Vec::new();
        for (kind, pattern) in patterns {
            if compiled.iter().any(|(k, _)| *k == kind) {
                return Err(PiiError::DuplicateKind(kind));
            }
            let re = Regex::new(&format!("(?i)^(?:{pattern})$")).map_err(|source| PiiError::BadPattern {
                kind: kind.clone(),
                source,
            })?;
            compiled.push((kind, re));
        }
        if compiled.is_empty() {
            return Err(PiiError::Empty);
        }
        Ok(Self { patterns: compiled })
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(|(k, _)| k.as_str())
    }

    pub fn kind_of_key(&self, key: &str) -> Option<&str> {
        self.patterns
            .iter()
            .find(|(_, re)| re.is_match(key))
            .map(|(k, _)| k.as_str())
    }

    /// PII kinds carried by one message side, in dictionary order.
    pub fn kinds_in_message(&self, body: &[u8], content_type: Option<&str>, query: Option<&str>) -> Vec<String> {
        let mut found: BTreeSet<&str> = BTreeSet::new();
        let is_image = content_type
            .map(|c| c.trim().to_ascii_lowercase().starts_with("image/"))
            .unwrap_or(false);
        if is_image && !body.is_empty() && self.patterns.iter().any(|(k, _)| k == PHOTO) {
            found.insert(PHOTO);
        }
        if !is_image {
            for key in body_keys(body, content_type) {
                if let Some(kind) = self.kind_of_key(&key) {
                    found.insert(kind);
                }
            }
        }
        if let Some(q) = query {
            for (key, _) in url::form_urlencoded::parse(q.as_bytes()) {
                if let Some(kind) = self.kind_of_key(&key) {
                    found.insert(kind);
                }
            }
        }
        self.kinds().filter(|k| found.contains(k)).map(str::to_string).collect()
    }
}

fn json_keys(value: &Value, out: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                out.push(k.clone());
                json_keys(v, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|v| json_keys(v, out)),
        _ => {}
    }
}

fn looks_form_encoded(text: &str) -> bool {
    !text.is_empty()
        && !text.contains(char::is_whitespace)
        && text.split('&').all(|pair| {
            pair.split_once('=')
                .is_some_and(|(k, _)| !k.is_empty() && !k.contains(['<', '>', '{', '"']))
        })
}

fn raw_key_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?:<\s*([A-Za-z_][A-Za-z0-9_.\-]*)|([A-Za-z_][A-Za-z0-9_]*)["']?\s*[:=])"#).expect("static regex")
    })
}

/// Field names found in a body: JSON keys (recursively), form keys, or a
/// lexical `key:`/`key=`/`<tag` scan for anything else.
pub(crate) fn body_keys(body: &[u8], content_type: Option<&str>) -> Vec<String> {
    if body.is_empty() {
        return Vec::new();
    }
    if let Ok(value) = serde_json::from_slice::<Value>(body) {
        let mut out = Vec::new();
        json_keys(&value, &mut out);
        return out;
    }
    let text = String::from_utf8_lossy(body);
    let form_declared = content_type
        .map(|c| c.to_ascii_lowercase().contains("x-www-form-urlencoded"))
        .unwrap_or(false);
    if form_declared || looks_form_encoded(text.trim()) {
        return url::form_urlencoded::parse(text.trim().as_bytes())
            .map(|(k, _)| k.into_owned())
            .collect();
    }
    raw_key_regex()
        .captures_iter(&text)
        .filter_map(|c| c.get(1).or_else(|| c.get(2)))
        .map(|m| m.as_str().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crash_report_kinds() {
        let dict = PiiDictionary::default();
        let body =
            br#"{"name":"Ada","gender":"F","birthday":"2010-04-01","weight":31.5,"error":"NullPointerException"}"#;
        assert_eq!(
            dict.kinds_in_message(body, Some("application/json"), None),
            ["name", "gender", "birthday", "weight"]
        );
    }

    #[test]
    fn no_pii_in_score() {
        let dict = PiiDictionary::default();
        assert!(dict.kinds_in_message(br#"{"score": 7}"#, None, None).is_empty());
    }

    #[test]
    fn anchored_matching() {
        let dict = PiiDictionary::default();
        assert_eq!(dict.kind_of_key("Age"), Some("age"));
        assert_eq!(dict.kind_of_key("page"), None);
        assert_eq!(dict.kind_of_key("message"), None);
        assert_eq!(dict.kind_of_key("firstName"), Some("name"));
        assert_eq!(dict.kind_of_key("profile_picture"), Some("photo"));
    }

    #[test]
    fn image_payload_is_photo() {
        let dict = PiiDictionary::default();
        assert_eq!(
            dict.kinds_in_message(&[0xFF, 0xD8, 0xFF], Some("image/jpeg"), None),
            ["photo"]
        );
        assert!(dict.kinds_in_message(&[], Some("image/jpeg"), None).is_empty());
    }

    #[test]
    fn form_query_and_raw_bodies() {
        let dict = PiiDictionary::default();
        assert_eq!(dict.kinds_in_message(b"dob=2010-01-01&x=1", None, None), ["birthday"]);
        assert_eq!(dict.kinds_in_message(b"", None, Some("gender=m&v=2")), ["gender"]);
        assert_eq!(
            dict.kinds_in_message(b"<user><height>120</height></user>", None, None),
            ["height"]
        );
        assert_eq!(
            dict.kinds_in_message(b"crash: weight = 40\n", Some("text/plain"), None),
            ["weight"]
        );
        assert!(dict
            .kinds_in_message(
                b"<rss><channel><title>News</title></channel></rss>",
                Some("application/xml"),
                None
            )
            .is_empty());
    }

    #[test]
    fn dictionary_validation() {
        assert!(matches!(PiiDictionary::new(Vec::new()), Err(PiiError::Empty)));
        let dup = vec![("a".to_string(), "x".to_string()), ("a".to_string(), "y".to_string())];
        assert!(matches!(PiiDictionary::new(dup), Err(PiiError::DuplicateKind(_))));
    }
}
