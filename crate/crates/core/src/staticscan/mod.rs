//! Plaintext secret constants in source trees.
//!
//! Matching is lexical: an identifier, an assignment operator (`=`, `:=`
//! or `:`, optionally after a type annotation) and a quoted literal on one
//! line. A literal is reported when its identifier matches a rule's name
//! pattern or when it is long and random-looking enough.

mod entropy;
mod rules;
mod scanner;

pub use entropy::{shannon_entropy, EntropyError};
pub use rules::{load_rules, RuleError, SecretRule};
pub use scanner::{scan_secrets, ScanError, ScanReport};
