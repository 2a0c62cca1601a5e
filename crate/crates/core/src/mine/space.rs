use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("alphabet needs at least 2 symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("alphabet repeats symbol `{0}`")]
    DuplicateSymbol(char),
    #[error("prefix and suffix lengths must be at least 1")]
    ZeroLength,
    #[error("token space too large to index")]
    Overflow,
}

pub const DEFAULT_ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
pub const DEFAULT_PREFIX_LEN: usize = 3;
pub const DEFAULT_SUFFIX_LEN: usize = 9;

/// Token universe: every string of `prefix_len + suffix_len` symbols over
/// `alphabet`. Indices encode strings in base `A`, first symbol most
/// significant, so index order is alphabet order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct TokenSpace {
    alphabet: Vec<char>,
    prefix_len: usize,
    suffix_len: usize,
    prefix_count: u64,
    suffix_count: u64,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    alphabet: String,
    prefix_len: usize,
    suffix_len: usize,
}

impl TryFrom<RawSpace> for TokenSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        TokenSpace::new(&raw.alphabet, raw.prefix_len, raw.suffix_len)
    }
}

impl From<TokenSpace> for RawSpace {
    fn from(space: TokenSpace) -> Self {
        RawSpace {
            alphabet: space.alphabet.iter().collect(),
            prefix_len: space.prefix_len,
            suffix_len: space.suffix_len,
        }
    }
}

fn checked_pow(base: u64, exp: usize) -> Result<u64, SpaceError> {
    let exp = u32::try_from(exp).map_err(|_| SpaceError::Overflow)?;
    base.checked_pow(exp).ok_or(SpaceError::Overflow)
}

impl TokenSpace {
    pub fn new(alphabet: &str, prefix_len: usize, suffix_len: usize) -> Result<Self, SpaceError> {
        let symbols: Vec<char> = alphabet.chars().collect();
        if symbols.len() < 2 {
            return Err(SpaceError::AlphabetTooSmall(symbols.len()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(SpaceError::DuplicateSymbol(*c));
            }
        }
        if prefix_len == 0 || suffix_len == 0 {
            return Err(SpaceError::ZeroLength);
        }
        let radix = symbols.len() as u64;
        let prefix_count = checked_pow(radix, prefix_len)?;
        let suffix_count = checked_pow(radix, suffix_len)?;
        Ok(Self {
            alphabet: symbols,
            prefix_len,
            suffix_len,
            prefix_count,
            suffix_count,
        })
    }

    /// 36 symbols, 3-symbol prefix, 9-symbol suffix.
    pub fn default_geometry() -> Self {
        Self::new(DEFAULT_ALPHABET, DEFAULT_PREFIX_LEN, DEFAULT_SUFFIX_LEN).expect("default geometry is valid")
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn radix(&self) -> u64 {
        self.alphabet.len() as u64
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn suffix_len(&self) -> usize {
        self.suffix_len
    }

    pub fn token_len(&self) -> usize {
        self.prefix_len + self.suffix_len
    }

    /// A^P
    pub fn prefix_count(&self) -> u64 {
        self.prefix_count
    }

    /// A^S
    pub fn suffix_count(&self) -> u64 {
        self.suffix_count
    }

    /// A^(P+S)
    pub fn token_count(&self) -> u128 {
        self.prefix_count as u128 * self.suffix_count as u128
    }

    fn encode(&self, mut index: u64, len: usize) -> String {
        let radix = self.radix();
        let mut out = vec![self.alphabet[0]; len];
        for slot in out.iter_mut().rev() {
            *slot = self.alphabet[(index % radix) as usize];
            index /= radix;
        }
        out.into_iter().collect()
    }

    pub fn prefix_at(&self, index: u64) -> String {
        debug_assert!(index < self.prefix_count);
        self.encode(index, self.prefix_len)
    }

    pub fn suffix_at(&self, index: u64) -> String {
        debug_assert!(index < self.suffix_count);
        self.encode(index, self.suffix_len)
    }

    /// Base-A value of `s`, or `None` if it uses symbols outside the alphabet.
    pub fn index_of(&self, s: &str) -> Option<u64> {
        let radix = self.radix();
        s.chars().try_fold(0u64, |acc, c| {
            let digit = self.alphabet.iter().position(|&a| a == c)? as u64;
            acc.checked_mul(radix)?.checked_add(digit)
        })
    }

    pub fn is_prefix(&self, s: &str) -> bool {
        s.chars().count() == self.prefix_len && self.index_of(s).is_some()
    }

    pub fn is_token(&self, s: &str) -> bool {
        s.chars().count() == self.token_len() && s.chars().all(|c| self.alphabet.contains(&c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let s = TokenSpace::default_geometry();
        assert_eq!(s.prefix_count(), 46_656);
        assert_eq!(s.suffix_count(), 101_559_956_668_416);
        assert_eq!(s.token_count(), 4_738_381_338_321_616_896);
    }

    #[test]
    fn invalid_geometry() {
        assert_eq!(TokenSpace::new("A", 1, 1), Err(SpaceError::AlphabetTooSmall(1)));
        assert_eq!(TokenSpace::new("ABA", 1, 1), Err(SpaceError::DuplicateSymbol('A')));
        assert_eq!(TokenSpace::new("AB", 0, 1), Err(SpaceError::ZeroLength));
        assert_eq!(TokenSpace::new("AB", 1, 64), Err(SpaceError::Overflow));
    }

    #[test]
    fn encoding_is_positional() {
        let s = TokenSpace::new("ABCD", 2, 2).unwrap();
        assert_eq!(s.prefix_at(0), "AA");
        assert_eq!(s.prefix_at(1), "AB");
        assert_eq!(s.prefix_at(4), "BA");
        assert_eq!(s.prefix_at(15), "DD");
        for i in 0..16 {
            assert_eq!(s.index_of(&s.suffix_at(i)), Some(i));
        }
        assert_eq!(s.index_of("AZ"), None);
    }

    #[test]
    fn serde_validates() {
        let s: TokenSpace =
            serde_json::from_str(r#"{"alphabet":"0123456789ABCDEF","prefix_len":2,"suffix_len":2}"#).unwrap();
        assert_eq!(s.prefix_count(), 256);
        assert!(serde_json::from_str::<TokenSpace>(r#"{"alphabet":"A","prefix_len":2,"suffix_len":2}"#).is_err());
    }
}
