use std::collections::BTreeSet;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toyaudit_core::flatconfig::{self, FlatConfigError};
use toyaudit_core::mine::{TokenSpace, DEFAULT_ALPHABET, DEFAULT_PREFIX_LEN, DEFAULT_SUFFIX_LEN};

pub const DEFAULT_TOKEN_TTL: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Syntax(#[from] FlatConfigError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub cleartext_first_party: bool,
    pub token_reuse: bool,
    pub no_auth_photos: bool,
    pub prefix_oracle: bool,
    pub retain_old_photos: bool,
    pub pii_crash_reports: bool,
}

impl Toggles {
    pub const NAMES: [&'static str; 6] = [
        "cleartext_first_party",
        "token_reuse",
        "no_auth_photos",
        "prefix_oracle",
        "retain_old_photos",
        "pii_crash_reports",
    ];

    pub fn all_on() -> Self {
        Self {
            cleartext_first_party: true,
            token_reuse: true,
            no_auth_photos: true,
            prefix_oracle: true,
            retain_old_photos: true,
            pii_crash_reports: true,
        }
    }

    pub fn hardened() -> Self {
        Self {
            cleartext_first_party: false,
            token_reuse: false,
            no_auth_photos: false,
            prefix_oracle: false,
            retain_old_photos: false,
            pii_crash_reports: false,
        }
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        Some(match name {
            "cleartext_first_party" => self.cleartext_first_party,
            "token_reuse" => self.token_reuse,
            "no_auth_photos" => self.no_auth_photos,
            "prefix_oracle" => self.prefix_oracle,
            "retain_old_photos" => self.retain_old_photos,
            "pii_crash_reports" => self.pii_crash_reports,
            _ => return None,
        })
    }

    /// Sets one toggle by name; false if the name is unknown.
    pub fn set(&mut self, name: &str, on: bool) -> bool {
        match self.slot(name) {
            Some(s) => {
                *s = on;
                true
            }
            None => false,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "cleartext_first_party" => &mut self.cleartext_first_party,
            "token_reuse" => &mut self.token_reuse,
            "no_auth_photos" => &mut self.no_auth_photos,
            "prefix_oracle" => &mut self.prefix_oracle,
            "retain_old_photos" => &mut self.retain_old_photos,
            "pii_crash_reports" => &mut self.pii_crash_reports,
            _ => return None,
        })
    }
}

impl Default for Toggles {
    fn default() -> Self {
        Self::all_on()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub name: String,
    pub gender: String,
    /// `YYYY-MM-DD`.
    pub birthday: String,
    pub weight_kg: f64,
    pub height_cm: f64,
    pub age_years: u32,
    pub photo_token: String,
    pub photo_bytes: Vec<u8>,
    pub auth_token: String,
}

pub(crate) fn valid_birthday(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        return false;
    }
    let Ok(nums) = parts.iter().map(|p| p.parse::<u32>()).collect::<Result<Vec<_>, _>>() else {
        return false;
    };
    let days = match nums[1] {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if nums[0] % 4 == 0 && (nums[0] % 100 != 0 || nums[0] % 400 == 0) => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&nums[2])
}

impl UserRecord {
    fn check(&self, space: &TokenSpace) -> Result<(), ConfigError> {
        let who = &self.user_id;
        if who.is_empty() || who.contains('/') {
            return Err(invalid(format!("bad user_id `{who}`")));
        }
        if !space.is_token(&self.photo_token) {
            return Err(invalid(format!(
                "user {who}: photo token `{}` is not {} symbols from the alphabet",
                self.photo_token,
                space.token_len()
            )));
        }
        if self.photo_bytes.is_empty() {
            return Err(invalid(format!("user {who}: empty photo")));
        }
        if !(self.weight_kg > 0.0 && self.height_cm > 0.0 && self.age_years > 0) {
            return Err(invalid(format!("user {who}: weight, height and age must be positive")));
        }
        if !valid_birthday(&self.birthday) {
            return Err(invalid(format!(
                "user {who}: birthday `{}` is not YYYY-MM-DD",
                self.birthday
            )));
        }
        if self.auth_token.is_empty() {
            return Err(invalid(format!("user {who}: empty auth token")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestbedConfig {
    pub listen_address: String,
    pub space: TokenSpace,
    pub planted_users: Vec<UserRecord>,
    pub toggles: Toggles,
    pub oracle_valid_status: u16,
    pub oracle_invalid_status: u16,
    pub token_ttl: Duration,
    /// Drives planted-user generation and server-side token issuance.
    pub seed: u64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            space: TokenSpace::default_geometry(),
            planted_users: Vec::new(),
            toggles: Toggles::all_on(),
            oracle_valid_status: 301,
            oracle_invalid_status: 404,
            token_ttl: DEFAULT_TOKEN_TTL,
            seed: 0,
        }
    }
}

const NAMES: [&str; 8] = ["Ava", "Ben", "Cleo", "Dev", "Eli", "Fay", "Gus", "Ivy"];

/// Random 32-hex-digit credential.
pub(crate) fn random_secret(rng: &mut impl Rng) -> String {
    format!("{:032x}", rng.gen::<u128>())
}

pub(crate) fn random_token(space: &TokenSpace, rng: &mut impl Rng) -> String {
    let alphabet = space.alphabet();
    (0..space.token_len())
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect()
}

impl TestbedConfig {
    /// Loopback, ephemeral port.
    pub fn loopback(toggles: Toggles) -> Self {
        Self {
            listen_address: "127.0.0.1:0".into(),
            toggles,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.oracle_valid_status == self.oracle_invalid_status {
            return Err(invalid("oracle statuses must differ"));
        }
        for s in [self.oracle_valid_status, self.oracle_invalid_status] {
            if !(100..=599).contains(&s) {
                return Err(invalid(format!("status {s} out of range")));
            }
        }
        if self.token_ttl.is_zero() {
            return Err(invalid("token_ttl must be positive"));
        }
        let mut tokens = BTreeSet::new();
        let mut ids = BTreeSet::new();
        let mut creds = BTreeSet::new();
        for u in &self.planted_users {
            u.check(&self.space)?;
            if !tokens.insert(u.photo_token.as_str()) {
                return Err(invalid(format!("duplicate planted token `{}`", u.photo_token)));
            }
            if !ids.insert(u.user_id.as_str()) {
                return Err(invalid(format!("duplicate user_id `{}`", u.user_id)));
            }
            if !creds.insert(u.auth_token.as_str()) {
                return Err(invalid(format!("duplicate auth token for `{}`", u.user_id)));
            }
        }
        Ok(())
    }

    /// Adds one synthetic user per token, or `count` users with fresh random
    /// tokens when `tokens` is empty. Deterministic in `seed`.
    pub fn plant_users(&mut self, tokens: &[String], count: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x7573_6572);
        let mut taken: BTreeSet<String> = self.planted_users.iter().map(|u| u.photo_token.clone()).collect();
        let mut chosen: Vec<String> = tokens.to_vec();
        while chosen.len() < count.max(tokens.len()) {
            let t = random_token(&self.space, &mut rng);
            if !taken.contains(&t) && !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for token in chosen {
            let n = self.planted_users.len();
            let weight_kg = rng.gen_range(18..=45) as f64;
            let age_years = rng.gen_range(5..=12);
            self.planted_users.push(UserRecord {
                user_id: format!("u{:04}", n + 1),
                name: NAMES.choose(&mut rng).copied().unwrap_or("Kid").to_string(),
                gender: if rng.gen_bool(0.5) { "female" } else { "male" }.into(),
                birthday: format!(
                    "{}-{:02}-{:02}",
                    2017 - age_years,
                    rng.gen_range(1..=12),
                    rng.gen_range(1..=28)
                ),
                weight_kg,
                height_cm: rng.gen_range(105..=160) as f64,
                age_years,
                photo_bytes: synthetic_photo(&token),
                photo_token: token.clone(),
                auth_token: random_secret(&mut rng),
            });
            taken.insert(token);
        }
    }

    /// Reads the flat `key = value` format. Toggle keys take booleans;
    /// `hardened = true` turns every toggle off before later keys apply.
    /// `planted_token` may repeat; `planted_users = N` tops the list up
    /// with random tokens.
    pub fn from_flat(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut alphabet = DEFAULT_ALPHABET.to_string();
        let mut prefix_len = DEFAULT_PREFIX_LEN;
        let mut suffix_len = DEFAULT_SUFFIX_LEN;
        let mut tokens: Vec<String> = Vec::new();
        let mut count = 0usize;
        for e in flatconfig::parse(text)? {
            match e.key.as_str() {
                "listen_address" => cfg.listen_address = e.value.clone(),
                "alphabet" => alphabet = e.value.clone(),
                "prefix_len" => prefix_len = e.parse()?,
                "suffix_len" => suffix_len = e.parse()?,
                "oracle_valid_status" => cfg.oracle_valid_status = e.parse()?,
                "oracle_invalid_status" => cfg.oracle_invalid_status = e.parse()?,
                "token_ttl_secs" => {
                    cfg.token_ttl = Duration::from_secs_f64(e.parse::<f64>().and_then(|s| {
                        if s.is_finite() && s > 0.0 {
                            Ok(s)
                        } else {
                            Err(e.invalid("must be a positive number of seconds"))
                        }
                    })?)
                }
                "seed" => cfg.seed = e.parse()?,
                "planted_users" => count = e.parse()?,
                "planted_token" => tokens.push(e.value.clone()),
                "hardened" => {
                    if e.parse_bool()? {
                        cfg.toggles = Toggles::hardened();
                    }
                }
                key => match cfg.toggles.slot(key) {
                    Some(slot) => *slot = e.parse_bool()?,
                    None => return Err(e.unknown().into()),
                },
            }
        }
        cfg.space = TokenSpace::new(&alphabet, prefix_len, suffix_len).map_err(|e| invalid(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for t in &tokens {
            if !seen.insert(t) {
                return Err(invalid(format!("duplicate planted token `{t}`")));
            }
        }
        cfg.plant_users(&tokens, count);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Small JPEG-framed blob unique to `token`.
pub fn synthetic_photo(token: &str) -> Vec<u8> {
    let mut bytes = vec![0xFF, 0xD8, 0xFF, 0xE0];
    bytes.extend_from_slice(token.as_bytes());
    bytes.extend_from_slice(&[0xFF, 0xD9]);
    bytes
}
