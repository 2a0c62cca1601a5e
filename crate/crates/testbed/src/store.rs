//! Account, session and photo state behind the mock server.

use std::collections::{HashMap, HashSet};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use toyaudit_core::mine::TokenSpace;

use crate::config::{random_secret, random_token, valid_birthday, TestbedConfig, Toggles};
use crate::goal::compute_hydration_goal;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("missing or expired credential")]
    Unauthorized,
    #[error("endpoint disabled in this mode")]
    Disabled,
    #[error("token space exhausted")]
    SpaceExhausted,
}

/// Monotonic server time that tests can push forward.
#[derive(Debug)]
pub struct Clock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl Clock {
    pub fn new() -> Self {
        Self {
            base: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }

    pub fn now(&self) -> Duration {
        self.base.elapsed() + *self.offset.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap_or_else(|e| e.into_inner()) += by;
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
struct Account {
    photo_token: Option<String>,
    drunk_ml: f64,
}

#[derive(Debug, Clone)]
struct Session {
    user_id: String,
    issued_at: Duration,
}

#[derive(Debug, Default)]
struct Users {
    accounts: HashMap<String, Account>,
    sessions: HashMap<String, Session>,
    /// refresh token -> (user_id, auth token it may replace)
    refresh: HashMap<String, (String, String)>,
    next_id: u64,
}

#[derive(Debug, Clone)]
struct Photo {
    owner: String,
    bytes: Vec<u8>,
}

#[derive(Debug)]
struct Photos {
    live: HashMap<String, Photo>,
    /// Every token ever handed out, live or not; never reissued.
    issued: HashSet<String>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewAccount {
    pub name: String,
    pub gender: String,
    pub birthday: String,
    pub weight_kg: f64,
    pub height_cm: f64,
    pub age_years: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedAccount {
    pub user_id: String,
    pub auth_token: String,
    pub refresh_token: Option<String>,
    pub goal_ml: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhotoLookup {
    Found(Vec<u8>),
    Unauthorized,
    NotFound,
}

#[derive(Debug)]
pub struct Store {
    space: TokenSpace,
    toggles: Toggles,
    ttl: Duration,
    oracle_valid: u16,
    oracle_invalid: u16,
    users: RwLock<Users>,
    photos: RwLock<Photos>,
}

fn read<T>(l: &RwLock<T>) -> std::sync::RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(l: &RwLock<T>) -> std::sync::RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

impl Store {
    /// `config` must already be validated.
    pub fn new(config: &TestbedConfig) -> Self {
        let mut users = Users::default();
        let mut photos = Photos {
            live: HashMap::new(),
            issued: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        for u in &config.planted_users {
            users.accounts.insert(
                u.user_id.clone(),
                Account {
                    photo_token: Some(u.photo_token.clone()),
                    drunk_ml: 0.0,
                },
            );
            users.sessions.insert(
                u.auth_token.clone(),
                Session {
                    user_id: u.user_id.clone(),
                    issued_at: Duration::ZERO,
                },
            );
            photos.issued.insert(u.photo_token.clone());
            photos.live.insert(
                u.photo_token.clone(),
                Photo {
                    owner: u.user_id.clone(),
                    bytes: u.photo_bytes.clone(),
                },
            );
        }
        users.next_id = config.planted_users.len() as u64;
        Self {
            space: config.space.clone(),
            toggles: config.toggles,
            ttl: config.token_ttl,
            oracle_valid: config.oracle_valid_status,
            oracle_invalid: config.oracle_invalid_status,
            users: RwLock::new(users),
            photos: RwLock::new(photos),
        }
    }

    pub fn toggles(&self) -> Toggles {
        self.toggles
    }

    pub fn space(&self) -> &TokenSpace {
        &self.space
    }

    /// Live photo tokens, sorted.
    pub fn live_tokens(&self) -> Vec<String> {
        let mut v: Vec<String> = read(&self.photos).live.keys().cloned().collect();
        v.sort();
        v
    }

    fn session_valid(&self, s: &Session, now: Duration) -> bool {
        self.toggles.token_reuse || now.saturating_sub(s.issued_at) < self.ttl
    }

    /// User behind an auth token, honoring expiry when tokens are not reusable.
    pub fn authenticate(&self, auth_token: &str, now: Duration) -> Option<String> {
        let users = read(&self.users);
        let s = users.sessions.get(auth_token)?;
        self.session_valid(s, now).then(|| s.user_id.clone())
    }

    pub fn create_account(&self, req: &NewAccount, now: Duration) -> Result<IssuedAccount, StoreError> {
        if req.name.trim().is_empty() || req.gender.trim().is_empty() {
            return Err(StoreError::InvalidInput("name and gender are required".into()));
        }
        if !valid_birthday(&req.birthday) {
            return Err(StoreError::InvalidInput("birthday must be YYYY-MM-DD".into()));
        }
        let goal_ml = compute_hydration_goal(req.age_years as f64, req.weight_kg, req.height_cm)
            .map_err(|e| StoreError::InvalidInput(e.to_string()))?;
        let (auth_token, refresh_token) = {
            let mut photos = write(&self.photos);
            let auth = random_secret(&mut photos.rng);
            let refresh = (!self.toggles.token_reuse).then(|| random_secret(&mut photos.rng));
            (auth, refresh)
        };
        let mut users = write(&self.users);
        users.next_id += 1;
        let user_id = format!("u{:04}", users.next_id);
        users.accounts.insert(
            user_id.clone(),
            Account {
                photo_token: None,
                drunk_ml: 0.0,
            },
        );
        users.sessions.insert(
            auth_token.clone(),
            Session {
                user_id: user_id.clone(),
                issued_at: now,
            },
        );
        if let Some(r) = &refresh_token {
            users.refresh.insert(r.clone(), (user_id.clone(), auth_token.clone()));
        }
        Ok(IssuedAccount {
            user_id,
            auth_token,
            refresh_token,
            goal_ml,
        })
    }

    /// Records a drink; returns the user's running total in ml.
    pub fn record_drink(&self, auth_token: &str, ml: f64, now: Duration) -> Result<f64, StoreError> {
        let mut users = write(&self.users);
        let user_id = match users.sessions.get(auth_token) {
            Some(s) if self.session_valid(s, now) => s.user_id.clone(),
            _ => return Err(StoreError::Unauthorized),
        };
        if !(ml > 0.0 && ml.is_finite()) {
            return Err(StoreError::InvalidInput("ml must be positive".into()));
        }
        let account = users
            .accounts
            .get_mut(&user_id)
            .ok_or_else(|| StoreError::UnknownUser(user_id.clone()))?;
        account.drunk_ml += ml;
        Ok(account.drunk_ml)
    }

    /// Swaps a refresh token for a new (auth, refresh) pair; the replaced
    /// auth token stops working.
    pub fn refresh(&self, refresh_token: &str, now: Duration) -> Result<(String, String), StoreError> {
        if self.toggles.token_reuse {
            return Err(StoreError::Disabled);
        }
        let (auth, refresh) = {
            let mut photos = write(&self.photos);
            (random_secret(&mut photos.rng), random_secret(&mut photos.rng))
        };
        let mut users = write(&self.users);
        let (user_id, old_auth) = users.refresh.remove(refresh_token).ok_or(StoreError::Unauthorized)?;
        users.sessions.remove(&old_auth);
        users.sessions.insert(
            auth.clone(),
            Session {
                user_id: user_id.clone(),
                issued_at: now,
            },
        );
        users.refresh.insert(refresh.clone(), (user_id, auth.clone()));
        Ok((auth, refresh))
    }

    /// Stores a new photo under a fresh uniformly drawn token. The previous
    /// token stays live only when old photos are retained.
    pub fn overwrite_photo(&self, user_id: &str, bytes: &[u8]) -> Result<String, StoreError> {
        if bytes.is_empty() {
            return Err(StoreError::InvalidInput("empty photo".into()));
        }
        let mut users = write(&self.users);
        let account = users
            .accounts
            .get_mut(user_id)
            .ok_or_else(|| StoreError::UnknownUser(user_id.to_string()))?;
        let mut photos = write(&self.photos);
        if photos.issued.len() as u128 >= self.space.token_count() {
            return Err(StoreError::SpaceExhausted);
        }
        let token = loop {
            let t = random_token(&self.space, &mut photos.rng);
            if !photos.issued.contains(&t) {
                break t;
            }
        };
        photos.issued.insert(token.clone());
        photos.live.insert(
            token.clone(),
            Photo {
                owner: user_id.to_string(),
                bytes: bytes.to_vec(),
            },
        );
        if let Some(old) = account.photo_token.replace(token.clone()) {
            if !self.toggles.retain_old_photos {
                photos.live.remove(&old);
            }
        }
        Ok(token)
    }

    pub fn oracle_valid_status(&self) -> u16 {
        self.oracle_valid
    }

    /// Status for a truncated photo request.
    pub fn prefix_status(&self, prefix: &str) -> u16 {
        if !self.toggles.prefix_oracle || !self.space.is_prefix(prefix) {
            return self.oracle_invalid;
        }
        if read(&self.photos).live.keys().any(|t| t.starts_with(prefix)) {
            self.oracle_valid
        } else {
            self.oracle_invalid
        }
    }

    /// Full photo lookup. Without the no-auth flaw, a valid bearer session is
    /// required before anything about the token is revealed, and only the
    /// owner's session unlocks it.
    pub fn photo(&self, prefix: &str, token: &str, bearer: Option<&str>, now: Duration) -> PhotoLookup {
        let caller = bearer.and_then(|b| self.authenticate(b, now));
        if !self.toggles.no_auth_photos && caller.is_none() {
            return PhotoLookup::Unauthorized;
        }
        if !token.starts_with(prefix) || prefix.chars().count() != self.space.prefix_len() {
            return PhotoLookup::NotFound;
        }
        let photos = read(&self.photos);
        match photos.live.get(token) {
            Some(p) if self.toggles.no_auth_photos || caller.as_deref() == Some(p.owner.as_str()) => {
                PhotoLookup::Found(p.bytes.clone())
            }
            _ => PhotoLookup::NotFound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced(toggles: Toggles, tokens: &[&str]) -> (TestbedConfig, Store) {
        let mut cfg = TestbedConfig {
            space: TokenSpace::new("0123456789ABCDEF", 2, 2).unwrap(),
            toggles,
            ..TestbedConfig::default()
        };
        let tokens: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
        cfg.plant_users(&tokens, 0);
        cfg.validate().unwrap();
        let store = Store::new(&cfg);
        (cfg, store)
    }

    fn kid() -> NewAccount {
        NewAccount {
            name: "Ava".into(),
            gender: "female".into(),
            birthday: "2010-05-01".into(),
            weight_kg: 30.0,
            height_cm: 130.0,
            age_years: 7,
        }
    }

    #[test]
    fn oracle_is_exhaustively_consistent() {
        let (cfg, store) = reduced(Toggles::all_on(), &["AB12", "AB34", "CD00"]);
        for i in 0..cfg.space.prefix_count() {
            let p = cfg.space.prefix_at(i);
            let want = if p == "AB" || p == "CD" { 301 } else { 404 };
            assert_eq!(store.prefix_status(&p), want, "{p}");
        }
        assert_eq!(store.prefix_status("ABC"), 404);
        let (_, hardened) = reduced(Toggles::hardened(), &["AB12"]);
        assert_eq!(hardened.prefix_status("AB"), 404);
    }

    #[test]
    fn overwrite_retention() {
        for retain in [true, false] {
            let toggles = Toggles {
                retain_old_photos: retain,
                ..Toggles::all_on()
            };
            let (cfg, store) = reduced(toggles, &["AB12"]);
            let new = store.overwrite_photo("u0001", b"new").unwrap();
            assert_ne!(new, "AB12");
            let old = store.photo("AB", "AB12", None, Duration::ZERO);
            if retain {
                assert_eq!(old, PhotoLookup::Found(cfg.planted_users[0].photo_bytes.clone()));
            } else {
                assert_eq!(old, PhotoLookup::NotFound);
            }
            let p = &new[..2];
            assert_eq!(
                store.photo(p, &new, None, Duration::ZERO),
                PhotoLookup::Found(b"new".to_vec())
            );
        }
        let (_, store) = reduced(Toggles::all_on(), &[]);
        assert_eq!(
            store.overwrite_photo("ghost", b"x"),
            Err(StoreError::UnknownUser("ghost".into()))
        );
    }

    #[test]
    fn tokens_never_reissued() {
        let (cfg, store) = reduced(Toggles::hardened(), &["AB12"]);
        let mut seen: HashSet<String> = HashSet::from(["AB12".to_string()]);
        for _ in 0..300 {
            let t = store.overwrite_photo("u0001", b"p").unwrap();
            assert!(cfg.space.is_token(&t));
            assert!(seen.insert(t));
        }
    }

    #[test]
    fn photo_auth_rules() {
        let (cfg, store) = reduced(Toggles::hardened(), &["AB12", "CD34"]);
        let owner = cfg.planted_users[0].auth_token.clone();
        let other = cfg.planted_users[1].auth_token.clone();
        let now = Duration::from_secs(1);
        assert_eq!(store.photo("AB", "AB12", None, now), PhotoLookup::Unauthorized);
        assert_eq!(store.photo("AB", "AB99", None, now), PhotoLookup::Unauthorized);
        assert!(matches!(
            store.photo("AB", "AB12", Some(&owner), now),
            PhotoLookup::Found(_)
        ));
        assert_eq!(store.photo("AB", "AB12", Some(&other), now), PhotoLookup::NotFound);
        assert_eq!(store.photo("CD", "AB12", Some(&owner), now), PhotoLookup::NotFound);
    }

    #[test]
    fn ttl_and_refresh() {
        let (_, store) = reduced(Toggles::hardened(), &[]);
        let acct = store.create_account(&kid(), Duration::ZERO).unwrap();
        assert_eq!(acct.goal_ml, 1050);
        let refresh = acct.refresh_token.clone().unwrap();
        assert!(store
            .record_drink(&acct.auth_token, 200.0, Duration::from_secs(10))
            .is_ok());
        assert_eq!(
            store.record_drink(&acct.auth_token, 200.0, Duration::from_secs(301)),
            Err(StoreError::Unauthorized)
        );
        let (auth2, _) = store.refresh(&refresh, Duration::from_secs(301)).unwrap();
        assert_eq!(store.record_drink(&auth2, 100.0, Duration::from_secs(302)), Ok(300.0));
        assert_eq!(
            store.refresh(&refresh, Duration::from_secs(303)),
            Err(StoreError::Unauthorized)
        );
        assert_eq!(
            store.record_drink("garbage", 1.0, Duration::ZERO),
            Err(StoreError::Unauthorized)
        );
    }

    #[test]
    fn reusable_tokens_never_expire() {
        let (_, store) = reduced(Toggles::all_on(), &[]);
        let acct = store.create_account(&kid(), Duration::ZERO).unwrap();
        assert!(acct.refresh_token.is_none());
        for i in 1..=3 {
            let at = Duration::from_secs(i * 100_000);
            assert!(store.record_drink(&acct.auth_token, 250.0, at).is_ok());
        }
        assert_eq!(store.refresh("x", Duration::ZERO), Err(StoreError::Disabled));
    }

    #[test]
    fn account_validation() {
        let (_, store) = reduced(Toggles::all_on(), &[]);
        let mut bad = kid();
        bad.weight_kg = 0.0;
        assert!(matches!(
            store.create_account(&bad, Duration::ZERO),
            Err(StoreError::InvalidInput(_))
        ));
        let mut bad = kid();
        bad.birthday = "yesterday".into();
        assert!(matches!(
            store.create_account(&bad, Duration::ZERO),
            Err(StoreError::InvalidInput(_))
        ));
    }
}
