use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{self, ClientError, ProbeClient, DEFAULT_PROBE_DELAY};

use super::permute::worker_streams;
use super::TokenSpace;

#[derive(Debug, Error)]
pub enum MineError {
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("prefix `{prefix}` returned status {status}, neither the valid nor the invalid oracle status")]
    OracleAmbiguous { prefix: String, status: u16 },
    #[error("refusing non-loopback target {0} without explicit ownership acknowledgement")]
    NonLoopbackTarget(String),
    #[error("invalid miner configuration: {0}")]
    InvalidConfig(String),
}

impl From<ClientError> for MineError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Unreachable(m) => MineError::TargetUnreachable(m),
            other => MineError::InvalidConfig(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuffixBudget {
    Unlimited,
    /// Suffix probes per prefix.
    Limited(u64),
}

impl SuffixBudget {
    fn limit(self) -> u64 {
        match self {
            SuffixBudget::Unlimited => u64::MAX,
            SuffixBudget::Limited(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinerConfig {
    pub target: String,
    pub space: TokenSpace,
    pub workers: usize,
    pub seed: u64,
    pub suffix_budget: SuffixBudget,
    /// Stop once this share of `known_planted` tokens is recovered. Values
    /// below 1 need `known_planted`.
    pub target_fraction: f64,
    pub known_planted: Option<usize>,
    pub request_delay: Duration,
    pub oracle_valid_status: u16,
    pub oracle_invalid_status: u16,
    /// Truncated-token path, containing `{prefix}`.
    pub prefix_path: String,
    /// Full-token path, containing `{prefix}` and `{token}`.
    pub token_path: String,
    pub allow_non_loopback: bool,
}

impl MinerConfig {
    pub fn new(target: impl Into<String>, space: TokenSpace) -> Self {
        Self {
            target: target.into(),
            space,
            workers: 1,
            seed: 0,
            suffix_budget: SuffixBudget::Unlimited,
            target_fraction: 1.0,
            known_planted: None,
            request_delay: DEFAULT_PROBE_DELAY,
            oracle_valid_status: 301,
            oracle_invalid_status: 404,
            prefix_path: "/api/photo/{prefix}".into(),
            token_path: "/api/photo/{prefix}/{token}".into(),
            allow_non_loopback: false,
        }
    }

    fn fraction_mode(&self) -> bool {
        self.target_fraction < 1.0
    }

    pub fn validate(&self) -> Result<(), MineError> {
        if self.workers == 0 {
            return Err(MineError::InvalidConfig("workers must be at least 1".into()));
        }
        if self.suffix_budget == SuffixBudget::Limited(0) {
            return Err(MineError::InvalidConfig("suffix budget must be at least 1".into()));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(MineError::InvalidConfig(format!(
                "target fraction must be in (0, 1], got {}",
                self.target_fraction
            )));
        }
        if self.fraction_mode() && self.known_planted.is_none() {
            return Err(MineError::InvalidConfig(
                "fraction mode needs the known planted-token count (testbed only)".into(),
            ));
        }
        if self.oracle_valid_status == self.oracle_invalid_status {
            return Err(MineError::InvalidConfig("oracle statuses must differ".into()));
        }
        if !self.prefix_path.contains("{prefix}") || !self.token_path.contains("{token}") {
            return Err(MineError::InvalidConfig("path templates lack placeholders".into()));
        }
        let url = client::parse_target(&self.target)?;
        if !self.allow_non_loopback && !client::is_loopback(&url) {
            return Err(MineError::NonLoopbackTarget(self.target.clone()));
        }
        Ok(())
    }

    fn client(&self) -> Result<ProbeClient, MineError> {
        Ok(ProbeClient::new(&self.target, self.request_delay)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub prefix_probes: u64,
    pub suffix_probes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Completion {
    /// Every suffix of every valid prefix was tried.
    Exhausted,
    /// The per-prefix budget ran out first.
    BudgetExhausted,
    FractionReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningResult {
    pub valid_prefixes: BTreeSet<String>,
    pub recovered_tokens: BTreeSet<String>,
    pub probes_sent: u64,
    pub elapsed: f64,
    pub per_phase_counts: PhaseCounts,
    pub completion: Completion,
}

/// Request counts for a run, computed without touching the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningPlan {
    pub prefix_probes: u64,
    pub suffix_probes_per_prefix: u64,
    pub token_space: u128,
}

pub fn plan(config: &MinerConfig) -> MiningPlan {
    MiningPlan {
        prefix_probes: config.space.prefix_count(),
        suffix_probes_per_prefix: config.space.suffix_count().min(config.suffix_budget.limit()),
        token_space: config.space.token_count(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSweep {
    pub valid: BTreeSet<String>,
    pub probes: u64,
}

/// Shared stop flag plus the first worker error.
struct Control {
    stop: AtomicBool,
    error: Mutex<Option<MineError>>,
}

impl Control {
    fn new() -> Self {
        Self {
            stop: AtomicBool::new(false),
            error: Mutex::new(None),
        }
    }

    fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    fn fail(&self, e: MineError) {
        let mut slot = self.error.lock().unwrap_or_else(|p| p.into_inner());
        slot.get_or_insert(e);
        self.stop.store(true, Ordering::Relaxed);
    }

    fn into_error(self) -> Option<MineError> {
        self.error.into_inner().unwrap_or_else(|p| p.into_inner())
    }
}

/// Asks the truncated-token oracle about every prefix exactly once.
pub fn sweep_prefixes(config: &MinerConfig) -> Result<PrefixSweep, MineError> {
    config.validate()?;
    let client = config.client()?;
    let total = config.space.prefix_count();
    let workers = config.workers as u64;
    let control = Control::new();
    let probes = AtomicU64::new(0);
    let (tx, rx) = mpsc::channel::<String>();

    std::thread::scope(|scope| {
        for w in 0..workers {
            let tx = tx.clone();
            let (client, control, probes) = (&client, &control, &probes);
            scope.spawn(move || {
                let mut i = w;
                while i < total && !control.stopped() {
                    let prefix = config.space.prefix_at(i);
                    let path = config.prefix_path.replace("{prefix}", &prefix);
                    probes.fetch_add(1, Ordering::Relaxed);
                    match client.get(&path, &[]) {
                        Ok(r) if r.status == config.oracle_valid_status => {
                            let _ = tx.send(prefix);
                        }
                        Ok(r) if r.status == config.oracle_invalid_status => {}
                        Ok(r) => control.fail(MineError::OracleAmbiguous {
                            prefix,
                            status: r.status,
                        }),
                        Err(e) => control.fail(e.into()),
                    }
                    i += workers;
                }
            });
        }
    });
    drop(tx);
    if let Some(e) = control.into_error() {
        return Err(e);
    }
    let valid: BTreeSet<String> = rx.into_iter().collect();
    tracing::info!(
        valid = valid.len(),
        probes = probes.load(Ordering::Relaxed),
        "prefix sweep done"
    );
    Ok(PrefixSweep {
        valid,
        probes: probes.into_inner(),
    })
}

/// Suffix phase: each worker walks its stride of the seeded permutation for
/// every prefix (in sorted order), sending hits to one collector.
pub fn mine_suffixes(config: &MinerConfig, prefixes: &BTreeSet<String>) -> Result<MiningResult, MineError> {
    config.validate()?;
    if let Some(bad) = prefixes.iter().find(|p| !config.space.is_prefix(p)) {
        return Err(MineError::InvalidConfig(format!(
            "`{bad}` is not a prefix of this token space"
        )));
    }
    let client = config.client()?;
    let started = Instant::now();
    let limit = config.suffix_budget.limit();
    let needed = config
        .known_planted
        .filter(|_| config.fraction_mode())
        .map(|k| ((config.target_fraction * k as f64) - 1e-9).ceil().max(1.0) as usize);

    let control = Control::new();
    let probes = AtomicU64::new(0);
    let hits = AtomicU64::new(0);
    let (tx, rx) = mpsc::channel::<String>();
    let mut recovered = BTreeSet::new();
    let mut fraction_reached = false;

    std::thread::scope(|scope| {
        for w in 0..config.workers {
            let tx = tx.clone();
            let (client, control, probes, hits) = (&client, &control, &probes, &hits);
            scope.spawn(move || {
                for prefix in prefixes {
                    let mut stream =
                        worker_streams(&config.space, prefix, config.workers, config.seed, limit).swap_remove(w);
                    for suffix in stream.by_ref() {
                        if control.stopped() {
                            return;
                        }
                        let token = format!("{prefix}{suffix}");
                        let path = config.token_path.replace("{prefix}", prefix).replace("{token}", &token);
                        probes.fetch_add(1, Ordering::Relaxed);
                        match client.get(&path, &[]) {
                            Ok(r) if r.status == 200 => {
                                let _ = tx.send(token);
                                // stop this worker's own loop without waiting for the collector
                                let found = hits.fetch_add(1, Ordering::SeqCst) + 1;
                                if needed.is_some_and(|n| found >= n as u64) {
                                    control.stop.store(true, Ordering::SeqCst);
                                }
                            }
                            Ok(_) => {}
                            Err(e) => {
                                control.fail(e.into());
                                return;
                            }
                        }
                    }
                }
            });
        }
        drop(tx);
        for token in rx {
            recovered.insert(token);
            if needed.is_some_and(|n| recovered.len() >= n) && !fraction_reached {
                fraction_reached = true;
                control.stop.store(true, Ordering::Relaxed);
            }
        }
    });

    if let Some(e) = control.into_error() {
        return Err(e);
    }
    let completion = if fraction_reached {
        Completion::FractionReached
    } else if limit < config.space.suffix_count() {
        Completion::BudgetExhausted
    } else {
        Completion::Exhausted
    };
    let suffix_probes = probes.into_inner();
    Ok(MiningResult {
        valid_prefixes: prefixes.clone(),
        recovered_tokens: recovered,
        probes_sent: suffix_probes,
        elapsed: started.elapsed().as_secs_f64(),
        per_phase_counts: PhaseCounts {
            prefix_probes: 0,
            suffix_probes,
        },
        completion,
    })
}

/// Both phases back to back.
pub fn mine(config: &MinerConfig) -> Result<MiningResult, MineError> {
    let started = Instant::now();
    let sweep = sweep_prefixes(config)?;
    let mut result = mine_suffixes(config, &sweep.valid)?;
    result.per_phase_counts.prefix_probes = sweep.probes;
    result.probes_sent = sweep.probes + result.per_phase_counts.suffix_probes;
    result.elapsed = started.elapsed().as_secs_f64();
    Ok(result)
}
