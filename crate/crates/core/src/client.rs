//! Blocking HTTP client shared by the active probes and the miner.
//!
//! Redirects are never followed (a 301 is itself the signal) and non-2xx
//! statuses are returned as ordinary responses. A [`Pacer`] enforces one
//! minimum gap between consecutive requests across every clone of the
//! client, so several workers still respect a single per-target delay.

use std::net::IpAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;
use url::Url;

pub const DEFAULT_PROBE_DELAY: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid target URL `{url}`: {reason}")]
    InvalidTarget { url: String, reason: String },
    #[error("target unreachable: {0}")]
    Unreachable(String),
}

#[derive(Debug, Default)]
pub struct Pacer {
    delay: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl Pacer {
    pub fn new(delay: Duration) -> Self {
        Self {
            delay,
            next_slot: Mutex::new(None),
        }
    }

    /// Blocks until the caller may send its request.
    pub fn wait(&self) {
        if self.delay.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.delay);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeResponse {
    pub status: u16,
    pub location: Option<String>,
    /// Response headers in wire order, names lowercased.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

#[derive(Clone)]
pub struct ProbeClient {
    base: Url,
    agent: ureq::Agent,
    pacer: Arc<Pacer>,
}

impl std::fmt::Debug for ProbeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProbeClient")
            .field("base", &self.base.as_str())
            .field("delay", &self.pacer.delay)
            .finish()
    }
}

pub fn parse_target(target: &str) -> Result<Url, ClientError> {
    let url = Url::parse(target).map_err(|e| ClientError::InvalidTarget {
        url: target.to_string(),
        reason: e.to_string(),
    })?;
    if url.scheme() != "http" {
        return Err(ClientError::InvalidTarget {
            url: target.to_string(),
            reason: "only http:// targets are supported".into(),
        });
    }
    if url.host().is_none() {
        return Err(ClientError::InvalidTarget {
            url: target.to_string(),
            reason: "missing host".into(),
        });
    }
    Ok(url)
}

/// True for `localhost` and loopback IP literals.
pub fn is_loopback(url: &Url) -> bool {
    match url.host() {
        Some(url::Host::Domain(d)) => d.eq_ignore_ascii_case("localhost"),
        Some(url::Host::Ipv4(ip)) => IpAddr::V4(ip).is_loopback(),
        Some(url::Host::Ipv6(ip)) => IpAddr::V6(ip).is_loopback(),
        None => false,
    }
}

impl ProbeClient {
    pub fn new(target: &str, delay: Duration) -> Result<Self, ClientError> {
        let base = parse_target(target)?;
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build();
        Ok(Self {
            base,
            agent: config.into(),
            pacer: Arc::new(Pacer::new(delay)),
        })
    }

    pub fn base(&self) -> &Url {
        &self.base
    }

    /// Resolves `path` (absolute path, optionally with query) against the base.
    pub fn url_for(&self, path: &str) -> Result<Url, ClientError> {
        self.base.join(path).map_err(|e| ClientError::InvalidTarget {
            url: path.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn get(&self, path: &str, headers: &[(String, String)]) -> Result<ProbeResponse, ClientError> {
        let url = self.url_for(path)?;
        self.pacer.wait();
        let mut req = self.agent.get(url.as_str());
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        collect(req.call())
    }

    pub fn send(
        &self,
        method: &str,
        path: &str,
        headers: &[(String, String)],
        body: &[u8],
    ) -> Result<ProbeResponse, ClientError> {
        let url = self.url_for(path)?;
        self.pacer.wait();
        let result = match method {
            "POST" => {
                let mut req = self.agent.post(url.as_str());
                for (k, v) in headers {
                    req = req.header(k.as_str(), v.as_str());
                }
                req.send(body)
            }
            "PUT" => {
                let mut req = self.agent.put(url.as_str());
                for (k, v) in headers {
                    req = req.header(k.as_str(), v.as_str());
                }
                req.send(body)
            }
            other => {
                return Err(ClientError::InvalidTarget {
                    url: url.to_string(),
                    reason: format!("unsupported method {other}"),
                })
            }
        };
        collect(result)
    }
}

fn collect(result: Result<http::Response<ureq::Body>, ureq::Error>) -> Result<ProbeResponse, ClientError> {
    let mut resp = result.map_err(|e| ClientError::Unreachable(e.to_string()))?;
    let status = resp.status().as_u16();
    let location = resp
        .headers()
        .get("location")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let headers = resp
        .headers()
        .iter()
        .map(|(k, v)| {
            (
                k.as_str().to_string(),
                String::from_utf8_lossy(v.as_bytes()).into_owned(),
            )
        })
        .collect();
    let body = resp
        .body_mut()
        .read_to_vec()
        .map_err(|e| ClientError::Unreachable(e.to_string()))?;
    Ok(ProbeResponse {
        status,
        location,
        headers,
        body,
    })
}
