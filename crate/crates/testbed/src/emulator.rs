//! Scripted client sessions for the three toys.
//!
//! Hydration traffic to the first-party API is exchanged with a live testbed
//! and recorded as seen on the wire; everything else is synthesized. All
//! timestamps are synthetic and start at a fixed epoch, so captures are
//! reproducible for a given server seed.

use std::fmt;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use toyaudit_core::capture::{
    write_pcap, write_transaction_log, DeviceProfile, HeaderList, HttpTransaction, Method, PcapWriteError,
    ThirdPartyHost,
};
use toyaudit_core::client::{ClientError, ProbeClient, ProbeResponse};
use toyaudit_core::detect::DetectorId;
use toyaudit_core::fsutil::write_atomic;

use crate::config::{synthetic_photo, TestbedConfig, Toggles};
use crate::fixture;
use crate::server::{serve, ServeError};

const EPOCH: f64 = 1_510_000_000.0;
const CLIENT_IP: Ipv4Addr = Ipv4Addr::new(192, 168, 4, 23);
const FIRST_PORT: u16 = 49200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Hydration,
    Smartpet,
    Fitness,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Hydration, Scenario::Smartpet, Scenario::Fitness];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Hydration => "hydration",
            Scenario::Smartpet => "smartpet",
            Scenario::Fitness => "fitness",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scenario `{s}` (expected hydration, smartpet or fitness)"))
    }
}

/// One planted vulnerability instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub detector_id: DetectorId,
    pub description: String,
    pub evidence_hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioOutputs {
    pub jsonl: PathBuf,
    pub pcap: PathBuf,
    pub labels: PathBuf,
    pub profile: PathBuf,
    /// Source tree for the static scan (smartpet only).
    pub source_tree: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum EmulateError {
    #[error("scenario server unavailable: {0}")]
    ScenarioServerUnavailable(String),
    #[error("scenario server misbehaved: {0}")]
    UnexpectedResponse(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Pcap(#[from] PcapWriteError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl From<ClientError> for EmulateError {
    fn from(e: ClientError) -> Self {
        EmulateError::ScenarioServerUnavailable(e.to_string())
    }
}

struct HostSpec {
    name: &'static str,
    /// `None` for first-party.
    service: Option<&'static str>,
}

const fn fp(name: &'static str) -> HostSpec {
    HostSpec { name, service: None }
}

const fn tp(name: &'static str, service: &'static str) -> HostSpec {
    HostSpec {
        name,
        service: Some(service),
    }
}

const HYDRATION_HOSTS: [HostSpec; 12] = [
    fp("api.toymaker.test"),
    fp("photos.toymaker.test"),
    fp("static.toymaker.test"),
    fp("fw.toymaker.test"),
    tp("www.analytics-1.test", "analytics-1"),
    tp("ssl.analytics-1.test", "analytics-1"),
    tp("reports.crash-1.test", "crash-1"),
    tp("settings.crash-1.test", "crash-1"),
    tp("data.analytics-2.test", "analytics-2"),
    tp("sdk.analytics-3.test", "analytics-3"),
    tp("push.analytics-3.test", "analytics-3"),
    tp("perf.monitor-1.test", "monitor-1"),
];

const SMARTPET_HOSTS: [HostSpec; 6] = [
    fp("api.petmaker.test"),
    tp("www.analytics-1.test", "analytics-1"),
    tp("reports.crash-1.test", "crash-1"),
    tp("feeds.news-1.test", "news-1"),
    tp("headlines.news-1.test", "news-1"),
    tp("assets.cdn-1.test", "cdn-1"),
];

const FITNESS_HOSTS: [HostSpec; 3] = [
    tp("www.analytics-1.test", "analytics-1"),
    tp("reports.crash-1.test", "crash-1"),
    tp("data.analytics-2.test", "analytics-2"),
];

fn hosts(s: Scenario) -> &'static [HostSpec] {
    match s {
        Scenario::Hydration => &HYDRATION_HOSTS,
        Scenario::Smartpet => &SMARTPET_HOSTS,
        Scenario::Fitness => &FITNESS_HOSTS,
    }
}

/// Host classification shipped with each capture.
pub fn scenario_profile(s: Scenario) -> DeviceProfile {
    let first = match s {
        Scenario::Hydration => vec!["*.toymaker.test".to_string()],
        Scenario::Smartpet => vec!["*.petmaker.test".to_string()],
        Scenario::Fitness => vec!["*.bandmaker.test".to_string()],
    };
    DeviceProfile {
        device_name: s.as_str().to_string(),
        first_party_hosts: first,
        third_party_hosts: hosts(s)
            .iter()
            .filter_map(|h| {
                h.service.map(|svc| ThirdPartyHost {
                    pattern: h.name.to_string(),
                    service: svc.to_string(),
                })
            })
            .collect(),
    }
}

fn micros(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

struct Recorder {
    scenario: Scenario,
    user_agent: &'static str,
    txns: Vec<HttpTransaction>,
}

struct Reply {
    status: u16,
    content_type: Option<String>,
    location: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(v: Value) -> Self {
        Self::typed("application/json", v.to_string().into_bytes())
    }

    fn typed(content_type: &str, body: Vec<u8>) -> Self {
        Self {
            status: 200,
            content_type: Some(content_type.to_string()),
            location: None,
            body,
        }
    }

    fn empty(status: u16) -> Self {
        Self {
            status,
            content_type: None,
            location: None,
            body: Vec::new(),
        }
    }

    fn from_live(r: &ProbeResponse) -> Self {
        let content_type = r
            .headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("content-type"))
            .map(|(_, v)| v.clone());
        Self {
            status: r.status,
            content_type,
            location: r.location.clone(),
            body: r.body.clone(),
        }
    }
}

impl Recorder {
    fn new(scenario: Scenario) -> Self {
        let user_agent = match scenario {
            Scenario::Hydration => "HydroBottle/2.1 (Android 7.0)",
            Scenario::Smartpet => "PetPal/1.4 (Android 7.0)",
            Scenario::Fitness => "BandSync/3.0 (Android 7.0)",
        };
        Self {
            scenario,
            user_agent,
            txns: Vec::new(),
        }
    }

    fn dst_ip(&self, host: &str) -> Ipv4Addr {
        let table = hosts(self.scenario);
        let idx = table
            .iter()
            .position(|h| h.name == host)
            .expect("host is in the scenario table");
        if table[idx].service.is_none() {
            Ipv4Addr::new(203, 0, 113, 10 + idx as u8)
        } else {
            Ipv4Addr::new(198, 51, 100, 10 + idx as u8)
        }
    }

    fn request_headers(&self, host: &str, extra: &[(String, String)], body: &[u8]) -> HeaderList {
        let mut h = HeaderList::default();
        h.push("Host", host);
        h.push("User-Agent", self.user_agent);
        for (k, v) in extra {
            h.push(k.clone(), v.clone());
        }
        if !body.is_empty() {
            h.push("Content-Length", body.len().to_string());
        }
        h
    }

    /// Appends one transaction and returns its index.
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        at: f64,
        host: &str,
        tls: bool,
        method: Method,
        path: &str,
        extra: &[(String, String)],
        req_body: Vec<u8>,
        reply: Reply,
    ) -> usize {
        let mut resp_headers = HeaderList::default();
        if let Some(ct) = &reply.content_type {
            resp_headers.push("content-type", ct.clone());
        }
        if let Some(loc) = &reply.location {
            resp_headers.push("location", loc.clone());
        }
        resp_headers.push("content-length", reply.body.len().to_string());
        let ts_start = micros(EPOCH + at);
        let index = self.txns.len();
        let txn = HttpTransaction {
            ts_start,
            ts_end: micros(ts_start + 0.080 + reply.body.len() as f64 * 1e-6),
            src_ip: CLIENT_IP,
            src_port: FIRST_PORT + index as u16,
            dst_ip: self.dst_ip(host),
            dst_port: if tls { 443 } else { 80 },
            host: host.to_string(),
            tls,
            method,
            path: path.to_string(),
            req_headers: self.request_headers(host, extra, &req_body),
            status: reply.status,
            resp_headers,
            req_body,
            resp_body: reply.body,
            req_bytes: 0,
            resp_bytes: 0,
        }
        .with_wire_sizes();
        self.txns.push(txn);
        index
    }

    /// Sends the request to the live server, then records it under `host`.
    #[allow(clippy::too_many_arguments)]
    fn live(
        &mut self,
        client: &ProbeClient,
        at: f64,
        host: &str,
        tls: bool,
        method: Method,
        path: &str,
        extra: &[(String, String)],
        body: Vec<u8>,
    ) -> Result<(usize, ProbeResponse), EmulateError> {
        let resp = match method {
            Method::Get => client.get(path, extra)?,
            m => client.send(m.as_str(), path, extra, &body)?,
        };
        let idx = self.record(at, host, tls, method, path, extra, body, Reply::from_live(&resp));
        Ok((idx, resp))
    }
}

fn hdr(k: &str, v: impl Into<String>) -> (String, String) {
    (k.to_string(), v.into())
}

fn json_type() -> (String, String) {
    hdr("Content-Type", "application/json")
}

fn expect_ok(resp: &ProbeResponse, what: &str) -> Result<Value, EmulateError> {
    if resp.status != 200 {
        return Err(EmulateError::UnexpectedResponse(format!(
            "{what} returned {}",
            resp.status
        )));
    }
    serde_json::from_slice(&resp.body)
        .map_err(|e| EmulateError::UnexpectedResponse(format!("{what} returned non-JSON body: {e}")))
}

fn field(v: &Value, key: &str, what: &str) -> Result<String, EmulateError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| EmulateError::UnexpectedResponse(format!("{what} lacks `{key}`")))
}

fn label(id: DetectorId, description: impl Into<String>, hint: impl Into<String>) -> Label {
    Label {
        detector_id: id,
        description: description.into(),
        evidence_hint: hint.into(),
    }
}

fn txn_hint(indices: &[usize]) -> String {
    let list: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
    format!("txn {}", list.join(","))
}

fn hydration(
    rec: &mut Recorder,
    toggles: Toggles,
    prefix_len: usize,
    server_url: &str,
) -> Result<Vec<Label>, EmulateError> {
    let client = ProbeClient::new(server_url, Duration::ZERO)?;
    let health = client.get("/health", &[])?;
    if health.status != 200 {
        return Err(EmulateError::ScenarioServerUnavailable(format!(
            "health check returned {}",
            health.status
        )));
    }
    let fp_tls = !toggles.cleartext_first_party;
    let mut labels = Vec::new();
    let mut pii_txns = Vec::new();

    rec.record(
        0.0,
        "settings.crash-1.test",
        true,
        Method::Get,
        "/spi/v2/settings?build=210",
        &[],
        vec![],
        Reply::json(json!({"crash_reporting": true, "sample_rate": 1.0})),
    );
    rec.record(
        0.5,
        "static.toymaker.test",
        fp_tls,
        Method::Get,
        "/app/config.json",
        &[],
        vec![],
        Reply::json(json!({"version": "2.1.0", "features": ["goals", "reminders"]})),
    );
    rec.record(
        1.0,
        "fw.toymaker.test",
        fp_tls,
        Method::Get,
        "/firmware/bottle/latest.json",
        &[],
        vec![],
        Reply::json(json!({"firmware": "1.4.2", "size": 182044})),
    );

    let kid = json!({
        "name": "Ava",
        "gender": "female",
        "birthday": "2010-05-01",
        "weight_kg": 30.0,
        "height_cm": 130.0,
        "age_years": 7
    });
    let (acct_idx, resp) = rec.live(
        &client,
        2.0,
        "api.toymaker.test",
        fp_tls,
        Method::Post,
        "/api/account",
        &[json_type()],
        kid.to_string().into_bytes(),
    )?;
    pii_txns.push(acct_idx);
    let acct = expect_ok(&resp, "account creation")?;
    let user_id = field(&acct, "user_id", "account creation")?;
    let mut auth = field(&acct, "auth_token", "account creation")?;
    let mut refresh = acct.get("refresh_token").and_then(Value::as_str).map(str::to_string);

    rec.record(
        3.0,
        "www.analytics-1.test",
        true,
        Method::Post,
        "/collect",
        &[hdr("Content-Type", "application/x-www-form-urlencoded")],
        b"v=1&t=screenview&cd=onboarding".to_vec(),
        Reply::empty(204),
    );

    let photo = synthetic_photo("hydration-kid");
    let upload_headers = |auth: &str| vec![hdr("X-Auth-Token", auth), hdr("Content-Type", "image/jpeg")];
    let (_, resp) = rec.live(
        &client,
        4.0,
        "api.toymaker.test",
        fp_tls,
        Method::Put,
        &format!("/api/photo/{user_id}"),
        &upload_headers(&auth),
        photo.clone(),
    )?;
    let first_token = field(&expect_ok(&resp, "photo upload")?, "token", "photo upload")?;
    let prefix = first_token.chars().take(prefix_len).collect::<String>();

    let photo_get_headers = |auth: &str| {
        if toggles.no_auth_photos {
            vec![]
        } else {
            vec![hdr("Authorization", format!("Bearer {auth}"))]
        }
    };
    let (photo_idx, resp) = rec.live(
        &client,
        5.0,
        "photos.toymaker.test",
        fp_tls,
        Method::Get,
        &format!("/api/photo/{prefix}/{first_token}"),
        &photo_get_headers(&auth),
        vec![],
    )?;
    if resp.status != 200 {
        return Err(EmulateError::UnexpectedResponse(format!(
            "photo fetch returned {}",
            resp.status
        )));
    }
    pii_txns.push(photo_idx);

    rec.record(
        6.0,
        "ssl.analytics-1.test",
        true,
        Method::Get,
        "/analytics.js",
        &[],
        vec![],
        Reply::typed("application/javascript", b"(function(){})();".to_vec()),
    );
    rec.record(
        10.0,
        "data.analytics-2.test",
        true,
        Method::Post,
        "/v2/events",
        &[json_type()],
        json!({"event_type": "session_start", "platform": "android"})
            .to_string()
            .into_bytes(),
        Reply::json(json!({"accepted": 1})),
    );
    rec.record(
        12.0,
        "push.analytics-3.test",
        true,
        Method::Post,
        "/v1/register",
        &[json_type()],
        json!({"device_token": "c0ffee42", "channel": "reminders"})
            .to_string()
            .into_bytes(),
        Reply::json(json!({"ok": true})),
    );

    // Three bottle drink events ten minutes apart.
    let mut drink_idx = Vec::new();
    for (i, at) in [60.0, 360.0, 660.0].into_iter().enumerate() {
        if i > 0 {
            if let Some(r) = refresh.clone() {
                let (_, resp) = rec.live(
                    &client,
                    at - 1.0,
                    "api.toymaker.test",
                    fp_tls,
                    Method::Post,
                    "/api/token/refresh",
                    &[json_type()],
                    json!({ "refresh_token": r }).to_string().into_bytes(),
                )?;
                let v = expect_ok(&resp, "token refresh")?;
                auth = field(&v, "auth_token", "token refresh")?;
                refresh = Some(field(&v, "refresh_token", "token refresh")?);
            }
        }
        let (idx, resp) = rec.live(
            &client,
            at,
            "api.toymaker.test",
            fp_tls,
            Method::Post,
            "/api/drink",
            &[hdr("X-Auth-Token", auth.clone()), json_type()],
            json!({"ml": 250}).to_string().into_bytes(),
        )?;
        expect_ok(&resp, "drink report")?;
        drink_idx.push(idx);
        if i == 1 {
            rec.record(
                at + 2.0,
                "sdk.analytics-3.test",
                true,
                Method::Post,
                "/track",
                &[json_type()],
                json!({"event_type": "drink_logged", "count": 2})
                    .to_string()
                    .into_bytes(),
                Reply::json(json!({"ok": true})),
            );
        }
    }

    rec.record(
        661.0,
        "perf.monitor-1.test",
        true,
        Method::Post,
        "/metrics",
        &[json_type()],
        json!({"cold_start_ms": 812, "frames_dropped": 3})
            .to_string()
            .into_bytes(),
        Reply::empty(202),
    );

    let crash = if toggles.pii_crash_reports {
        json!({
            "name": "Ava",
            "gender": "female",
            "birthday": "2010-05-01",
            "weight": 30.0,
            "error": "java.lang.IllegalStateException: sync failed"
        })
    } else {
        json!({"error": "java.lang.IllegalStateException: sync failed", "app_version": "2.1.0"})
    };
    let crash_idx = rec.record(
        700.0,
        "reports.crash-1.test",
        true,
        Method::Post,
        "/api/v1/crash",
        &[json_type()],
        crash.to_string().into_bytes(),
        Reply::json(json!({"id": "r-5521"})),
    );

    // The child replaces their profile picture.
    let (_, resp) = rec.live(
        &client,
        720.0,
        "api.toymaker.test",
        fp_tls,
        Method::Put,
        &format!("/api/photo/{user_id}"),
        &upload_headers(&auth),
        synthetic_photo("hydration-kid-2"),
    )?;
    let second_token = field(&expect_ok(&resp, "photo overwrite")?, "token", "photo overwrite")?;
    let second_prefix: String = second_token.chars().take(prefix_len).collect();
    let (idx, resp) = rec.live(
        &client,
        721.0,
        "photos.toymaker.test",
        fp_tls,
        Method::Get,
        &format!("/api/photo/{second_prefix}/{second_token}"),
        &photo_get_headers(&auth),
        vec![],
    )?;
    if resp.status != 200 {
        return Err(EmulateError::UnexpectedResponse(format!(
            "photo fetch returned {}",
            resp.status
        )));
    }
    pii_txns.push(idx);

    if toggles.cleartext_first_party {
        for h in HYDRATION_HOSTS.iter().filter(|h| h.service.is_none()) {
            labels.push(label(
                DetectorId::Cleartext,
                "first-party host served over plain HTTP",
                format!("host {}", h.name),
            ));
        }
        for &i in &pii_txns {
            labels.push(label(
                DetectorId::PiiExposure,
                "child PII or photo in a cleartext message",
                txn_hint(&[i]),
            ));
        }
    }
    if toggles.token_reuse {
        labels.push(label(
            DetectorId::TokenReuse,
            "drink reports replay one X-Auth-Token over ten minutes",
            txn_hint(&drink_idx),
        ));
    }
    if toggles.no_auth_photos {
        labels.push(label(
            DetectorId::NoAuth,
            "profile photo fetched without credentials",
            txn_hint(&[photo_idx]),
        ));
    }
    if toggles.pii_crash_reports {
        labels.push(label(
            DetectorId::PiiThirdParty,
            "crash report carries name, gender, birthday and weight",
            txn_hint(&[crash_idx]),
        ));
    }
    if toggles.prefix_oracle {
        labels.push(label(
            DetectorId::Oracle,
            "truncated photo URL answers differently for issued prefixes",
            format!("GET /api/photo/{prefix}"),
        ));
    }
    if toggles.retain_old_photos {
        labels.push(label(
            DetectorId::StaleResource,
            "overwritten profile photo is still served",
            format!("GET /api/photo/{prefix}/{first_token}"),
        ));
    }
    Ok(labels)
}

const NEWS_XML: &str = "<?xml version=\"1.0\"?><rss><channel><title>Pet tips</title>\
<item><title>Five toys cats love</title><link>/tips/42</link></item></channel></rss>";

fn smartpet(rec: &mut Recorder, toggles: Toggles) -> Vec<Label> {
    let news_tls = !toggles.cleartext_first_party;
    let mut labels = Vec::new();
    rec.record(
        0.0,
        "api.petmaker.test",
        true,
        Method::Get,
        "/v1/pet/status",
        &[],
        vec![],
        Reply::json(json!({"species": "cat", "mood": "playful", "battery": 81})),
    );
    rec.record(
        1.0,
        "assets.cdn-1.test",
        true,
        Method::Get,
        "/bundles/ui.css",
        &[],
        vec![],
        Reply::typed("text/css", b"body{margin:0}".to_vec()),
    );
    let mut news = Vec::new();
    for (at, host, path) in [
        (2.0, "feeds.news-1.test", "/rss/pets.xml"),
        (3.0, "headlines.news-1.test", "/top/pets.xml"),
        (240.0, "feeds.news-1.test", "/rss/pets.xml?page=2"),
    ] {
        news.push((
            host,
            rec.record(
                at,
                host,
                news_tls,
                Method::Get,
                path,
                &[hdr("Accept", "application/rss+xml")],
                vec![],
                Reply::typed("application/rss+xml", NEWS_XML.as_bytes().to_vec()),
            ),
        ));
    }
    rec.record(
        5.0,
        "www.analytics-1.test",
        true,
        Method::Post,
        "/collect",
        &[hdr("Content-Type", "application/x-www-form-urlencoded")],
        b"v=1&t=event&ec=play&ea=laser".to_vec(),
        Reply::empty(204),
    );
    rec.record(
        200.0,
        "api.petmaker.test",
        true,
        Method::Post,
        "/v1/pet/feed",
        &[json_type()],
        json!({"portion_g": 40}).to_string().into_bytes(),
        Reply::json(json!({"ok": true})),
    );
    rec.record(
        290.0,
        "reports.crash-1.test",
        true,
        Method::Post,
        "/api/v1/crash",
        &[json_type()],
        json!({"error": "java.net.SocketTimeoutException", "app_version": "1.4.0"})
            .to_string()
            .into_bytes(),
        Reply::json(json!({"id": "r-0031"})),
    );

    if toggles.cleartext_first_party {
        let mut seen = Vec::new();
        for (host, _) in &news {
            if !seen.contains(host) {
                seen.push(*host);
                labels.push(label(
                    DetectorId::Cleartext,
                    "news XML fetched over plain HTTP",
                    format!("host {host}"),
                ));
            }
        }
    }
    for (id, line) in fixture::planted_secret_lines() {
        labels.push(label(
            DetectorId::SecretConstant,
            format!("{id} stored as a plaintext literal"),
            format!("{}:{line}", fixture::NOOK_CONFIG_PATH),
        ));
    }
    labels
}

fn fitness(rec: &mut Recorder) -> Vec<Label> {
    rec.record(
        0.0,
        "www.analytics-1.test",
        true,
        Method::Post,
        "/collect",
        &[hdr("Content-Type", "application/x-www-form-urlencoded")],
        b"v=1&t=screenview&cd=dashboard".to_vec(),
        Reply::empty(204),
    );
    rec.record(
        30.0,
        "data.analytics-2.test",
        true,
        Method::Post,
        "/v2/events",
        &[json_type()],
        json!({"event_type": "sync", "steps_bucket": "5k-10k"})
            .to_string()
            .into_bytes(),
        Reply::json(json!({"accepted": 1})),
    );
    rec.record(
        120.0,
        "reports.crash-1.test",
        true,
        Method::Post,
        "/api/v1/crash",
        &[json_type()],
        json!({"error": "android.os.DeadObjectException", "app_version": "3.0.2"})
            .to_string()
            .into_bytes(),
        Reply::json(json!({"id": "r-8812"})),
    );
    vec![]
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmulateError + '_ {
    move |source| EmulateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs one scripted session and writes `{scenario}.jsonl`, `.pcap`,
/// `.labels.json` and `.profile.json` into `out_dir`. Hydration needs a
/// testbed running with `config` at `server_url`.
pub fn emulate_toy_session(
    scenario: Scenario,
    config: &TestbedConfig,
    server_url: Option<&str>,
    out_dir: &Path,
) -> Result<ScenarioOutputs, EmulateError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut rec = Recorder::new(scenario);
    let mut source_tree = None;
    let labels = match scenario {
        Scenario::Hydration => {
            let url = server_url
                .ok_or_else(|| EmulateError::ScenarioServerUnavailable("hydration needs a running testbed".into()))?;
            hydration(&mut rec, config.toggles, config.space.prefix_len(), url)?
        }
        Scenario::Smartpet => {
            let root = out_dir.join("smartpet_src");
            fixture::write_smartpet_source(&root).map_err(io_err(&root))?;
            let labels = smartpet(&mut rec, config.toggles);
            source_tree = Some(root);
            labels
        }
        Scenario::Fitness => fitness(&mut rec),
    };

    let name = scenario.as_str();
    let out = ScenarioOutputs {
        jsonl: out_dir.join(format!("{name}.jsonl")),
        pcap: out_dir.join(format!("{name}.pcap")),
        labels: out_dir.join(format!("{name}.labels.json")),
        profile: out_dir.join(format!("{name}.profile.json")),
        source_tree,
    };
    let mut pcap = Vec::new();
    write_pcap(&rec.txns, &mut pcap)?;
    let labels_json = serde_json::to_vec_pretty(&labels).expect("labels serialize");
    let profile_json = serde_json::to_vec_pretty(&scenario_profile(scenario)).expect("profile serializes");
    write_atomic(&out.jsonl, write_transaction_log(&rec.txns).as_bytes()).map_err(io_err(&out.jsonl))?;
    write_atomic(&out.pcap, &pcap).map_err(io_err(&out.pcap))?;
    write_atomic(&out.labels, &labels_json).map_err(io_err(&out.labels))?;
    write_atomic(&out.profile, &profile_json).map_err(io_err(&out.profile))?;
    tracing::info!(
        scenario = name,
        transactions = rec.txns.len(),
        labels = labels.len(),
        "session emulated"
    );
    Ok(out)
}

/// Like [`emulate_toy_session`], but starts a loopback testbed from
/// `config` for the duration of a hydration run.
pub fn emulate_with_testbed(
    scenario: Scenario,
    config: &TestbedConfig,
    out_dir: &Path,
) -> Result<ScenarioOutputs, EmulateError> {
    if scenario != Scenario::Hydration {
        return emulate_toy_session(scenario, config, None, out_dir);
    }
    let mut local = config.clone();
    local.listen_address = "127.0.0.1:0".into();
    let server = serve(local)?;
    let result = emulate_toy_session(scenario, config, Some(&server.base_url()), out_dir);
    server.shutdown();
    result
}
