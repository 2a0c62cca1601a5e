//! Traffic capture ingestion.
//!
//! Two input paths produce the same normalized unit, [`HttpTransaction`]:
//! classic pcap files (reassembled here from Ethernet/IPv4/TCP frames) and
//! JSONL transaction logs written by the emulator or an intercepting proxy.
//! TLS streams in a pcap are opaque, so only the JSONL path carries
//! decrypted bodies for TLS transactions.

mod headers;
mod jsonl;
mod overlap;
mod pcap;
mod stats;
pub mod wire;

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

pub use headers::HeaderList;
pub use jsonl::{parse_transaction_log, write_transaction_log, SchemaError};
pub use overlap::{cross_device_overlap, OverlapError, OverlapReport, ServiceOverlap};
pub use pcap::{parse_pcap, write_pcap, CaptureError, ParseWarnings, PcapCapture, PcapWriteError};
pub use stats::{classify_party, endpoint_stats, DeviceProfile, EndpointStats, Party, ProfileError, ThirdPartyHost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Put,
    Delete,
    Other,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Delete => "DELETE",
            Method::Other => "OTHER",
        }
    }

    pub fn from_token(token: &str) -> Self {
        match token {
            "GET" => Method::Get,
            "POST" => Method::Post,
            "PUT" => Method::Put,
            "DELETE" => Method::Delete,
            _ => Method::Other,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One request/response exchange.
///
/// `req_bytes`/`resp_bytes` count application-layer message bytes (HTTP head
/// plus body, or TLS application-data payload for opaque streams). `status`
/// is 0 when no response was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpTransaction {
    pub ts_start: f64,
    pub ts_end: f64,
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub host: String,
    pub tls: bool,
    pub method: Method,
    pub path: String,
    pub req_headers: HeaderList,
    pub status: u16,
    pub resp_headers: HeaderList,
    #[serde(rename = "req_body_b64", with = "b64")]
    pub req_body: Vec<u8>,
    #[serde(rename = "resp_body_b64", with = "b64")]
    pub resp_body: Vec<u8>,
    pub req_bytes: u64,
    pub resp_bytes: u64,
}

impl HttpTransaction {
    pub fn has_response(&self) -> bool {
        self.status != 0
    }

    pub fn req_content_type(&self) -> Option<&str> {
        self.req_headers.get("content-type")
    }

    pub fn resp_content_type(&self) -> Option<&str> {
        self.resp_headers.get("content-type")
    }

    /// Query string of `path`, without the leading `?`.
    pub fn query(&self) -> Option<&str> {
        self.path.split_once('?').map(|(_, q)| q)
    }

    /// Sets `req_bytes` and `resp_bytes` to the size of the HTTP/1.1 wire
    /// encoding of this transaction.
    pub fn with_wire_sizes(mut self) -> Self {
        self.req_bytes = wire::encode_request(&self).len() as u64;
        self.resp_bytes = wire::encode_response(&self).map_or(0, |r| r.len() as u64);
        self
    }

    /// What a passive observer recovers from the pcap path.
    ///
    /// Cleartext transactions are returned unchanged. For TLS only endpoints,
    /// timing, the SNI host and byte counts survive; method, path, headers,
    /// status and bodies are hidden.
    pub fn opaque_view(&self) -> HttpTransaction {
        if !self.tls {
            return self.clone();
        }
        HttpTransaction {
            method: Method::Other,
            path: String::new(),
            req_headers: HeaderList::default(),
            status: 0,
            resp_headers: HeaderList::default(),
            req_body: Vec::new(),
            resp_body: Vec::new(),
            ..self.clone()
        }
    }

    pub(crate) fn check_invariants(&self) -> Result<(), String> {
        if !(self.ts_start.is_finite() && self.ts_end.is_finite()) {
            return Err("timestamps must be finite".into());
        }
        if self.ts_end < self.ts_start {
            return Err("ts_end precedes ts_start".into());
        }
        if self.src_port == 0 {
            return Err("src_port must be in 1..=65535".into());
        }
        if self.req_bytes < self.req_body.len() as u64 {
            return Err("req_bytes smaller than request body".into());
        }
        if self.resp_bytes < self.resp_body.len() as u64 {
            return Err("resp_bytes smaller than response body".into());
        }
        Ok(())
    }
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}
