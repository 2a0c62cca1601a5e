//! Classic pcap reading (with TCP reassembly and HTTP/TLS message pairing)
//! and writing of synthetic captures from transaction lists.
//!
//! Reassembly accepts in-order, non-overlapping segments only. Exact
//! retransmissions of already-delivered bytes are ignored; any other gap or
//! overlap marks the whole stream out-of-order and it is skipped with a
//! warning.

use std::collections::HashMap;
use std::io::{Cursor, Write};
use std::net::Ipv4Addr;
use std::time::Duration;

use etherparse::{NetSlice, PacketBuilder, SlicedPacket, TransportSlice};
use pcap_file::pcap::{PcapHeader, PcapPacket, PcapReader, PcapWriter};
use pcap_file::{DataLink, Endianness, PcapError};
use serde::Serialize;
use thiserror::Error;

use super::wire::{self, Parse};
use super::{HeaderList, HttpTransaction, Method};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("malformed capture: {0}")]
    MalformedCapture(String),
    #[error("unsupported link type {0}; only Ethernet captures are handled")]
    UnsupportedLinkType(String),
}

#[derive(Debug, Error)]
pub enum PcapWriteError {
    #[error("pcap write failed: {0}")]
    Pcap(#[from] PcapError),
    #[error("transaction {index}: {reason}")]
    Unencodable { index: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseWarnings {
    pub out_of_order_streams: usize,
    pub unparseable_streams: usize,
    pub ignored_packets: usize,
    pub messages: Vec<String>,
}

impl ParseWarnings {
    pub fn is_empty(&self) -> bool {
        self.out_of_order_streams == 0 && self.unparseable_streams == 0 && self.messages.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PcapCapture {
    pub transactions: Vec<HttpTransaction>,
    pub warnings: ParseWarnings,
}

type Endpoint = (Ipv4Addr, u16);

const TLS_HANDSHAKE: u8 = 22;
const TLS_APPLICATION_DATA: u8 = 23;
const TLS_MAX_RECORD: usize = 16_384;
const MSS: usize = 1460;

#[derive(Debug, Clone, Copy)]
struct Mark {
    offset: usize,
    ts: f64,
    order: usize,
}

#[derive(Debug, Default)]
struct Direction {
    next_seq: Option<u32>,
    data: Vec<u8>,
    marks: Vec<Mark>,
    fin: bool,
}

/// Signed distance `a - b` in sequence space.
fn seq_diff(a: u32, b: u32) -> i32 {
    a.wrapping_sub(b) as i32
}

impl Direction {
    /// Returns false when the segment breaks in-order delivery.
    fn accept(&mut self, seq: u32, syn: bool, fin: bool, payload: &[u8], ts: f64, order: usize) -> bool {
        let mut seq = seq;
        if syn {
            seq = seq.wrapping_add(1);
            self.next_seq = Some(seq);
        }
        if !payload.is_empty() {
            let expected = *self.next_seq.get_or_insert(seq);
            if seq == expected {
                self.marks.push(Mark {
                    offset: self.data.len(),
                    ts,
                    order,
                });
                self.data.extend_from_slice(payload);
                self.next_seq = Some(seq.wrapping_add(payload.len() as u32));
            } else {
                let end = seq.wrapping_add(payload.len() as u32);
                let duplicate = seq_diff(expected, seq) > 0 && seq_diff(expected, end) >= 0;
                if !duplicate {
                    return false;
                }
            }
        }
        if fin && !self.fin {
            self.fin = true;
            if let Some(next) = self.next_seq {
                self.next_seq = Some(next.wrapping_add(1));
            }
        }
        true
    }

    /// Mark of the segment that delivered byte `offset`.
    fn mark_at(&self, offset: usize) -> Mark {
        let idx = self.marks.partition_point(|m| m.offset <= offset);
        self.marks[idx.saturating_sub(1)]
    }
}

#[derive(Debug)]
struct Connection {
    client: Endpoint,
    server: Endpoint,
    to_server: Direction,
    to_client: Direction,
    out_of_order: bool,
}

impl Connection {
    fn new(client: Endpoint, server: Endpoint) -> Self {
        Self {
            client,
            server,
            to_server: Direction::default(),
            to_client: Direction::default(),
            out_of_order: false,
        }
    }

    fn label(&self) -> String {
        format!(
            "{}:{} -> {}:{}",
            self.client.0, self.client.1, self.server.0, self.server.1
        )
    }

    fn has_traffic(&self) -> bool {
        !self.to_server.data.is_empty() || !self.to_client.data.is_empty() || self.to_server.fin
    }
}

fn flow_key(a: Endpoint, b: Endpoint) -> (Endpoint, Endpoint) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Reconstructs HTTP transactions from a classic pcap byte stream.
///
/// Transactions are returned ordered by `ts_start`. Requests without a
/// response get status 0. TLS streams yield opaque transactions (host from
/// SNI, no method/path/headers/bodies, byte counts from application-data
/// records).
pub fn parse_pcap(bytes: &[u8]) -> Result<PcapCapture, CaptureError> {
    let mut reader = PcapReader::new(Cursor::new(bytes))
        .map_err(|e| CaptureError::MalformedCapture(format!("bad global header: {e}")))?;
    let datalink = reader.header().datalink;
    if datalink != DataLink::ETHERNET {
        return Err(CaptureError::UnsupportedLinkType(format!("{datalink:?}")));
    }

    let mut warnings = ParseWarnings::default();
    let mut connections: Vec<Connection> = Vec::new();
    let mut index: HashMap<(Endpoint, Endpoint), usize> = HashMap::new();
    let mut order = 0usize;

    while let Some(packet) = reader.next_packet() {
        let packet =
            packet.map_err(|e| CaptureError::MalformedCapture(format!("truncated packet record {order}: {e}")))?;
        order += 1;
        let ts = packet.timestamp.as_secs_f64();
        let Ok(sliced) = SlicedPacket::from_ethernet(&packet.data) else {
            warnings.ignored_packets += 1;
            continue;
        };
        let (Some(NetSlice::Ipv4(ip)), Some(TransportSlice::Tcp(tcp))) = (&sliced.net, &sliced.transport) else {
            warnings.ignored_packets += 1;
            continue;
        };
        let src = (ip.header().source_addr(), tcp.source_port());
        let dst = (ip.header().destination_addr(), tcp.destination_port());
        let key = flow_key(src, dst);
        let opening = tcp.syn() && !tcp.ack();

        let slot = match index.get(&key) {
            Some(&i) if !(opening && connections[i].has_traffic()) => i,
            _ => {
                let (client, server) = if tcp.syn() {
                    if tcp.ack() {
                        (dst, src)
                    } else {
                        (src, dst)
                    }
                } else if src.1 > dst.1 {
                    (src, dst)
                } else {
                    (dst, src)
                };
                connections.push(Connection::new(client, server));
                index.insert(key, connections.len() - 1);
                connections.len() - 1
            }
        };
        let conn = &mut connections[slot];
        if conn.out_of_order {
            continue;
        }
        let dir = if src == conn.client {
            &mut conn.to_server
        } else {
            &mut conn.to_client
        };
        let ok = dir.accept(tcp.sequence_number(), tcp.syn(), tcp.fin(), tcp.payload(), ts, order);
        if !ok {
            conn.out_of_order = true;
        }
    }

    let mut transactions = Vec::new();
    for conn in &connections {
        if conn.out_of_order {
            warnings.out_of_order_streams += 1;
            warnings
                .messages
                .push(format!("{}: out-of-order segments, stream skipped", conn.label()));
            tracing::warn!(stream = %conn.label(), "out-of-order TCP stream skipped");
            continue;
        }
        if conn.to_server.data.is_empty() {
            continue;
        }
        let result = if is_tls(&conn.to_server.data) {
            tls_transactions(conn)
        } else {
            http_transactions(conn, &mut warnings)
        };
        match result {
            Ok(mut txns) => transactions.append(&mut txns),
            Err(reason) => {
                warnings.unparseable_streams += 1;
                warnings
                    .messages
                    .push(format!("{}: {reason}, stream skipped", conn.label()));
                tracing::warn!(stream = %conn.label(), %reason, "unparseable stream skipped");
            }
        }
    }
    transactions.sort_by(|a, b| a.ts_start.total_cmp(&b.ts_start));
    Ok(PcapCapture { transactions, warnings })
}

fn is_tls(data: &[u8]) -> bool {
    data.len() >= 3 && data[0] == TLS_HANDSHAKE && data[1] == 3
}

fn host_label(headers: &HeaderList, server: Endpoint) -> String {
    match headers.get("host") {
        Some(h) if !h.trim().is_empty() => {
            let h = h.trim();
            match h.rsplit_once(':') {
                Some((name, port)) if !name.is_empty() && port.bytes().all(|b| b.is_ascii_digit()) => name.to_string(),
                _ => h.to_string(),
            }
        }
        _ => server.0.to_string(),
    }
}

fn http_transactions(conn: &Connection, warnings: &mut ParseWarnings) -> Result<Vec<HttpTransaction>, String> {
    let client_data = &conn.to_server.data;
    let server_data = &conn.to_client.data;

    let mut requests = Vec::new();
    let mut offset = 0;
    while offset < client_data.len() {
        match wire::parse_request(&client_data[offset..]) {
            Parse::Done(req) => {
                let start = offset;
                offset += req.len;
                requests.push((req, start, offset));
            }
            Parse::Incomplete => {
                warnings
                    .messages
                    .push(format!("{}: trailing partial request ignored", conn.label()));
                break;
            }
            Parse::Invalid(e) if requests.is_empty() => return Err(format!("not HTTP/1.1 ({e})")),
            Parse::Invalid(e) => {
                warnings
                    .messages
                    .push(format!("{}: trailing bytes are not HTTP ({e})", conn.label()));
                break;
            }
        }
    }

    // FIFO pairing of pipelined requests with responses
    let mut out = Vec::with_capacity(requests.len());
    let mut resp_offset = 0;
    for (req, start, end) in requests {
        let start_mark = conn.to_server.mark_at(start);
        let mut txn = HttpTransaction {
            ts_start: start_mark.ts,
            ts_end: conn.to_server.mark_at(end - 1).ts,
            src_ip: conn.client.0,
            src_port: conn.client.1,
            dst_ip: conn.server.0,
            dst_port: conn.server.1,
            host: host_label(&req.headers, conn.server),
            tls: false,
            method: req.method,
            path: req.path,
            req_headers: req.headers,
            status: 0,
            resp_headers: HeaderList::new(),
            req_body: req.body,
            resp_body: Vec::new(),
            req_bytes: (end - start) as u64,
            resp_bytes: 0,
        };
        if resp_offset < server_data.len() {
            match wire::parse_response(&server_data[resp_offset..], req.is_head, true) {
                Parse::Done(resp) => {
                    let last = resp_offset + resp.len - 1;
                    txn.ts_end = conn.to_client.mark_at(last).ts.max(txn.ts_start);
                    txn.status = resp.status;
                    txn.resp_headers = resp.headers;
                    txn.resp_body = resp.body;
                    txn.resp_bytes = resp.len as u64;
                    resp_offset += resp.len;
                }
                Parse::Incomplete => {
                    warnings.messages.push(format!("{}: truncated response", conn.label()));
                    resp_offset = server_data.len();
                }
                Parse::Invalid(e) => {
                    warnings
                        .messages
                        .push(format!("{}: unparseable response ({e})", conn.label()));
                    resp_offset = server_data.len();
                }
            }
        }
        out.push(txn);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Record {
    content_type: u8,
    payload_start: usize,
    payload_end: usize,
}

fn tls_records(data: &[u8]) -> Vec<Record> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos + 5 <= data.len() {
        let len = u16::from_be_bytes([data[pos + 3], data[pos + 4]]) as usize;
        if pos + 5 + len > data.len() {
            break;
        }
        records.push(Record {
            content_type: data[pos],
            payload_start: pos + 5,
            payload_end: pos + 5 + len,
        });
        pos += 5 + len;
    }
    records
}

/// Server name from a ClientHello handshake message.
fn client_hello_sni(msg: &[u8]) -> Option<String> {
    if msg.first() != Some(&1) || msg.len() < 4 {
        return None;
    }
    let body = &msg[4..];
    let mut pos = 2 + 32;
    let sid_len = *body.get(pos)? as usize;
    pos += 1 + sid_len;
    let suites_len = u16::from_be_bytes([*body.get(pos)?, *body.get(pos + 1)?]) as usize;
    pos += 2 + suites_len;
    let comp_len = *body.get(pos)? as usize;
    pos += 1 + comp_len;
    let ext_total = u16::from_be_bytes([*body.get(pos)?, *body.get(pos + 1)?]) as usize;
    pos += 2;
    let ext_end = (pos + ext_total).min(body.len());
    while pos + 4 <= ext_end {
        let ext_type = u16::from_be_bytes([body[pos], body[pos + 1]]);
        let ext_len = u16::from_be_bytes([body[pos + 2], body[pos + 3]]) as usize;
        let data = body.get(pos + 4..pos + 4 + ext_len)?;
        if ext_type == 0 {
            // server_name_list: u16 length, then (type u8, name u16-prefixed)
            let name_type = *data.get(2)?;
            let name_len = u16::from_be_bytes([*data.get(3)?, *data.get(4)?]) as usize;
            if name_type == 0 {
                return std::str::from_utf8(data.get(5..5 + name_len)?).ok().map(str::to_string);
            }
        }
        pos += 4 + ext_len;
    }
    None
}

fn tls_transactions(conn: &Connection) -> Result<Vec<HttpTransaction>, String> {
    let client_records = tls_records(&conn.to_server.data);
    let server_records = tls_records(&conn.to_client.data);
    let sni = client_records
        .iter()
        .find(|r| r.content_type == TLS_HANDSHAKE)
        .and_then(|r| client_hello_sni(&conn.to_server.data[r.payload_start..r.payload_end]));
    let host = sni.unwrap_or_else(|| conn.server.0.to_string());

    // (order of first byte, from_client, ts first byte, ts last byte, payload len)
    let mut events = Vec::new();
    for (records, dir, from_client) in [
        (&client_records, &conn.to_server, true),
        (&server_records, &conn.to_client, false),
    ] {
        for r in records.iter().filter(|r| r.content_type == TLS_APPLICATION_DATA) {
            let first = dir.mark_at(r.payload_start - 5);
            let last = dir.mark_at(r.payload_end - 1);
            events.push((
                first.order,
                from_client,
                first.ts,
                last.ts,
                r.payload_end - r.payload_start,
            ));
        }
    }
    events.sort_by_key(|e| (e.0, !e.1));

    let template = HttpTransaction {
        ts_start: 0.0,
        ts_end: 0.0,
        src_ip: conn.client.0,
        src_port: conn.client.1,
        dst_ip: conn.server.0,
        dst_port: conn.server.1,
        host,
        tls: true,
        method: Method::Other,
        path: String::new(),
        req_headers: HeaderList::new(),
        status: 0,
        resp_headers: HeaderList::new(),
        req_body: Vec::new(),
        resp_body: Vec::new(),
        req_bytes: 0,
        resp_bytes: 0,
    };

    let mut out: Vec<HttpTransaction> = Vec::new();
    let mut current: Option<HttpTransaction> = None;
    for (_, from_client, first_ts, last_ts, len) in events {
        match (&mut current, from_client) {
            (Some(txn), true) if txn.resp_bytes == 0 => {
                txn.req_bytes += len as u64;
                txn.ts_end = last_ts;
            }
            (Some(txn), false) => {
                txn.resp_bytes += len as u64;
                txn.ts_end = last_ts;
            }
            (_, true) => {
                if let Some(done) = current.take() {
                    out.push(done);
                }
                current = Some(HttpTransaction {
                    ts_start: first_ts,
                    ts_end: last_ts,
                    req_bytes: len as u64,
                    ..template.clone()
                });
            }
            (None, false) => {
                // server data before any client request: attribute to an empty request
                current = Some(HttpTransaction {
                    ts_start: first_ts,
                    ts_end: last_ts,
                    resp_bytes: len as u64,
                    ..template.clone()
                });
            }
        }
    }
    out.extend(current);
    Ok(out)
}

fn mac_for(ip: Ipv4Addr) -> [u8; 6] {
    let o = ip.octets();
    [0x02, 0x00, o[0], o[1], o[2], o[3]]
}

struct Frame {
    ts: Duration,
    data: Vec<u8>,
}

fn to_duration(ts: f64) -> Duration {
    Duration::from_micros((ts.max(0.0) * 1e6).round() as u64)
}

#[derive(Default, Clone, Copy)]
struct Flags {
    syn: bool,
    fin: bool,
    psh: bool,
}

fn build_frame(src: Endpoint, dst: Endpoint, seq: u32, ack: Option<u32>, flags: Flags, payload: &[u8]) -> Vec<u8> {
    let mut builder = PacketBuilder::ethernet2(mac_for(src.0), mac_for(dst.0))
        .ipv4(src.0.octets(), dst.0.octets(), 64)
        .tcp(src.1, dst.1, seq, 64_240);
    if flags.syn {
        builder = builder.syn();
    }
    if let Some(ack) = ack {
        builder = builder.ack(ack);
    }
    if flags.psh {
        builder = builder.psh();
    }
    if flags.fin {
        builder = builder.fin();
    }
    let mut out = Vec::with_capacity(builder.size(payload.len()));
    builder
        .write(&mut out, payload)
        .expect("segment sizes are bounded by the MSS");
    out
}

fn tls_record(content_type: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 5);
    out.push(content_type);
    out.extend_from_slice(&[0x03, 0x03]);
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

fn client_hello(host: &str) -> Vec<u8> {
    let name = host.as_bytes();
    let mut sni = Vec::new();
    sni.extend_from_slice(&((name.len() + 3) as u16).to_be_bytes());
    sni.push(0);
    sni.extend_from_slice(&(name.len() as u16).to_be_bytes());
    sni.extend_from_slice(name);

    let mut ext = Vec::new();
    ext.extend_from_slice(&0u16.to_be_bytes());
    ext.extend_from_slice(&(sni.len() as u16).to_be_bytes());
    ext.extend_from_slice(&sni);

    let mut body = vec![0x03, 0x03];
    body.extend_from_slice(&[0u8; 32]);
    body.push(0);
    body.extend_from_slice(&[0x00, 0x02, 0x13, 0x01]);
    body.extend_from_slice(&[0x01, 0x00]);
    body.extend_from_slice(&(ext.len() as u16).to_be_bytes());
    body.extend_from_slice(&ext);

    let mut msg = vec![1];
    msg.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
    msg.extend_from_slice(&body);
    tls_record(TLS_HANDSHAKE, &msg)
}

fn server_hello() -> Vec<u8> {
    let mut body = vec![0x03, 0x03];
    body.extend_from_slice(&[0u8; 32]);
    body.push(0);
    body.extend_from_slice(&[0x13, 0x01, 0x00, 0x00, 0x00]);
    let mut msg = vec![2];
    msg.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
    msg.extend_from_slice(&body);
    tls_record(TLS_HANDSHAKE, &msg)
}

/// Application-data records whose payload lengths sum to `len`. The
/// contents are filler; no plaintext is written for TLS transactions.
fn opaque_records(len: u64) -> Vec<u8> {
    let mut out = Vec::new();
    let mut remaining = len as usize;
    while remaining > 0 {
        let n = remaining.min(TLS_MAX_RECORD);
        out.extend(tls_record(TLS_APPLICATION_DATA, &vec![0xA5; n]));
        remaining -= n;
    }
    out
}

struct StreamWriter<'a> {
    frames: &'a mut Vec<Frame>,
    client: Endpoint,
    server: Endpoint,
    client_seq: u32,
    server_seq: u32,
}

impl StreamWriter<'_> {
    fn client_sends(&mut self, ts: f64, payload: &[u8]) {
        for chunk in payload.chunks(MSS) {
            let data = build_frame(
                self.client,
                self.server,
                self.client_seq,
                Some(self.server_seq),
                Flags {
                    psh: true,
                    ..Flags::default()
                },
                chunk,
            );
            self.client_seq = self.client_seq.wrapping_add(chunk.len() as u32);
            self.frames.push(Frame {
                ts: to_duration(ts),
                data,
            });
        }
    }

    fn server_sends(&mut self, ts: f64, payload: &[u8]) {
        for chunk in payload.chunks(MSS) {
            let data = build_frame(
                self.server,
                self.client,
                self.server_seq,
                Some(self.client_seq),
                Flags {
                    psh: true,
                    ..Flags::default()
                },
                chunk,
            );
            self.server_seq = self.server_seq.wrapping_add(chunk.len() as u32);
            self.frames.push(Frame {
                ts: to_duration(ts),
                data,
            });
        }
    }
}

/// Writes one TCP connection per transaction as a little-endian,
/// microsecond-resolution Ethernet pcap.
///
/// Cleartext transactions carry their HTTP/1.1 encoding. TLS transactions
/// carry a ClientHello naming `host`, then filler application-data records
/// sized by `req_bytes`/`resp_bytes`. Handshake packets precede `ts_start` by
/// a few milliseconds so that the first request byte lands on `ts_start` and
/// the last response byte on `ts_end`.
pub fn write_pcap<W: Write>(txns: &[HttpTransaction], out: W) -> Result<(), PcapWriteError> {
    let mut frames: Vec<Frame> = Vec::new();
    for (i, txn) in txns.iter().enumerate() {
        if txn.method == Method::Other && !txn.tls {
            return Err(PcapWriteError::Unencodable {
                index: i,
                reason: "cleartext transaction with method OTHER has no wire form".into(),
            });
        }
        let client = (txn.src_ip, txn.src_port);
        let server = (txn.dst_ip, txn.dst_port);
        let isn_c = 0x1000_0000u32.wrapping_add((i as u32).wrapping_mul(0x0001_3579));
        let isn_s = 0x7000_0000u32.wrapping_add((i as u32).wrapping_mul(0x0002_4681));
        let t0 = txn.ts_start;
        let t1 = txn.ts_end;

        frames.push(Frame {
            ts: to_duration(t0 - 0.005),
            data: build_frame(
                client,
                server,
                isn_c,
                None,
                Flags {
                    syn: true,
                    ..Flags::default()
                },
                &[],
            ),
        });
        frames.push(Frame {
            ts: to_duration(t0 - 0.004),
            data: build_frame(
                server,
                client,
                isn_s,
                Some(isn_c.wrapping_add(1)),
                Flags {
                    syn: true,
                    ..Flags::default()
                },
                &[],
            ),
        });
        frames.push(Frame {
            ts: to_duration(t0 - 0.003),
            data: build_frame(
                client,
                server,
                isn_c.wrapping_add(1),
                Some(isn_s.wrapping_add(1)),
                Flags::default(),
                &[],
            ),
        });

        let mut stream = StreamWriter {
            frames: &mut frames,
            client,
            server,
            client_seq: isn_c.wrapping_add(1),
            server_seq: isn_s.wrapping_add(1),
        };
        if txn.tls {
            stream.client_sends(t0 - 0.002, &client_hello(&txn.host));
            stream.server_sends(t0 - 0.001, &server_hello());
            stream.client_sends(t0, &opaque_records(txn.req_bytes));
            if txn.resp_bytes > 0 {
                stream.server_sends(t1, &opaque_records(txn.resp_bytes));
            }
        } else {
            stream.client_sends(t0, &wire::encode_request(txn));
            if let Some(resp) = wire::encode_response(txn) {
                stream.server_sends(t1, &resp);
            }
        }
        let (cseq, sseq) = (stream.client_seq, stream.server_seq);
        let fin = Flags {
            fin: true,
            ..Flags::default()
        };
        frames.push(Frame {
            ts: to_duration(t1 + 0.001),
            data: build_frame(client, server, cseq, Some(sseq), fin, &[]),
        });
        frames.push(Frame {
            ts: to_duration(t1 + 0.002),
            data: build_frame(server, client, sseq, Some(cseq.wrapping_add(1)), fin, &[]),
        });
        frames.push(Frame {
            ts: to_duration(t1 + 0.003),
            data: build_frame(
                client,
                server,
                cseq.wrapping_add(1),
                Some(sseq.wrapping_add(1)),
                Flags::default(),
                &[],
            ),
        });
    }
    frames.sort_by_key(|f| f.ts);

    let header = PcapHeader {
        datalink: DataLink::ETHERNET,
        endianness: Endianness::Little,
        ..PcapHeader::default()
    };
    let mut writer = PcapWriter::with_header(out, header)?;
    for frame in &frames {
        writer.write_packet(&PcapPacket::new(frame.ts, frame.data.len() as u32, &frame.data))?;
    }
    Ok(())
}
