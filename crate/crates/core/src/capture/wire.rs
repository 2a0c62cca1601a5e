//! HTTP/1.1 message encoding and incremental parsing over reassembled
//! stream bytes.

use super::{HeaderList, HttpTransaction, Method};

const MAX_HEADERS: usize = 96;

pub fn reason_phrase(status: u16) -> &'static str {
    http::StatusCode::from_u16(status)
        .ok()
        .and_then(|s| s.canonical_reason())
        .unwrap_or("Unknown")
}

fn push_headers(out: &mut Vec<u8>, headers: &HeaderList) {
    for (name, value) in headers.iter() {
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(b": ");
        out.extend_from_slice(value.as_bytes());
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(b"\r\n");
}

/// Request line, headers verbatim, blank line, body.
pub fn encode_request(txn: &HttpTransaction) -> Vec<u8> {
    let path = if txn.path.is_empty() { "/" } else { &txn.path };
    let mut out = Vec::with_capacity(128 + txn.req_body.len());
    out.extend_from_slice(format!("{} {} HTTP/1.1\r\n", txn.method, path).as_bytes());
    push_headers(&mut out, &txn.req_headers);
    out.extend_from_slice(&txn.req_body);
    out
}

/// `None` when the transaction has no response.
pub fn encode_response(txn: &HttpTransaction) -> Option<Vec<u8>> {
    if !txn.has_response() {
        return None;
    }
    let mut out = Vec::with_capacity(128 + txn.resp_body.len());
    out.extend_from_slice(format!("HTTP/1.1 {} {}\r\n", txn.status, reason_phrase(txn.status)).as_bytes());
    push_headers(&mut out, &txn.resp_headers);
    out.extend_from_slice(&txn.resp_body);
    Some(out)
}

#[derive(Debug)]
pub(crate) enum Parse<T> {
    Done(T),
    Incomplete,
    Invalid(String),
}

#[derive(Debug)]
pub(crate) struct ParsedRequest {
    pub method: Method,
    pub is_head: bool,
    pub path: String,
    pub headers: HeaderList,
    pub body: Vec<u8>,
    pub len: usize,
}

#[derive(Debug)]
pub(crate) struct ParsedResponse {
    pub status: u16,
    pub headers: HeaderList,
    pub body: Vec<u8>,
    pub len: usize,
}

fn collect_headers(raw: &[httparse::Header<'_>]) -> HeaderList {
    HeaderList::from_pairs(
        raw.iter()
            .map(|h| (h.name.to_string(), String::from_utf8_lossy(h.value).into_owned())),
    )
}

enum BodyFraming {
    None,
    Length(usize),
    Chunked,
    UntilClose,
}

fn framing(headers: &HeaderList, default: BodyFraming) -> Result<BodyFraming, String> {
    if let Some(te) = headers.get("transfer-encoding") {
        if te.to_ascii_lowercase().contains("chunked") {
            return Ok(BodyFraming::Chunked);
        }
    }
    match headers.get("content-length") {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map(BodyFraming::Length)
            .map_err(|_| format!("bad content-length `{v}`")),
        None => Ok(default),
    }
}

/// Decodes a chunked body starting at `buf[0]`; returns the body and the
/// number of bytes consumed including the trailer section.
fn decode_chunked(buf: &[u8]) -> Parse<(Vec<u8>, usize)> {
    let mut pos = 0;
    let mut body = Vec::new();
    loop {
        let Some(eol) = find_crlf(&buf[pos..]) else {
            return Parse::Incomplete;
        };
        let line = String::from_utf8_lossy(&buf[pos..pos + eol]);
        let size_text = line.split(';').next().unwrap_or("").trim();
        let Ok(size) = usize::from_str_radix(size_text, 16) else {
            return Parse::Invalid(format!("bad chunk size `{size_text}`"));
        };
        pos += eol + 2;
        if size == 0 {
            // trailer lines up to an empty line
            loop {
                let Some(eol) = find_crlf(&buf[pos..]) else {
                    return Parse::Incomplete;
                };
                pos += eol + 2;
                if eol == 0 {
                    return Parse::Done((body, pos));
                }
            }
        }
        if buf.len() < pos + size + 2 {
            return Parse::Incomplete;
        }
        body.extend_from_slice(&buf[pos..pos + size]);
        pos += size;
        if &buf[pos..pos + 2] != b"\r\n" {
            return Parse::Invalid("chunk not terminated by CRLF".into());
        }
        pos += 2;
    }
}

fn find_crlf(buf: &[u8]) -> Option<usize> {
    buf.windows(2).position(|w| w == b"\r\n")
}

fn read_body(buf: &[u8], head_len: usize, framing: BodyFraming, at_eof: bool) -> Parse<(Vec<u8>, usize)> {
    let rest = &buf[head_len..];
    match framing {
        BodyFraming::None => Parse::Done((Vec::new(), head_len)),
        BodyFraming::Length(n) => {
            if rest.len() < n {
                Parse::Incomplete
            } else {
                Parse::Done((rest[..n].to_vec(), head_len + n))
            }
        }
        BodyFraming::Chunked => match decode_chunked(rest) {
            Parse::Done((body, used)) => Parse::Done((body, head_len + used)),
            Parse::Incomplete => Parse::Incomplete,
            Parse::Invalid(e) => Parse::Invalid(e),
        },
        BodyFraming::UntilClose => {
            if at_eof {
                Parse::Done((rest.to_vec(), buf.len()))
            } else {
                Parse::Incomplete
            }
        }
    }
}

pub(crate) fn parse_request(buf: &[u8]) -> Parse<ParsedRequest> {
    let mut raw = [httparse::EMPTY_HEADER; MAX_HEADERS];
    let mut req = httparse::Request::new(&mut raw);
    let head_len = match req.parse(buf) {
        Ok(httparse::Status::Complete(n)) => n,
        Ok(httparse::Status::Partial) => return Parse::Incomplete,
        Err(e) => return Parse::Invalid(e.to_string()),
    };
    let token = req.method.unwrap_or_default();
    let path = req.path.unwrap_or_default().to_string();
    let headers = collect_headers(req.headers);
    let framing = match framing(&headers, BodyFraming::None) {
        Ok(f) => f,
        Err(e) => return Parse::Invalid(e),
    };
    match read_body(buf, head_len, framing, false) {
        Parse::Done((body, len)) => Parse::Done(ParsedRequest {
            method: Method::from_token(token),
            is_head: token == "HEAD",
            path,
            headers,
            body,
            len,
        }),
        Parse::Incomplete => Parse::Incomplete,
        Parse::Invalid(e) => Parse::Invalid(e),
    }
}

/// Parses one final response; interim `1xx` responses are consumed and
/// counted in `len`.
pub(crate) fn parse_response(buf: &[u8], bodyless: bool, at_eof: bool) -> Parse<ParsedResponse> {
    let mut offset = 0;
    loop {
        let slice = &buf[offset..];
        let mut raw = [httparse::EMPTY_HEADER; MAX_HEADERS];
        let mut resp = httparse::Response::new(&mut raw);
        let head_len = match resp.parse(slice) {
            Ok(httparse::Status::Complete(n)) => n,
            Ok(httparse::Status::Partial) => return Parse::Incomplete,
            Err(e) => return Parse::Invalid(e.to_string()),
        };
        let status = resp.code.unwrap_or(0);
        let headers = collect_headers(resp.headers);
        if (100..200).contains(&status) {
            offset += head_len;
            continue;
        }
        let framing = if bodyless || status == 204 || status == 304 {
            BodyFraming::None
        } else {
            match framing(&headers, BodyFraming::UntilClose) {
                Ok(f) => f,
                Err(e) => return Parse::Invalid(e),
            }
        };
        return match read_body(slice, head_len, framing, at_eof) {
            Parse::Done((body, len)) => Parse::Done(ParsedResponse {
                status,
                headers,
                body,
                len: offset + len,
            }),
            Parse::Incomplete => Parse::Incomplete,
            Parse::Invalid(e) => Parse::Invalid(e),
        };
    }
}
