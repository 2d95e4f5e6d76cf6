//! The HTTP/1.1 subset on the wire, and the JSON-shaped representation of
//! packets used by the test harness.

use serde_json::{json, Value};
use thiserror::Error;

use crate::http::{Endpoint, Method, Packet, Payload, Precondition, PreconditionKind, Request, Response};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("incomplete message")]
    Incomplete,
    #[error("malformed start line: {0:?}")]
    StartLine(String),
    #[error("malformed header line: {0:?}")]
    Header(String),
    #[error("unsupported header {0:?}")]
    UnknownHeader(String),
    #[error("duplicate header {0:?}")]
    Duplicate(String),
    #[error("missing Content-Length")]
    NoLength,
    #[error("body length {got} does not match Content-Length {want}")]
    Length { want: usize, got: usize },
    #[error("body is not UTF-8")]
    Utf8,
}

pub fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        204 => "No Content",
        304 => "Not Modified",
        400 => "Bad Request",
        403 => "Forbidden",
        404 => "Not Found",
        412 => "Precondition Failed",
        500 => "Internal Server Error",
        _ => "Unknown",
    }
}

pub fn encode_request(q: &Request) -> Vec<u8> {
    let mut s = format!("{} {} HTTP/1.1\r\n", q.method.as_str(), q.target);
    if let Some(p) = &q.precondition {
        s.push_str(&format!("{}: {}\r\n", p.kind.header(), p.etag));
    }
    s.push_str(&format!("Content-Length: {}\r\n\r\n{}", q.body.len(), q.body));
    s.into_bytes()
}

pub fn encode_response(r: &Response<String>) -> Vec<u8> {
    let mut s = format!("HTTP/1.1 {} {}\r\n", r.status, reason(r.status));
    for (n, v) in &r.fields {
        s.push_str(&format!("{n}: {v}\r\n"));
    }
    s.push_str(&format!("Content-Length: {}\r\n\r\n{}", r.body.len(), r.body));
    s.into_bytes()
}

pub fn encode(p: &Packet) -> Vec<u8> {
    match &p.payload {
        Payload::Request(q) => encode_request(q),
        Payload::Response(r) => encode_response(r),
    }
}

/// Length of the first complete message in `buf`, if there is one.
pub fn frame_len(buf: &[u8]) -> Option<usize> {
    let head_end = buf.windows(4).position(|w| w == b"\r\n\r\n")? + 4;
    let head = std::str::from_utf8(&buf[..head_end]).ok()?;
    let len = head
        .split("\r\n")
        .filter_map(|l| l.split_once(':'))
        .find(|(n, _)| n.trim().eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    (buf.len() >= head_end + len).then_some(head_end + len)
}

struct Parsed<'a> {
    start: &'a str,
    headers: Vec<(String, String)>,
    body: String,
}

fn parse<'a>(bytes: &'a [u8], allowed: &[&str]) -> Result<Parsed<'a>, WireError> {
    let head_end = bytes.windows(4).position(|w| w == b"\r\n\r\n").ok_or(WireError::Incomplete)?;
    let head = std::str::from_utf8(&bytes[..head_end]).map_err(|_| WireError::Utf8)?;
    let mut lines = head.split("\r\n");
    let start = lines.next().unwrap_or_default();
    let mut headers: Vec<(String, String)> = Vec::new();
    let mut length = None;
    for line in lines {
        let (name, value) = line.split_once(':').ok_or_else(|| WireError::Header(line.to_string()))?;
        let name = name.trim();
        let value = value.trim().to_string();
        if name.eq_ignore_ascii_case("content-length") {
            if length.is_some() {
                return Err(WireError::Duplicate(name.to_string()));
            }
            length = Some(value.parse::<usize>().map_err(|_| WireError::Header(line.to_string()))?);
            continue;
        }
        let canonical = allowed
            .iter()
            .find(|a| a.eq_ignore_ascii_case(name))
            .ok_or_else(|| WireError::UnknownHeader(name.to_string()))?;
        if headers.iter().any(|(n, _)| n == canonical) {
            return Err(WireError::Duplicate(name.to_string()));
        }
        headers.push((canonical.to_string(), value));
    }
    let want = length.ok_or(WireError::NoLength)?;
    let body = &bytes[head_end + 4..];
    if body.len() != want {
        return Err(WireError::Length { want, got: body.len() });
    }
    let body = String::from_utf8(body.to_vec()).map_err(|_| WireError::Utf8)?;
    Ok(Parsed { start, headers, body })
}

pub fn decode_request(bytes: &[u8]) -> Result<Request, WireError> {
    let p = parse(bytes, &["If-Match", "If-None-Match"])?;
    let bad = || WireError::StartLine(p.start.to_string());
    let mut parts = p.start.split(' ');
    let method = match parts.next() {
        Some("GET") => Method::Get,
        Some("PUT") => Method::Put,
        _ => return Err(bad()),
    };
    let target = parts.next().filter(|t| t.starts_with('/')).ok_or_else(bad)?;
    if parts.next() != Some("HTTP/1.1") || parts.next().is_some() {
        return Err(bad());
    }
    if p.headers.len() > 1 {
        return Err(WireError::Duplicate("precondition".to_string()));
    }
    let precondition = p.headers.first().map(|(n, v)| Precondition {
        kind: if n == "If-Match" {
            PreconditionKind::IfMatch
        } else {
            PreconditionKind::IfNoneMatch
        },
        etag: v.clone(),
    });
    Ok(Request {
        method,
        target: target.to_string(),
        precondition,
        body: p.body,
    })
}

pub fn decode_response(bytes: &[u8]) -> Result<Response<String>, WireError> {
    let p = parse(bytes, &["ETag"])?;
    let bad = || WireError::StartLine(p.start.to_string());
    let rest = p.start.strip_prefix("HTTP/1.1 ").ok_or_else(bad)?;
    let code = rest.split(' ').next().unwrap_or_default();
    if code.len() != 3 {
        return Err(bad());
    }
    let status = code.parse::<u16>().map_err(|_| bad())?;
    Ok(Response {
        status,
        fields: p.headers,
        body: p.body,
    })
}

/// Decodes a message travelling from `src` to `dst`.
pub fn decode(src: Endpoint, dst: Endpoint, bytes: &[u8]) -> Result<Packet, WireError> {
    let payload = if bytes.starts_with(b"HTTP/") {
        Payload::Response(decode_response(bytes)?)
    } else {
        Payload::Request(decode_request(bytes)?)
    };
    Ok(Packet { src, dst, payload })
}

pub fn packet_to_ir(p: &Packet) -> Value {
    match &p.payload {
        Payload::Request(q) => json!({
            "src": p.src,
            "method": q.method.as_str(),
            "target": q.target,
            "precondition": q.precondition.as_ref().map(|c| json!({"kind": c.kind.header(), "etag": c.etag})),
            "body": q.body,
        }),
        Payload::Response(r) => {
            let fields: serde_json::Map<String, Value> =
                r.fields.iter().map(|(n, v)| (n.clone(), Value::String(v.clone()))).collect();
            json!({"dst": p.dst, "status": r.status, "fields": fields, "body": r.body})
        }
    }
}

/// Reads a request IR. A precondition whose ETag is not a string is dropped.
pub fn ir_to_request(j: &Value) -> Option<Packet> {
    let src = j.get("src")?.as_u64()? as Endpoint;
    let method = match j.get("method")?.as_str()? {
        "GET" => Method::Get,
        "PUT" => Method::Put,
        _ => return None,
    };
    let target = j.get("target")?.as_str()?.to_string();
    let precondition = j.get("precondition").and_then(|c| {
        let kind = match c.get("kind")?.as_str()? {
            "If-Match" => PreconditionKind::IfMatch,
            "If-None-Match" => PreconditionKind::IfNoneMatch,
            _ => return None,
        };
        let etag = c.get("etag")?.as_str()?.to_string();
        Some(Precondition { kind, etag })
    });
    let body = j.get("body").and_then(Value::as_str).unwrap_or_default().to_string();
    Some(Packet::request(
        src,
        Request {
            method,
            target,
            precondition,
            body,
        },
    ))
}
