//! An in-tree reference server for the HTTP subset, and mutants of it that
//! each break one rule.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::http::{etag_match, Method, Mode, PreconditionKind, Request, Response};
use crate::wire;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutant {
    /// If-None-Match uses strong comparison.
    StrongInm,
    /// GET on a missing resource answers 403.
    Skip404,
    /// PUT ignores preconditions.
    SkipPrecond,
    /// PUT stores under a different path but still answers 204.
    WrongTarget,
}

impl Mutant {
    pub const ALL: [Mutant; 4] = [Mutant::StrongInm, Mutant::Skip404, Mutant::SkipPrecond, Mutant::WrongTarget];

    pub fn id(self) -> &'static str {
        match self {
            Mutant::StrongInm => "M1_strong_inm",
            Mutant::Skip404 => "M2_skip_404",
            Mutant::SkipPrecond => "M3_skip_precond",
            Mutant::WrongTarget => "M4_wrong_target",
        }
    }
}

impl fmt::Display for Mutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Mutant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutant::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s) || m.id()[..2].eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mutant {s:?}"))
    }
}

#[derive(Debug, Clone)]
struct Stored {
    content: String,
    etag: String,
}

#[derive(Debug, Clone)]
pub struct ReferenceServer {
    mutant: Option<Mutant>,
    store: BTreeMap<String, Stored>,
    counter: u64,
    rng: ChaCha8Rng,
}

impl ReferenceServer {
    pub fn new(mutant: Option<Mutant>, seed: u64) -> Self {
        ReferenceServer {
            mutant,
            store: BTreeMap::new(),
            counter: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn is(&self, m: Mutant) -> bool {
        self.mutant == Some(m)
    }

    fn inm_mode(&self) -> Mode {
        if self.is(Mutant::StrongInm) {
            Mode::Strong
        } else {
            Mode::Weak
        }
    }

    fn fresh_etag(&mut self) -> String {
        self.counter += 1;
        let weak = if self.rng.gen_bool(0.5) { "W/" } else { "" };
        format!("{weak}\"tag-{}\"", self.counter)
    }

    pub fn handle(&mut self, q: &Request) -> Response<String> {
        match q.method {
            Method::Get => self.get(q),
            Method::Put => self.put(q),
        }
    }

    fn get(&self, q: &Request) -> Response<String> {
        let Some(r) = self.store.get(&q.target) else {
            return Response::new(if self.is(Mutant::Skip404) { 403 } else { 404 });
        };
        match &q.precondition {
            Some(p) if p.kind == PreconditionKind::IfNoneMatch && etag_match(&p.etag, &r.etag, self.inm_mode()) => {
                return Response::new(304);
            }
            Some(p) if p.kind == PreconditionKind::IfMatch && !etag_match(&p.etag, &r.etag, Mode::Strong) => {
                return Response::new(412);
            }
            _ => {}
        }
        let mut resp = Response::new(200);
        resp.fields.push(("ETag".to_string(), r.etag.clone()));
        resp.body = r.content.clone();
        resp
    }

    fn put(&mut self, q: &Request) -> Response<String> {
        let current = self.store.get(&q.target);
        if let (Some(p), false) = (&q.precondition, self.is(Mutant::SkipPrecond)) {
            let pass = match (p.kind, current) {
                (PreconditionKind::IfMatch, None) => false,
                (PreconditionKind::IfMatch, Some(r)) => etag_match(&p.etag, &r.etag, Mode::Strong),
                (PreconditionKind::IfNoneMatch, None) => true,
                (PreconditionKind::IfNoneMatch, Some(r)) => !etag_match(&p.etag, &r.etag, self.inm_mode()),
            };
            if !pass {
                return Response::new(412);
            }
        }
        let target = if self.is(Mutant::WrongTarget) {
            format!("{}_", q.target)
        } else {
            q.target.clone()
        };
        let etag = self.fresh_etag();
        self.store.insert(
            target,
            Stored {
                content: q.body.clone(),
                etag,
            },
        );
        Response::new(204)
    }

    /// Answers one wire message; undecodable requests get 400.
    pub fn handle_bytes(&mut self, bytes: &[u8]) -> Vec<u8> {
        let resp = match wire::decode_request(bytes) {
            Ok(q) => self.handle(&q),
            Err(_) => Response::new(400),
        };
        wire::encode_response(&resp)
    }
}

/// Serves the reference server over TCP, one thread per connection, until
/// the listener fails.
pub fn serve(listener: TcpListener, mutant: Option<Mutant>, seed: u64) -> std::io::Result<()> {
    let server = Arc::new(Mutex::new(ReferenceServer::new(mutant, seed)));
    for stream in listener.incoming() {
        let stream = stream?;
        let server = server.clone();
        thread::spawn(move || {
            let _ = connection(stream, &server);
        });
    }
    Ok(())
}

fn connection(mut stream: TcpStream, server: &Mutex<ReferenceServer>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    loop {
        while let Some(n) = wire::frame_len(&buf) {
            let msg: Vec<u8> = buf.drain(..n).collect();
            let out = server.lock().expect("server lock").handle_bytes(&msg);
            stream.write_all(&out)?;
        }
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
    }
}
