//! Symbolic model of HTTP/1.1 GET/PUT with entity-tag preconditions, the TCP
//! network model, and server/network composition.

mod compose;
mod model;
mod net;

pub use compose::compose;
pub use model::server_http;
pub use net::{oldest_in_each_conn, pick_one, tcp_network};

use std::fmt;

use im::Vector;

use crate::itree::{trigger, Effect, ITree};
use crate::symbolic::Var;

pub type Endpoint = u32;

/// The server's endpoint.
pub const SERVER: Endpoint = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Put,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Put => "PUT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionKind {
    IfMatch,
    IfNoneMatch,
}

impl PreconditionKind {
    pub fn header(self) -> &'static str {
        match self {
            PreconditionKind::IfMatch => "If-Match",
            PreconditionKind::IfNoneMatch => "If-None-Match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Precondition {
    pub kind: PreconditionKind,
    pub etag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Request {
    pub method: Method,
    pub target: String,
    pub precondition: Option<Precondition>,
    pub body: String,
}

impl Request {
    pub fn get(target: &str) -> Self {
        Request {
            method: Method::Get,
            target: target.to_string(),
            precondition: None,
            body: String::new(),
        }
    }

    pub fn put(target: &str, body: &str) -> Self {
        Request {
            method: Method::Put,
            target: target.to_string(),
            precondition: None,
            body: body.to_string(),
        }
    }

    pub fn with(mut self, kind: PreconditionKind, etag: &str) -> Self {
        self.precondition = Some(Precondition {
            kind,
            etag: etag.to_string(),
        });
        self
    }
}

/// A response whose header values have type `V`: literal strings for
/// observed responses, [`ETagExp`] for the model's responses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Response<V> {
    pub status: u16,
    pub fields: Vec<(String, V)>,
    pub body: String,
}

impl<V> Response<V> {
    pub fn new(status: u16) -> Self {
        Response {
            status,
            fields: Vec::new(),
            body: String::new(),
        }
    }

    pub fn field(&self, name: &str) -> Option<&V> {
        self.fields.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Payload<V> {
    Request(Request),
    Response(Response<V>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Packet<V = String> {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub payload: Payload<V>,
}

pub type SymPacket = Packet<ETagExp>;

impl Packet {
    pub fn request(src: Endpoint, req: Request) -> Self {
        Packet {
            src,
            dst: SERVER,
            payload: Payload::Request(req),
        }
    }

    pub fn response(dst: Endpoint, resp: Response<String>) -> Self {
        Packet {
            src: SERVER,
            dst,
            payload: Payload::Response(resp),
        }
    }

    /// Lifts an observed packet into the model's packet type.
    pub fn lift(&self) -> SymPacket {
        Packet {
            src: self.src,
            dst: self.dst,
            payload: match &self.payload {
                Payload::Request(r) => Payload::Request(r.clone()),
                Payload::Response(r) => Payload::Response(Response {
                    status: r.status,
                    fields: r.fields.iter().map(|(n, v)| (n.clone(), ETagExp::Const(v.clone()))).collect(),
                    body: r.body.clone(),
                }),
            },
        }
    }
}

impl<V> Packet<V> {
    pub fn as_request(&self) -> Option<&Request> {
        match &self.payload {
            Payload::Request(r) => Some(r),
            Payload::Response(_) => None,
        }
    }

    pub fn as_response(&self) -> Option<&Response<V>> {
        match &self.payload {
            Payload::Response(r) => Some(r),
            Payload::Request(_) => None,
        }
    }
}

impl<V: fmt::Display> fmt::Display for Packet<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Payload::Request(q) => {
                write!(f, "{}> {} {}", self.src, q.method.as_str(), q.target)?;
                if let Some(p) = &q.precondition {
                    write!(f, " [{}: {}]", p.kind.header(), p.etag)?;
                }
                if q.method == Method::Put {
                    write!(f, " {:?}", q.body)?;
                }
                Ok(())
            }
            Payload::Response(r) => {
                write!(f, "{}< {}", self.dst, r.status)?;
                for (n, v) in &r.fields {
                    write!(f, " [{n}: {v}]")?;
                }
                if !r.body.is_empty() {
                    write!(f, " {:?}", r.body)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Strong,
    Weak,
}

/// ETag-valued expressions; `Compare` is boolean-valued.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ETagExp {
    Const(String),
    Var(Var),
    Compare(String, Box<ETagExp>, Mode),
}

impl ETagExp {
    pub fn empty() -> Self {
        ETagExp::Const(String::new())
    }

    pub fn is_empty_const(&self) -> bool {
        matches!(self, ETagExp::Const(s) if s.is_empty())
    }
}

impl fmt::Display for ETagExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ETagExp::Const(s) if s.is_empty() => write!(f, "<none>"),
            ETagExp::Const(s) => write!(f, "{s}"),
            ETagExp::Var(x) => write!(f, "{x}"),
            ETagExp::Compare(t, e, Mode::Strong) => write!(f, "{t} =strong= {e}"),
            ETagExp::Compare(t, e, Mode::Weak) => write!(f, "{t} =weak= {e}"),
        }
    }
}

/// Splits a wire-form ETag into (weak, opaque-tag).
pub fn parse_etag(s: &str) -> (bool, &str) {
    match s.strip_prefix("W/") {
        Some(rest) => (true, rest),
        None => (false, s),
    }
}

/// Entity-tag comparison. Strong comparison requires both tags to be strong
/// with equal opaque parts; weak comparison ignores the `W/` prefix. The
/// empty tag ("no ETag") matches nothing.
pub fn etag_match(lit: &str, other: &str, mode: Mode) -> bool {
    if lit.is_empty() || other.is_empty() {
        return false;
    }
    let (lw, lo) = parse_etag(lit);
    let (ow, oo) = parse_etag(other);
    match mode {
        Mode::Strong => !lw && !ow && lo == oo,
        Mode::Weak => lo == oo,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub content: String,
    pub etag: ETagExp,
}

/// Server state: an association list from paths to resources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sigma(pub Vec<(String, Resource)>);

impl Sigma {
    pub fn get(&self, path: &str) -> Option<&Resource> {
        self.0.iter().find(|(p, _)| p == path).map(|(_, r)| r)
    }

    pub fn set(&self, path: &str, r: Resource) -> Sigma {
        let mut out = self.0.clone();
        match out.iter_mut().find(|(p, _)| p == path) {
            Some(slot) => slot.1 = r,
            None => out.push((path.to_string(), r)),
        }
        Sigma(out)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(p, _)| p.as_str())
    }
}

/// Answers shared by every event family of the HTTP pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Unit,
    Bool(bool),
    Packet(Packet),
    Sym(SymPacket),
    MaybePacket(Option<Packet>),
    Exp(ETagExp),
}

impl Reply {
    pub fn bool(&self) -> bool {
        match self {
            Reply::Bool(b) => *b,
            other => panic!("expected a boolean answer, got {other:?}"),
        }
    }

    pub fn packet(&self) -> Packet {
        match self {
            Reply::Packet(p) => p.clone(),
            other => panic!("expected a packet answer, got {other:?}"),
        }
    }

    pub fn sym(&self) -> SymPacket {
        match self {
            Reply::Sym(p) => p.clone(),
            other => panic!("expected a symbolic packet answer, got {other:?}"),
        }
    }

    pub fn maybe_packet(&self) -> Option<Packet> {
        match self {
            Reply::MaybePacket(p) => p.clone(),
            other => panic!("expected an optional packet answer, got {other:?}"),
        }
    }

    pub fn exp(&self) -> ETagExp {
        match self {
            Reply::Exp(e) => e.clone(),
            other => panic!("expected an expression answer, got {other:?}"),
        }
    }
}

/// Events of the symbolic server model and of the composed model.
#[derive(Debug, Clone, PartialEq)]
pub enum SymEvent {
    /// Receive a request; carries the server state for generators and, once
    /// composed with a network, the packets in flight.
    Recv(Sigma, Vector<SymPacket>),
    Send(SymPacket),
    Choice,
    Or,
    Decide(ETagExp),
}

/// Events of the network model. `Absorb` carries the buffered packets and
/// answers with the absorbed one.
#[derive(Debug, Clone, PartialEq)]
pub enum NetEvent {
    Absorb(Vector<SymPacket>),
    Emit(SymPacket),
    Or,
}

/// Events of the symbolic observer.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsEvent {
    FromObserver(Sigma, Vector<SymPacket>),
    ToObserver,
    Or,
    Choice,
    Guard(SymPacket, Packet),
    Unify(ETagExp, bool),
}

/// Events of the nondeterministic tester.
#[derive(Debug, Clone, PartialEq)]
pub enum NtEvent {
    /// The second field identifies the tester's whole state at this point:
    /// equal keys at the same point of the history have equal futures.
    FromObserver(Sigma, String),
    ToObserver,
    Or,
    Throw(String),
}

/// Events of the deterministic tester.
#[derive(Debug, Clone, PartialEq)]
pub enum TestEvent {
    ClientSend(Packet),
    ClientRecv,
    GenPacket(Sigma),
    GenBool,
    Throw(String),
}

macro_rules! reply_effect {
    ($($t:ty),*) => { $(impl Effect for $t { type Answer = Reply; })* };
}
reply_effect!(SymEvent, NetEvent, ObsEvent, NtEvent, TestEvent);

/// Families with a binary nondeterministic choice.
pub trait Nondet: Effect<Answer = Reply> {
    fn or_event() -> Self;
}

impl Nondet for SymEvent {
    fn or_event() -> Self {
        SymEvent::Or
    }
}
impl Nondet for NetEvent {
    fn or_event() -> Self {
        NetEvent::Or
    }
}
impl Nondet for ObsEvent {
    fn or_event() -> Self {
        ObsEvent::Or
    }
}
impl Nondet for NtEvent {
    fn or_event() -> Self {
        NtEvent::Or
    }
}

/// Behaves as `x` or as `y`.
pub fn or<E: Nondet, R: Clone + Send + Sync + 'static>(x: ITree<E, R>, y: ITree<E, R>) -> ITree<E, R> {
    trigger(E::or_event()).bind(move |b| if b.bool() { x.clone() } else { y.clone() })
}

/// A tree that signals failure; its continuation is never used.
pub fn throw<E: Effect<Answer = Reply>, R: Clone + Send + Sync + 'static>(e: E) -> ITree<E, R> {
    ITree::impure(e, |_| panic!("resumed after an exception"))
}
