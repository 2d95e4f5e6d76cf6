use crate::itree::{trigger, ITree, Void};

use super::{
    or, ETagExp, Method, Mode, Packet, Payload, PreconditionKind, Request, Resource, Response, Sigma,
    SymEvent, SymPacket, SERVER,
};

type Tree = ITree<SymEvent, Void>;

/// The symbolic HTTP server: receives a request, branches on preconditions
/// with `Decide`, and answers with symbolic responses. A successful PUT gives
/// the resource either a fresh ETag (`Choice`) or none.
pub fn server_http(state: Sigma) -> Tree {
    ITree::suspend(move || {
        let st = state.clone();
        trigger(SymEvent::Recv(state.clone(), im::Vector::new())).bind(move |r| {
            let pq = r.sym();
            match &pq.payload {
                Payload::Request(q) => handle(&st, pq.src, q.clone()),
                Payload::Response(_) => server_http(st.clone()),
            }
        })
    })
}

fn respond(dst: u32, resp: Response<ETagExp>, next: Tree) -> Tree {
    let pkt: SymPacket = Packet {
        src: SERVER,
        dst,
        payload: Payload::Response(resp),
    };
    trigger(SymEvent::Send(pkt)).then(next)
}

fn status(dst: u32, code: u16, state: &Sigma) -> Tree {
    respond(dst, Response::new(code), server_http(state.clone()))
}

fn ok(dst: u32, r: &Resource, state: &Sigma) -> Tree {
    let mut resp = Response::new(200);
    resp.body = r.content.clone();
    if !r.etag.is_empty_const() {
        resp.fields.push(("ETag".to_string(), r.etag.clone()));
    }
    respond(dst, resp, server_http(state.clone()))
}

fn decide(t: &str, tx: &ETagExp, mode: Mode, yes: Tree, no: Tree) -> Tree {
    let cond = ETagExp::Compare(t.to_string(), Box::new(tx.clone()), mode);
    trigger(SymEvent::Decide(cond)).bind(move |b| if b.bool() { yes.clone() } else { no.clone() })
}

/// Stores the body under a new ETag (a fresh choice, or none) and answers 204.
fn update(dst: u32, path: String, body: String, state: Sigma) -> Tree {
    let choice = trigger(SymEvent::Choice).map(|r| r.exp());
    or(choice, crate::itree::ret(ETagExp::empty())).bind(move |etag| {
        let next = state.set(
            &path,
            Resource {
                content: body.clone(),
                etag,
            },
        );
        respond(dst, Response::new(204), server_http(next))
    })
}

fn handle(state: &Sigma, src: u32, q: Request) -> Tree {
    let pre = q.precondition.clone();
    match (q.method, state.get(&q.target)) {
        (Method::Get, None) => status(src, 404, state),
        (Method::Get, Some(r)) => match pre {
            None => ok(src, r, state),
            Some(p) => match p.kind {
                PreconditionKind::IfNoneMatch => {
                    decide(&p.etag, &r.etag, Mode::Weak, status(src, 304, state), ok(src, r, state))
                }
                PreconditionKind::IfMatch => {
                    decide(&p.etag, &r.etag, Mode::Strong, ok(src, r, state), status(src, 412, state))
                }
            },
        },
        (Method::Put, None) => match pre.map(|p| p.kind) {
            Some(PreconditionKind::IfMatch) => status(src, 412, state),
            _ => update(src, q.target, q.body, state.clone()),
        },
        (Method::Put, Some(r)) => {
            let upd = update(src, q.target.clone(), q.body.clone(), state.clone());
            match pre {
                None => upd,
                Some(p) => match p.kind {
                    PreconditionKind::IfMatch => decide(&p.etag, &r.etag, Mode::Strong, upd, status(src, 412, state)),
                    PreconditionKind::IfNoneMatch => {
                        decide(&p.etag, &r.etag, Mode::Weak, status(src, 412, state), upd)
                    }
                },
            }
        }
    }
}
