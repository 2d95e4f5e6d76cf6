use im::Vector;

use crate::itree::{ITree, Step, Void};

use super::{NetEvent, Reply, SymEvent, SymPacket, SERVER};

type Tree = ITree<SymEvent, Void>;

/// Connects a server model to a network model through an incoming buffer
/// `bi` and an outgoing buffer `bo`. The server runs first; the network is
/// stepped only when the server waits for a request that has not arrived.
/// The result is the model as observed from the clients' side of the network:
/// its `Recv` absorbs a client packet and its `Send` delivers one to a client.
pub fn compose(
    srv: Tree,
    net: ITree<NetEvent, Void>,
    bi: Vector<SymPacket>,
    bo: Vector<SymPacket>,
) -> Tree {
    ITree::suspend(move || run(srv.clone(), net.clone(), bi.clone(), bo.clone()))
}

fn run(mut srv: Tree, mut net: ITree<NetEvent, Void>, mut bi: Vector<SymPacket>, mut bo: Vector<SymPacket>) -> Tree {
    loop {
        match srv.step() {
            Step::Pure(v) => match v {},
            Step::Impure(SymEvent::Send(p), k) => {
                bo.push_back(p);
                srv = k(Reply::Unit);
            }
            Step::Impure(SymEvent::Recv(sigma, _), k) => {
                if let Some(p) = bi.pop_front() {
                    srv = k(Reply::Sym(p));
                    continue;
                }
                let waiting: Tree = ITree::impure_arc(SymEvent::Recv(sigma.clone(), Vector::new()), k);
                match net.step() {
                    Step::Pure(v) => match v {},
                    Step::Impure(NetEvent::Absorb(buffer), kn) => {
                        if let Some(p) = bo.pop_front() {
                            net = kn(Reply::Sym(p));
                            srv = waiting;
                            continue;
                        }
                        return ITree::impure(SymEvent::Recv(sigma, buffer), move |r| {
                            compose(waiting.clone(), kn(r), bi.clone(), bo.clone())
                        });
                    }
                    Step::Impure(NetEvent::Emit(p), kn) => {
                        if p.dst == SERVER {
                            bi.push_back(p);
                            net = kn(Reply::Unit);
                            srv = waiting;
                            continue;
                        }
                        return ITree::impure(SymEvent::Send(p), move |_| {
                            compose(waiting.clone(), kn(Reply::Unit), bi.clone(), bo.clone())
                        });
                    }
                    Step::Impure(NetEvent::Or, kn) => {
                        return ITree::impure(SymEvent::Or, move |b| {
                            compose(waiting.clone(), kn(b), bi.clone(), bo.clone())
                        });
                    }
                }
            }
            Step::Impure(e, k) => {
                return ITree::impure(e, move |r| compose(k(r), net.clone(), bi.clone(), bo.clone()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{server_http, tcp_network, ETagExp, Packet, Request, Resource, Sigma};
    use crate::itree::trigger;

    fn composed(sigma: Sigma) -> Tree {
        compose(server_http(sigma), tcp_network(Vector::new()), Vector::new(), Vector::new())
    }

    #[test]
    fn lazy_network_when_server_waits() {
        // the server waits for a request and the network has nothing buffered,
        // so the composed model absorbs from a client
        match composed(Sigma::default()).step() {
            Step::Impure(SymEvent::Recv(..), _) => {}
            _ => panic!("expected an external absorb"),
        }
    }

    #[test]
    fn request_reaches_client_as_response() {
        let sigma = Sigma::default().set(
            "/k",
            Resource {
                content: "v".into(),
                etag: ETagExp::empty(),
            },
        );
        let mut t = composed(sigma);
        let mut seen = Vec::new();
        // answer Or with true (emit the oldest packet) until something is sent
        for _ in 0..6 {
            match t.step() {
                Step::Pure(v) => match v {},
                Step::Impure(SymEvent::Recv(..), k) => {
                    seen.push("recv");
                    t = k(Reply::Sym(Packet::request(1, Request::get("/k")).lift()));
                }
                Step::Impure(SymEvent::Or, k) => {
                    seen.push("or");
                    t = k(Reply::Bool(true));
                }
                Step::Impure(SymEvent::Send(p), _) => {
                    assert_eq!(p.dst, 1);
                    assert_eq!(p.as_response().unwrap().status, 200);
                    seen.push("send");
                    break;
                }
                Step::Impure(e, _) => panic!("unexpected {e:?}"),
            }
        }
        assert_eq!(seen, vec!["recv", "or", "or", "send"]);
    }

    #[test]
    fn server_bound_packets_stay_inside() {
        // a network that emits a server-bound packet and then stops at Or
        let pkt = Packet::request(1, Request::get("/x")).lift();
        let net: ITree<NetEvent, Void> = trigger(NetEvent::Emit(pkt)).then(ITree::suspend(|| {
            trigger(NetEvent::Or).bind(|_| tcp_network(Vector::new()))
        }));
        let t = compose(server_http(Sigma::default()), net, Vector::new(), Vector::new());
        // the emitted request goes to the server, whose 404 goes to bo; the
        // next visible event is the network's Or
        match t.step() {
            Step::Impure(SymEvent::Or, _) => {}
            Step::Impure(e, _) => panic!("unexpected {e:?}"),
            Step::Pure(v) => match v {},
        }
    }

    #[test]
    fn server_events_pass_through() {
        let srv: Tree = trigger(SymEvent::Choice).then(server_http(Sigma::default()));
        let t = compose(srv, tcp_network(Vector::new()), Vector::new(), Vector::new());
        assert!(matches!(t.step(), Step::Impure(SymEvent::Choice, _)));
    }
}
