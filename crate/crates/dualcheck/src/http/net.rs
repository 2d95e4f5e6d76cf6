use im::Vector;

use crate::itree::{ret, trigger, ITree, Void};

use super::{or, NetEvent, SymPacket};

fn conn_key(p: &SymPacket) -> (u32, u32) {
    (p.src.min(p.dst), p.src.max(p.dst))
}

/// The oldest packet of each connection, ordered by first appearance. A
/// connection is the unordered pair of endpoints.
pub fn oldest_in_each_conn(buffer: &Vector<SymPacket>) -> Vec<SymPacket> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for p in buffer {
        let k = conn_key(p);
        if !seen.contains(&k) {
            seen.push(k);
            out.push(p.clone());
        }
    }
    out
}

/// Nondeterministically picks one of `l`, or none.
pub fn pick_one(l: Vec<SymPacket>) -> ITree<NetEvent, Option<SymPacket>> {
    match l.split_first() {
        None => ret(None),
        Some((p, rest)) => or(ret(Some(p.clone())), pick_one(rest.to_vec())),
    }
}

/// The TCP network: each iteration emits the oldest packet of some
/// connection or absorbs a new packet. An empty buffer must absorb.
pub fn tcp_network(buffer: Vector<SymPacket>) -> ITree<NetEvent, Void> {
    ITree::suspend(move || {
        let buffer = buffer.clone();
        pick_one(oldest_in_each_conn(&buffer)).bind(move |pick| match pick {
            Some(p) => {
                let mut rest = buffer.clone();
                let idx = rest.index_of(&p).expect("picked packet is buffered");
                rest.remove(idx);
                trigger(NetEvent::Emit(p)).then(tcp_network(rest))
            }
            None => {
                let buffer = buffer.clone();
                trigger(NetEvent::Absorb(buffer.clone())).bind(move |r| {
                    let mut next = buffer.clone();
                    next.push_back(r.sym());
                    tcp_network(next)
                })
            }
        })
    })
}
