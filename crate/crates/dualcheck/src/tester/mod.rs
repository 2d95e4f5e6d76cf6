//! From the composed HTTP model to an executable tester: dualization into a
//! symbolic observer, constraint resolution, backtracking over the remaining
//! nondeterminism, and fuel-bounded execution.

mod backtrack;
mod execute;
mod unify;

pub use backtrack::{backtrack, expect, explain, match_observe, Observation};
pub use execute::{execute, Direction, Inputs, Outcome, TraceEntry, Verdict};
pub use unify::{unify, EtagConstraintState, EtagFact, VarKnowledge};

use std::sync::Arc;

use im::Vector;

use crate::http::{compose, or, server_http, tcp_network, ObsEvent, Reply, Sigma, SymEvent};
use crate::itree::{interp, interp_state, trigger, ITree, Void};

pub type NtTree = ITree<crate::http::NtEvent, Void>;

/// Dualizes one event of the composed model.
pub fn observe(e: SymEvent) -> ITree<ObsEvent, Reply> {
    match e {
        SymEvent::Recv(sigma, in_flight) => trigger(ObsEvent::FromObserver(sigma, in_flight)).map(|r| Reply::Sym(r.packet().lift())),
        SymEvent::Send(px) => trigger(ObsEvent::ToObserver).bind(move |r| {
            trigger(ObsEvent::Guard(px.clone(), r.packet())).map(|_| Reply::Unit)
        }),
        SymEvent::Decide(bx) => {
            let (b1, b2) = (bx.clone(), bx);
            or(
                trigger(ObsEvent::Unify(b1, true)).map(|_| Reply::Bool(true)),
                trigger(ObsEvent::Unify(b2, false)).map(|_| Reply::Bool(false)),
            )
        }
        SymEvent::Or => trigger(ObsEvent::Or),
        SymEvent::Choice => trigger(ObsEvent::Choice),
    }
}

pub fn observer(m: ITree<SymEvent, Void>) -> ITree<ObsEvent, Void> {
    interp(Arc::new(observe), m)
}

/// Resolves the observer's constraints, starting from an empty state.
pub fn resolve(m: ITree<ObsEvent, Void>) -> NtTree {
    interp_state(Arc::new(unify), m, EtagConstraintState::default()).bind(|(_, v)| match v {})
}

/// The nondeterministic tester for the HTTP model over the TCP network,
/// starting from server state `sigma`.
pub fn http_tester(sigma: Sigma) -> NtTree {
    let composed = compose(server_http(sigma), tcp_network(Vector::new()), Vector::new(), Vector::new());
    resolve(observer(composed))
}
