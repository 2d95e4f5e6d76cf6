use std::fmt;

use im::{HashSet, Vector};

use crate::http::{throw, NtEvent, Packet, Reply, TestEvent};
use crate::itree::{ITree, Step, Void};

use super::NtTree;

/// One step of the recorded observation history.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Sent(Packet),
    Received(Packet),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Sent(p) => write!(f, "FromObserver({p})"),
            Observation::Received(p) => write!(f, "ToObserver({p})"),
        }
    }
}

fn mismatch(expected: &str, o: &Observation) -> NtTree {
    throw(NtEvent::Throw(format!("Expect {expected} but observed {o}")))
}

/// Feeds `o` to the first observe event of `t`; non-observe events before it
/// are kept as they are.
pub fn match_observe(t: NtTree, o: Observation) -> NtTree {
    ITree::suspend(move || match t.clone().step() {
        Step::Pure(v) => match v {},
        Step::Impure(NtEvent::FromObserver(..), k) => match &o {
            Observation::Sent(p) => k(Reply::Packet(p.clone())),
            other => mismatch("FromObserver", other),
        },
        Step::Impure(NtEvent::ToObserver, k) => match &o {
            Observation::Received(p) => k(Reply::Packet(p.clone())),
            other => mismatch("ToObserver", other),
        },
        Step::Impure(NtEvent::Or, k) => {
            let o = o.clone();
            ITree::impure(NtEvent::Or, move |b| match_observe(k(b), o.clone()))
        }
        Step::Impure(e @ NtEvent::Throw(_), k) => ITree::impure_arc(e, k),
    })
}

pub fn expect(o: &Observation, branches: Vec<NtTree>) -> Vec<NtTree> {
    branches.into_iter().map(|t| match_observe(t, o.clone())).collect()
}

/// A live hypothesis: a tree plus how much of the history it has consumed.
#[derive(Clone)]
struct Branch {
    tree: NtTree,
    cursor: usize,
}

/// Resolves the tester's nondeterminism by search. `Or` is decided by
/// `GenBool` and the other side is queued at the front; a thrown branch is
/// replaced by the next queued one. Queued branches catch up with the
/// observations made meanwhile when they are resumed.
pub fn backtrack(current: NtTree, others: Vec<NtTree>) -> ITree<TestEvent, Void> {
    let others = others.into_iter().map(|tree| Branch { tree, cursor: 0 }).collect();
    resume(Branch { tree: current, cursor: 0 }, others, Vector::new(), HashSet::new())
}

type Seen = HashSet<(usize, String)>;

fn resume(cur: Branch, others: Vector<Branch>, hist: Vector<Observation>, seen: Seen) -> ITree<TestEvent, Void> {
    ITree::suspend(move || run(cur.clone(), others.clone(), hist.clone(), seen.clone()))
}

fn run(mut cur: Branch, mut others: Vector<Branch>, hist: Vector<Observation>, mut seen: Seen) -> ITree<TestEvent, Void> {
    loop {
        let at = cur.cursor;
        match cur.tree.step() {
            Step::Pure(v) => match v {},
            Step::Impure(NtEvent::Or, k) => {
                return ITree::impure(TestEvent::GenBool, move |b| {
                    let b = b.bool();
                    let mut others = others.clone();
                    others.push_front(Branch {
                        tree: k(Reply::Bool(!b)),
                        cursor: at,
                    });
                    resume(
                        Branch {
                            tree: k(Reply::Bool(b)),
                            cursor: at,
                        },
                        others,
                        hist.clone(),
                        seen.clone(),
                    )
                });
            }
            Step::Impure(NtEvent::Throw(msg), _) => match others.pop_front() {
                Some(next) => cur = next,
                None => return throw(TestEvent::Throw(msg)),
            },
            Step::Impure(NtEvent::FromObserver(sigma, key), k) => {
                if seen.contains(&(at, key.clone())) {
                    match others.pop_front() {
                        Some(next) => {
                            cur = next;
                            continue;
                        }
                        None => return throw(TestEvent::Throw(format!("no hypothesis explains the trace at {at}"))),
                    }
                }
                seen.insert((at, key));
                if let Some(o) = hist.get(at) {
                    cur = match o {
                        Observation::Sent(p) => Branch {
                            tree: k(Reply::Packet(p.clone())),
                            cursor: at + 1,
                        },
                        other => Branch {
                            tree: mismatch("FromObserver", other),
                            cursor: at,
                        },
                    };
                    continue;
                }
                return ITree::impure(TestEvent::GenPacket(sigma), move |r| {
                    let p = r.packet();
                    let (k, others, mut hist, seen) = (k.clone(), others.clone(), hist.clone(), seen.clone());
                    hist.push_back(Observation::Sent(p.clone()));
                    let fed = k(Reply::Packet(p.clone()));
                    ITree::impure(TestEvent::ClientSend(p), move |_| {
                        resume(
                            Branch {
                                tree: fed.clone(),
                                cursor: at + 1,
                            },
                            others.clone(),
                            hist.clone(),
                            seen.clone(),
                        )
                    })
                });
            }
            Step::Impure(NtEvent::ToObserver, k) => {
                if let Some(o) = hist.get(at) {
                    cur = match o {
                        Observation::Received(p) => Branch {
                            tree: k(Reply::Packet(p.clone())),
                            cursor: at + 1,
                        },
                        other => Branch {
                            tree: mismatch("ToObserver", other),
                            cursor: at,
                        },
                    };
                    continue;
                }
                return ITree::impure(TestEvent::ClientRecv, move |r| match r.maybe_packet() {
                    Some(p) => {
                        let mut hist = hist.clone();
                        hist.push_back(Observation::Received(p.clone()));
                        resume(
                            Branch {
                                tree: k(Reply::Packet(p)),
                                cursor: at + 1,
                            },
                            others.clone(),
                            hist,
                            seen.clone(),
                        )
                    }
                    None => {
                        let waiting = Branch {
                            tree: ITree::impure_arc(NtEvent::ToObserver, k.clone()),
                            cursor: at,
                        };
                        let mut others = others.clone();
                        match others.pop_front() {
                            Some(next) => {
                                others.push_back(waiting);
                                resume(next, others, hist.clone(), seen.clone())
                            }
                            None => resume(waiting, others, hist.clone(), seen.clone()),
                        }
                    }
                });
            }
        }
    }
}

/// Whether some resolution of `t`'s `Or`s explains `obs` completely, with at
/// most `max_or_depth` consecutive `Or`s between two observations.
pub fn explain(t: NtTree, obs: &[Observation], max_or_depth: usize) -> bool {
    fn go(t: NtTree, obs: &[Observation], ors_left: usize, max: usize) -> bool {
        match t.step() {
            Step::Pure(v) => match v {},
            Step::Impure(NtEvent::Throw(_), _) => false,
            Step::Impure(NtEvent::Or, k) => {
                ors_left > 0
                    && (go(k(Reply::Bool(true)), obs, ors_left - 1, max)
                        || go(k(Reply::Bool(false)), obs, ors_left - 1, max))
            }
            Step::Impure(NtEvent::FromObserver(..), k) => match obs.split_first() {
                None => true,
                Some((Observation::Sent(p), rest)) => go(k(Reply::Packet(p.clone())), rest, max, max),
                Some(_) => false,
            },
            Step::Impure(NtEvent::ToObserver, k) => match obs.split_first() {
                None => true,
                Some((Observation::Received(p), rest)) => go(k(Reply::Packet(p.clone())), rest, max, max),
                Some(_) => false,
            },
        }
    }
    go(t, obs, max_or_depth, max_or_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{or, Request, Response};
    use crate::itree::{ret, trigger};

    /// Unfolds until a Throw or `fuel` events.
    fn run_with(
        t: ITree<TestEvent, Void>,
        fuel: usize,
        mut answer: impl FnMut(&TestEvent) -> Reply,
    ) -> (Vec<TestEvent>, Option<Void>) {
        let mut seen = Vec::new();
        let mut cur = t;
        for _ in 0..fuel {
            let Step::Impure(e, k) = cur.step();
            seen.push(e.clone());
            if matches!(e, TestEvent::Throw(_)) {
                break;
            }
            cur = k(answer(&e));
        }
        (seen, None)
    }

    fn send_then(next: NtTree) -> NtTree {
        send_keyed("", next)
    }

    fn send_keyed(key: &str, next: NtTree) -> NtTree {
        trigger(NtEvent::FromObserver(Default::default(), key.to_string())).then(next)
    }

    fn recv_then(next: NtTree) -> NtTree {
        trigger(NtEvent::ToObserver).then(next)
    }

    fn fail(msg: &str) -> NtTree {
        throw(NtEvent::Throw(msg.into()))
    }

    fn idle() -> NtTree {
        ITree::suspend(|| recv_then(idle()))
    }

    fn req() -> Packet {
        Packet::request(1, Request::get("/a"))
    }

    fn resp(status: u16) -> Packet {
        Packet::response(1, Response::new(status))
    }

    /// A branch that requires the response to have `status`.
    fn wants(status: u16) -> NtTree {
        send_keyed(&status.to_string(), trigger(NtEvent::ToObserver).bind(move |r| {
            if r.packet().as_response().unwrap().status == status {
                idle()
            } else {
                fail(&format!("not {status}"))
            }
        }))
    }

    #[test]
    fn match_observe_mismatch_throws() {
        let t = match_observe(recv_then(idle()), Observation::Sent(req()));
        assert!(matches!(t.step(), Step::Impure(NtEvent::Throw(m), _) if m.starts_with("Expect ToObserver but observed")));
    }

    #[test]
    fn match_observe_feeds_matching_tag() {
        let t = trigger(NtEvent::FromObserver(Default::default(), String::new())).bind(|r| {
            assert_eq!(r.packet(), req());
            ret::<NtEvent, ()>(())
        });
        let t = t.bind(|_| idle());
        let fed = match_observe(t, Observation::Sent(req()));
        assert!(matches!(fed.step(), Step::Impure(NtEvent::ToObserver, _)));
    }

    #[test]
    fn thrown_branch_stays_thrown() {
        let t = match_observe(fail("boom"), Observation::Sent(req()));
        assert!(matches!(t.step(), Step::Impure(NtEvent::Throw(m), _) if m == "boom"));
        let ts = expect(&Observation::Sent(req()), vec![fail("x"), recv_then(idle())]);
        assert!(ts.into_iter().all(|t| matches!(t.step(), Step::Impure(NtEvent::Throw(_), _))));
    }

    #[test]
    fn match_observe_keeps_or() {
        let t = or(recv_then(idle()), send_then(idle()));
        let m = match_observe(t, Observation::Sent(req()));
        let Step::Impure(NtEvent::Or, k) = m.step() else { panic!() };
        assert!(matches!(k(Reply::Bool(true)).step(), Step::Impure(NtEvent::Throw(_), _)));
        assert!(matches!(k(Reply::Bool(false)).step(), Step::Impure(NtEvent::ToObserver, _)));
    }

    #[test]
    fn all_branches_thrown_surfaces() {
        let t = or(fail("a"), fail("b"));
        let (events, _) = run_with(backtrack(t, vec![]), 10, |_| Reply::Bool(true));
        assert_eq!(events.len(), 2);
        assert!(matches!(&events[1], TestEvent::Throw(m) if m == "b"));
    }

    /// Drives a tester whose SUT answers every request with `status`.
    fn drive(t: NtTree, status: u16, fuel: usize) -> Vec<TestEvent> {
        run_with(backtrack(t, vec![]), fuel, |e| match e {
            TestEvent::GenBool => Reply::Bool(true),
            TestEvent::GenPacket(_) => Reply::Packet(req()),
            TestEvent::ClientRecv => Reply::MaybePacket(Some(resp(status))),
            _ => Reply::Unit,
        })
        .0
    }

    #[test]
    fn second_branch_explains_observation() {
        let t = or(wants(204), wants(412));
        let events = drive(t.clone(), 412, 8);
        assert!(!events.iter().any(|e| matches!(e, TestEvent::Throw(_))));
        // exactly one packet is sent: the second branch replays it
        assert_eq!(events.iter().filter(|e| matches!(e, TestEvent::ClientSend(_))).count(), 1);
        let events = drive(t, 500, 8);
        assert!(matches!(events.last(), Some(TestEvent::Throw(_))));
    }

    #[test]
    fn equal_states_are_explored_once() {
        let t = or(send_keyed("s", fail("first")), send_keyed("s", recv_then(idle())));
        let events = drive(t, 200, 8);
        assert!(matches!(events.last(), Some(TestEvent::Throw(_))));
        let t = or(send_keyed("s", fail("first")), send_keyed("u", recv_then(idle())));
        let events = drive(t, 200, 8);
        assert!(!events.iter().any(|e| matches!(e, TestEvent::Throw(_))));
    }

    #[test]
    fn silent_sut_retries_singleton() {
        let (events, _) = run_with(backtrack(recv_then(idle()), vec![]), 50, |_| Reply::MaybePacket(None));
        assert_eq!(events.len(), 50);
        assert!(events.iter().all(|e| *e == TestEvent::ClientRecv));
    }

    #[test]
    fn silence_postpones_current_branch() {
        // first branch waits, second one sends
        let t = or(recv_then(idle()), send_then(idle()));
        let (events, _) = run_with(backtrack(t, vec![]), 5, |e| match e {
            TestEvent::GenBool => Reply::Bool(true),
            TestEvent::GenPacket(_) => Reply::Packet(req()),
            TestEvent::ClientRecv => Reply::MaybePacket(None),
            _ => Reply::Unit,
        });
        assert_eq!(events[1], TestEvent::ClientRecv);
        assert!(matches!(events[2], TestEvent::GenPacket(_)));
        assert!(matches!(events[3], TestEvent::ClientSend(_)));
    }

    #[test]
    fn explain_bounded() {
        let t = or(wants(204), wants(412));
        let ok = [Observation::Sent(req()), Observation::Received(resp(412))];
        assert!(explain(t.clone(), &ok, 2));
        assert!(!explain(t.clone(), &ok, 0));
        let bad = [Observation::Sent(req()), Observation::Received(resp(500))];
        assert!(!explain(t, &bad, 4));
    }
}
