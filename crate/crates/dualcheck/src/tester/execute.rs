use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use crate::harness::LabelledTrace;
use crate::http::{Endpoint, Packet, Reply, Sigma, TestEvent, SERVER};
use crate::itree::{ITree, Step, Void};
use crate::transport::Transport;
use crate::wire;

/// Where test inputs come from.
pub trait Inputs {
    /// The next request and its label, or `None` to stop the run.
    fn next_request(&mut self, state: &Sigma, trace: &LabelledTrace) -> Option<(u64, Packet)>;
    fn next_bool(&mut self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(String),
    /// The environment failed; says nothing about the server.
    Error(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub label: u64,
    pub direction: Direction,
    pub packet: Packet,
    pub offset: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub entries: Vec<TraceEntry>,
    pub trace: LabelledTrace,
    pub fuel_used: usize,
}

impl Outcome {
    pub fn messages(&self) -> usize {
        self.entries.len()
    }
}

struct Recorder {
    entries: Vec<TraceEntry>,
    trace: LabelledTrace,
    pending: BTreeMap<Endpoint, VecDeque<u64>>,
}

impl Recorder {
    fn record(&mut self, label: u64, direction: Direction, packet: Packet, offset: u64) {
        self.trace.push(label, wire::packet_to_ir(&packet));
        self.entries.push(TraceEntry {
            label,
            direction,
            packet,
            offset,
        });
    }
}

/// Runs tester `m` for at most `fuel` events. Running out of fuel, or of
/// inputs, accepts.
pub fn execute(
    fuel: usize,
    m: ITree<TestEvent, Void>,
    transport: &mut dyn Transport,
    inputs: &mut dyn Inputs,
    recv_timeout: Duration,
) -> Outcome {
    let mut rec = Recorder {
        entries: Vec::new(),
        trace: LabelledTrace::default(),
        pending: BTreeMap::new(),
    };
    let mut cur = m;
    let mut used = 0;
    let verdict = loop {
        if used == fuel {
            break Verdict::Accept;
        }
        used += 1;
        let (e, k) = match cur.step() {
            Step::Pure(v) => match v {},
            Step::Impure(e, k) => (e, k),
        };
        let answer = match e {
            TestEvent::Throw(msg) => break Verdict::Reject(msg),
            TestEvent::GenBool => Reply::Bool(inputs.next_bool()),
            TestEvent::GenPacket(state) => match inputs.next_request(&state, &rec.trace) {
                Some((label, p)) => {
                    rec.pending.entry(p.src).or_default().push_back(label);
                    rec.record(label, Direction::Sent, p.clone(), transport.offset());
                    Reply::Packet(p)
                }
                None => break Verdict::Accept,
            },
            TestEvent::ClientSend(p) => match transport.send(p.src, &wire::encode(&p)) {
                Ok(()) => Reply::Unit,
                Err(err) => break Verdict::Error(format!("send failed: {err}")),
            },
            TestEvent::ClientRecv => match transport.recv(recv_timeout) {
                Ok(None) => Reply::MaybePacket(None),
                Ok(Some((dst, bytes))) => match wire::decode(SERVER, dst, &bytes) {
                    Ok(p) => {
                        let label = rec
                            .pending
                            .get_mut(&dst)
                            .and_then(VecDeque::pop_front)
                            .map_or(0, |l| l + 1);
                        rec.record(label, Direction::Received, p.clone(), transport.offset());
                        Reply::MaybePacket(Some(p))
                    }
                    Err(err) => break Verdict::Reject(format!("unparseable response: {err}")),
                },
                Err(err) => break Verdict::Error(format!("receive failed: {err}")),
            },
        };
        cur = k(answer);
    };
    Outcome {
        verdict,
        entries: rec.entries,
        trace: rec.trace,
        fuel_used: used,
    }
}
