//! Runs of the HTTP tester against a target, shrinking, reports, and the
//! mutant kill matrix.

use std::fmt;
use std::net::SocketAddr;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::harness::{gen_request_jexp, instantiate, shrink_loop, GenConfig, LabelledTrace, Registry, ScriptEntry};
use crate::http::{Packet, Sigma};
use crate::qac::ChoiceDomain;
use crate::sut::Mutant;
use crate::tester::{backtrack, execute, http_tester, Direction, Inputs, Outcome, Verdict};
use crate::transport::{InProcess, Socket, Transport};
use crate::wire;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// The in-tree reference server, or one of its mutants.
    InProcess(Option<Mutant>),
    Socket(SocketAddr),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::InProcess(None) => write!(f, "in-process:CORRECT"),
            Target::InProcess(Some(m)) => write!(f, "in-process:{m}"),
            Target::Socket(a) => write!(f, "socket:{a}"),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    /// `in-process`, `in-process:M3`, `socket:HOST:PORT`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("socket:") {
            let addr = std::net::ToSocketAddrs::to_socket_addrs(addr)
                .map_err(|e| format!("bad address {addr:?}: {e}"))?
                .next()
                .ok_or_else(|| format!("no address for {addr:?}"))?;
            return Ok(Target::Socket(addr));
        }
        match s.strip_prefix("in-process") {
            Some("") | Some(":CORRECT") | Some(":correct") => Ok(Target::InProcess(None)),
            Some(m) if m.starts_with(':') => Ok(Target::InProcess(Some(m[1..].parse()?))),
            _ => Err(format!("unknown target {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub fuel: usize,
    pub recv_timeout_ms: u64,
    pub target: Target,
    pub choice_dom: ChoiceDomain,
    pub shrink_budget: usize,
    pub gen: GenConfig,
    /// Chance that the tester resolves a choice towards the first branch,
    /// which delivers pending messages rather than sending new ones.
    pub first_branch_bias: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            fuel: 1000,
            recv_timeout_ms: 50,
            target: Target::InProcess(None),
            choice_dom: ChoiceDomain::default(),
            shrink_budget: 200,
            gen: GenConfig::default(),
            first_branch_bias: 0.9,
        }
    }
}

enum Source {
    Generate,
    Replay(Vec<ScriptEntry>),
}

/// Generates requests from J-expressions, or replays a script of them.
struct ScriptedInputs {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    reg: Registry,
    bias: f64,
    source: Source,
    used: Vec<ScriptEntry>,
}

impl Inputs for ScriptedInputs {
    fn next_request(&mut self, state: &Sigma, trace: &LabelledTrace) -> Option<(u64, Packet)> {
        let (label, jexp) = match &self.source {
            Source::Generate => {
                let label = 2 * self.used.len() as u64 + 1;
                (label, gen_request_jexp(state, trace, &mut self.rng, &self.cfg))
            }
            Source::Replay(script) => {
                let e = script.get(self.used.len())?;
                (e.label, e.jexp.clone())
            }
        };
        let instance = instantiate(&jexp, trace, &self.reg).expect("generated holes use registered functions");
        let packet = wire::ir_to_request(&instance)?;
        self.used.push(ScriptEntry { label, jexp, instance });
        Some((label, packet))
    }

    fn next_bool(&mut self) -> bool {
        match self.source {
            Source::Generate => self.rng.gen_bool(self.bias),
            Source::Replay(_) => true,
        }
    }
}

/// One run and the inputs it consumed.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub script: Vec<ScriptEntry>,
}

fn transport(cfg: &RunConfig) -> Box<dyn Transport> {
    match cfg.target {
        Target::InProcess(m) => Box::new(InProcess::new(m, cfg.seed)),
        Target::Socket(addr) => Box::new(Socket::new(addr)),
    }
}

fn run(cfg: &RunConfig, source: Source) -> RunResult {
    let mut inputs = ScriptedInputs {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg: cfg.gen.clone(),
        reg: Registry::default(),
        bias: cfg.first_branch_bias,
        source,
        used: Vec::new(),
    };
    let tester = backtrack(http_tester(Sigma::default()), vec![]);
    let mut t = transport(cfg);
    let outcome = execute(
        cfg.fuel,
        tester,
        t.as_mut(),
        &mut inputs,
        Duration::from_millis(cfg.recv_timeout_ms),
    );
    RunResult {
        outcome,
        script: inputs.used,
    }
}

pub fn run_generated(cfg: &RunConfig) -> RunResult {
    run(cfg, Source::Generate)
}

/// Replays `script`; stops accepting once the script runs out.
pub fn run_replay(cfg: &RunConfig, script: &[ScriptEntry]) -> RunResult {
    run(cfg, Source::Replay(script.to_vec()))
}

#[derive(Debug, Clone)]
pub struct TestReport {
    pub config: RunConfig,
    pub run: RunResult,
    /// The confirming run of the shrunk counterexample.
    pub shrunk: Option<RunResult>,
    pub shrink_attempts: usize,
    pub elapsed: Duration,
}

impl TestReport {
    pub fn verdict(&self) -> &Verdict {
        &self.run.outcome.verdict
    }
}

/// Runs the tester and shrinks a rejected input.
pub fn run_test(cfg: &RunConfig) -> TestReport {
    let start = Instant::now();
    let run = run_generated(cfg);
    let mut shrunk = None;
    let mut attempts = 0;
    if matches!(run.outcome.verdict, Verdict::Reject(_)) && cfg.shrink_budget > 0 {
        let small = shrink_loop(
            run.script.clone(),
            |cand| {
                attempts += 1;
                let r = run_replay(cfg, cand);
                matches!(r.outcome.verdict, Verdict::Reject(_)).then_some(r.script)
            },
            cfg.shrink_budget,
        );
        shrunk = Some(run_replay(cfg, &small));
    }
    TestReport {
        config: cfg.clone(),
        run,
        shrunk,
        shrink_attempts: attempts,
        elapsed: start.elapsed(),
    }
}

pub fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Accept => "ACCEPT",
        Verdict::Reject(_) => "REJECT",
        Verdict::Error(_) => "ERROR",
    }
}

fn outcome_json(r: &RunResult) -> Value {
    let v = &r.outcome.verdict;
    let reason = match v {
        Verdict::Accept => Value::Null,
        Verdict::Reject(m) | Verdict::Error(m) => Value::String(m.clone()),
    };
    let trace: Vec<Value> = r
        .outcome
        .entries
        .iter()
        .map(|e| {
            json!({
                "label": e.label,
                "direction": match e.direction { Direction::Sent => "sent", Direction::Received => "received" },
                "message": String::from_utf8_lossy(&wire::encode(&e.packet)),
                "offset": e.offset,
            })
        })
        .collect();
    json!({
        "verdict": verdict_name(v),
        "reason": reason,
        "fuel_used": r.outcome.fuel_used,
        "messages": r.outcome.messages(),
        "trace": trace,
        "inputs": r.script.iter().map(ScriptEntry::to_json).collect::<Vec<_>>(),
    })
}

/// The JSON report. In-process runs carry only logical offsets and no
/// wall-clock timing, so equal configurations give identical reports.
pub fn report_json(rep: &TestReport) -> Value {
    let in_process = matches!(rep.config.target, Target::InProcess(_));
    let mut out = json!({
        "verdict": verdict_name(rep.verdict()),
        "seed": rep.config.seed,
        "fuel": rep.config.fuel,
        "target": rep.config.target.to_string(),
        "run": outcome_json(&rep.run),
        "shrunk": rep.shrunk.as_ref().map(outcome_json),
        "shrink_attempts": rep.shrink_attempts,
    });
    let timing = if in_process {
        json!({"offsets": "logical"})
    } else {
        json!({"offsets": "ms", "elapsed_ms": rep.elapsed.as_millis() as u64})
    };
    out["timing"] = timing;
    out
}

/// One cell of the kill matrix.
#[derive(Debug, Clone)]
pub struct Kill {
    pub mutant: Mutant,
    pub seed: u64,
    pub verdict: Verdict,
    pub messages: usize,
    pub shrunk_messages: Option<usize>,
}

pub fn mutant_matrix(base: &RunConfig, seeds: u64) -> Vec<Kill> {
    let mut out = Vec::new();
    for mutant in Mutant::ALL {
        for seed in 0..seeds {
            let cfg = RunConfig {
                seed,
                target: Target::InProcess(Some(mutant)),
                ..base.clone()
            };
            let rep = run_test(&cfg);
            out.push(Kill {
                mutant,
                seed,
                verdict: rep.run.outcome.verdict.clone(),
                messages: rep.run.outcome.messages(),
                shrunk_messages: rep.shrunk.as_ref().map(|r| r.outcome.messages()),
            });
        }
    }
    out
}
