//! Acceptance criteria. Runs as a plain binary so every criterion prints
//! its own PASS/FAIL line; the process fails if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use dualcheck::dualize::validator_of;
use dualcheck::harness::{
    eval_jexp, gen_etag_traced, gen_path_traced, loose_get_jpath, GenConfig, Jexp, Jpath, LabelledTrace, Registry,
};
use dualcheck::http::{etag_match, ETagExp, Mode, Packet, Request, Resource, Response, Sigma};
use dualcheck::itree::{interp, prefix_bisim, ret, trigger, Effect, Handler, ITree, Step};
use dualcheck::prog::{cmp_rst_prog, random_prog, server_of, Memory, ProgShape};
use dualcheck::qac::{accepts_trace, oracle_valid, step_validator, ChoiceDomain, ServerModel, ValidatorModel};
use dualcheck::runner::{mutant_matrix, run_generated, run_test, verdict_name, RunConfig, Target};
use dualcheck::sut::Mutant;
use dualcheck::tester::{explain, http_tester, Observation, Verdict};

type Outcome = Result<String, String>;

type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1

struct Tally {
    nodes: usize,
    disagreements: Vec<String>,
    spot_checks: usize,
}

/// Walks every trace of length <= `depth` over `vals`, stepping the
/// validator and a brute-force frontier of reachable server states side by
/// side. A subtree is skipped once both sides reject.
#[allow(clippy::too_many_arguments)]
fn walk<V: Clone>(
    server: &ServerModel<Memory>,
    v: Option<&ValidatorModel<V>>,
    frontier: &[Memory],
    trace: &mut Vec<(i64, i64)>,
    depth: usize,
    vals: &[i64],
    dom: ChoiceDomain,
    tally: &mut Tally,
) {
    if depth == 0 {
        return;
    }
    for &q in vals {
        let mut outcomes: BTreeMap<i64, BTreeSet<Memory>> = BTreeMap::new();
        for s in frontier {
            for c in dom.iter() {
                if let Ok((a2, s2)) = server.raw_step(q, c, s) {
                    outcomes.entry(a2).or_default().insert(s2);
                }
            }
        }
        for &a in vals {
            trace.push((q, a));
            tally.nodes += 1;
            let next_v = v.and_then(|v| step_validator(v, q, a));
            let next_f: Vec<Memory> = outcomes.get(&a).map(|s| s.iter().cloned().collect()).unwrap_or_default();
            let valid = !next_f.is_empty();
            if next_v.is_some() != valid {
                tally.disagreements.push(format!("{trace:?}: validator {} oracle {valid}", next_v.is_some()));
            }
            if tally.nodes.is_multiple_of(97) {
                tally.spot_checks += 1;
                if oracle_valid(server, trace, dom) != valid {
                    tally.disagreements.push(format!("{trace:?}: incremental oracle disagrees with oracle_valid"));
                }
            }
            if next_v.is_some() || valid {
                walk(server, next_v.as_ref(), &next_f, trace, depth - 1, vals, dom, tally);
            }
            trace.pop();
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let shape = ProgShape {
        max_if_depth: 3,
        max_addr: 3,
        max_const: 4,
        max_writes: 2,
    };
    let dom = ChoiceDomain::new(-8, 8);
    let vals: Vec<i64> = (-3..=3).collect();
    let tallies: Vec<Result<Tally, String>> = (0..300u64)
        .into_par_iter()
        .map(|i| {
            let p = random_prog(&mut ChaCha8Rng::seed_from_u64(1000 + i), &shape);
            let v = validator_of(&p, dom).map_err(|e| format!("program {i}: {e}"))?;
            let server = server_of(&p);
            let mut tally = Tally {
                nodes: 0,
                disagreements: Vec::new(),
                spot_checks: 0,
            };
            let root = vec![server.state.clone()];
            walk(&server, Some(&v), &root, &mut Vec::new(), 3, &vals, dom, &mut tally);
            Ok(tally)
        })
        .collect();
    let mut nodes = 0;
    let mut spots = 0;
    let mut bad = Vec::new();
    for t in tallies {
        let t = t?;
        nodes += t.nodes;
        spots += t.spot_checks;
        bad.extend(t.disagreements);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        bad.is_empty() && secs <= 120.0,
        format!(
            "300 programs, {nodes} trace nodes, {spots} oracle_valid spot checks, {} disagreements{}, {secs:.1}s",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

// 2

fn cmp_rst_regression() -> Outcome {
    let dom = ChoiceDomain::new(-8, 8);
    let p = cmp_rst_prog();
    let v = validator_of(&p, dom).map_err(|e| e.to_string())?;
    let server = server_of(&p);
    let cases: [(&[(i64, i64)], bool); 4] = [
        (&[(5, 1), (3, 0)], true),
        (&[(5, 1), (5, 1)], true),
        (&[(5, 0)], false),
        (&[(0, 1)], false),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (t, want) in cases {
        let got = accepts_trace(&v, t);
        let oracle = oracle_valid(&server, t, dom);
        ok &= got == want && oracle == want;
        lines.push(format!("{t:?}={}", if got { "accept" } else { "reject" }));
    }
    check(ok, lines.join(" "))
}

// 3

fn reordering_fixtures() -> Outcome {
    let start = Instant::now();
    let sigma = Sigma::default().set(
        "/k",
        Resource {
            content: "old".into(),
            etag: ETagExp::empty(),
        },
    );
    let put = Packet::request(1, Request::put("/k", "new"));
    let get = Packet::request(2, Request::get("/k"));
    let done = Packet::response(1, Response::new(204));
    let old = Packet::response(
        2,
        Response {
            body: "old".into(),
            ..Response::new(200)
        },
    );
    use Observation::{Received, Sent};
    let reordered = [Sent(put.clone()), Sent(get.clone()), Received(done.clone()), Received(old.clone())];
    let invalid = [Sent(put), Received(done), Sent(get), Received(old)];
    let r = explain(http_tester(sigma.clone()), &reordered, 12);
    let i = explain(http_tester(sigma), &invalid, 12);
    let secs = start.elapsed().as_secs_f64();
    check(
        r && !i && secs <= 10.0,
        format!("reordered explained: {r}, invalid explained: {i}, {secs:.2}s"),
    )
}

// 4

fn kill_matrix() -> Outcome {
    let start = Instant::now();
    let base = RunConfig {
        fuel: 10_000,
        ..RunConfig::default()
    };
    let kills = mutant_matrix(&base, 5);
    let mut ok = true;
    let mut parts = Vec::new();
    for m in Mutant::ALL {
        let cells: Vec<_> = kills.iter().filter(|k| k.mutant == m).collect();
        let rejected = cells.iter().filter(|k| matches!(k.verdict, Verdict::Reject(_))).count();
        let mut msgs: Vec<usize> = cells.iter().map(|k| k.messages).collect();
        msgs.sort();
        let median = msgs[msgs.len() / 2];
        ok &= rejected == 5 && median <= 500;
        parts.push(format!("{m} {rejected}/5 median {median}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 300.0;
    check(ok, format!("{}, {secs:.1}s", parts.join("; ")))
}

// 5

fn no_false_rejection() -> Outcome {
    let results: Vec<(u64, Verdict)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = RunConfig {
                seed,
                fuel: 1000,
                target: Target::InProcess(None),
                ..RunConfig::default()
            };
            (seed, run_generated(&cfg).outcome.verdict)
        })
        .collect();
    let accepted = results.iter().filter(|(_, v)| *v == Verdict::Accept).count();
    let first_bad = results.iter().find(|(_, v)| *v != Verdict::Accept);
    check(
        accepted == 50,
        format!(
            "{accepted}/50 accepted{}",
            first_bad.map(|(s, v)| format!(" (seed {s}: {v:?})")).unwrap_or_default()
        ),
    )
}

// 6

/// Comparison written out from the definitions: strong needs two equal
/// non-weak tags; weak compares the opaque parts.
fn reference_match(a: &str, b: &str, mode: Mode) -> bool {
    let split = |s: &str| match s.strip_prefix("W/") {
        Some(rest) => (true, rest.to_string()),
        None => (false, s.to_string()),
    };
    let ((wa, oa), (wb, ob)) = (split(a), split(b));
    match mode {
        Mode::Strong => !wa && !wb && oa == ob,
        Mode::Weak => oa == ob,
    }
}

fn etag_truth_table() -> Outcome {
    let cases = [
        ("W/\"foo\"", "W/\"foo\"", Mode::Strong, false),
        ("W/\"bar\"", "\"bar\"", Mode::Weak, true),
        ("W/\"bar\"", "W/\"foo\"", Mode::Weak, false),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b, mode, want) in cases {
        let got = etag_match(a, b, mode);
        ok &= got == want && reference_match(a, b, mode) == want;
        parts.push(format!("{a} {mode:?} {b} = {got}"));
    }
    check(ok, parts.join("; "))
}

// 7

fn jexp_goldens() -> Outcome {
    let reg = Registry::default();
    let bar: Jpath = "this#3@\"bar\"".parse().map_err(|e| format!("{e:?}"))?;
    let j2 = loose_get_jpath(&bar, &json!([{"foo": 21}, {"bar": 22}]));
    let j3 = loose_get_jpath(&bar, &json!([{"bar": 31}, {"baz": 32}, {"foo": 33}]));
    let q = json!({"cmd": "ls"});
    let a2 = json!({"files": [{"name": "foo", "mode": 755}, {"name": "bar", "mode": 500}], "exitCode": 0});
    let t1 = LabelledTrace(vec![(1, q.clone()), (2, json!([{"foo": 21}, {"bar": 22}])), (5, q.clone())]);
    let t2 = LabelledTrace(vec![
        (3, q.clone()),
        (4, json!([{"bar": 31}, {"baz": 32}, {"foo": 33}])),
        (5, q),
        (6, a2.clone()),
    ]);
    let e = Jexp::hole(6, Jpath::this().index(2).field("foo"), "id");
    let v1 = eval_jexp(&e, &t1, &reg).map_err(|e| e.to_string())?;
    let v2 = eval_jexp(&e, &t2, &reg).map_err(|e| e.to_string())?;
    let files = Jpath::this().field("files").index(2);
    let e5 = Jexp::obj(vec![
        ("command", Jexp::str("chmod")),
        (
            "args",
            Jexp::Arr(vec![
                Jexp::hole(4, files.clone().field("mode"), "mode_add_write"),
                Jexp::hole(4, files.field("name"), "id"),
            ]),
        ),
    ]);
    let trace = LabelledTrace(vec![(1, json!({"q": 1})), (3, json!({"q": 2})), (4, a2), (2, json!({"a": 1}))]);
    let v5 = eval_jexp(&e5, &trace, &reg).map_err(|e| e.to_string())?;
    let want5 = json!({"command": "chmod", "args": [700, "bar"]});
    let ok = j2 == Some(json!(22))
        && j3 == Some(json!(31))
        && v1 == Some(json!(21))
        && v2 == Some(json!(33))
        && v5.as_ref() == Some(&want5);
    let show = |v: &Option<serde_json::Value>| v.as_ref().map(|v| v.to_string()).unwrap_or("none".into());
    check(
        ok,
        format!("j2={} j3={} t1={} t2={} e5={}", show(&j2), show(&j3), show(&v1), show(&v2), show(&v5)),
    )
}

// 8

fn shrinking() -> Outcome {
    let cfg = RunConfig {
        seed: 0,
        fuel: 10_000,
        shrink_budget: 200,
        target: Target::InProcess(Some(Mutant::WrongTarget)),
        ..RunConfig::default()
    };
    let rep = run_test(&cfg);
    let original = rep.run.outcome.messages();
    let Some(shrunk) = &rep.shrunk else {
        return Err(format!("no counterexample: {}", verdict_name(rep.verdict())));
    };
    let n = shrunk.outcome.messages();
    let confirmed = matches!(shrunk.outcome.verdict, Verdict::Reject(_));
    check(
        n <= 4 && confirmed && rep.shrink_attempts <= 200,
        format!(
            "{original} -> {n} messages in {} replays, confirming run {}",
            rep.shrink_attempts,
            verdict_name(&shrunk.outcome.verdict)
        ),
    )
}

// 9

fn generator_distribution() -> Outcome {
    let cfg = GenConfig::default();
    let sigma = Sigma::default()
        .set("/a", Resource { content: "x".into(), etag: ETagExp::empty() })
        .set("/b", Resource { content: "y".into(), etag: ETagExp::empty() });
    let trace = LabelledTrace(vec![
        (1, json!({"src": 1})),
        (2, json!({"dst": 1, "status": 200, "fields": {"ETag": "\"t\""}, "body": ""})),
    ]);
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let paths = (0..n).filter(|_| gen_path_traced(&sigma, &mut rng, &cfg).1).count();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let etags = (0..n).filter(|_| gen_etag_traced(&trace, &mut rng, &cfg).1).count();
    let (fp, fe) = (paths as f64 / n as f64, etags as f64 / n as f64);
    check(
        (fp - 0.9).abs() <= 0.03 && (fe - 0.9).abs() <= 0.03,
        format!("gen_path {fp:.4}, gen_etag {fe:.4}"),
    )
}

// 10

#[derive(Debug, Clone, PartialEq)]
struct Ask(u8);

impl Effect for Ask {
    type Answer = i64;
}

#[derive(Debug, Clone)]
enum Shape {
    Ret(i64),
    Ask(u8, Vec<Shape>),
}

fn random_shape(rng: &mut ChaCha8Rng, depth: usize) -> Shape {
    if depth == 0 || rng.gen_bool(0.3) {
        return Shape::Ret(rng.gen_range(-5..=5));
    }
    let n = rng.gen_range(1..=3);
    Shape::Ask(rng.gen_range(0..3), (0..n).map(|_| random_shape(rng, depth - 1)).collect())
}

fn build(s: &Shape) -> ITree<Ask, i64> {
    match s {
        Shape::Ret(v) => ret(*v),
        Shape::Ask(e, kids) => {
            let kids = kids.clone();
            ITree::impure(Ask(*e), move |a| build(&kids[a.rem_euclid(kids.len() as i64) as usize]))
        }
    }
}

/// A continuation picked by its argument from a fixed list of shapes.
fn kleisli(shapes: Vec<Shape>) -> impl Fn(i64) -> ITree<Ask, i64> + Clone + Send + Sync + 'static {
    move |x| build(&shapes[x.rem_euclid(shapes.len() as i64) as usize]).map(move |y| y + x)
}

fn answers(_: &Ask) -> Vec<i64> {
    vec![0, 1, 2]
}

fn interaction_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h: Handler<Ask, Ask> = Arc::new(|Ask(n)| trigger(Ask(n + 1)).bind(move |a| trigger(Ask(n)).map(move |b| a * 3 + b)));
    let mut failures = Vec::new();
    for i in 0..500 {
        let m = build(&random_shape(&mut rng, 4));
        let f = kleisli((0..3).map(|_| random_shape(&mut rng, 3)).collect());
        let g = kleisli((0..3).map(|_| random_shape(&mut rng, 3)).collect());
        let x = rng.gen_range(-5..=5);
        let left_id = prefix_bisim(&ret::<Ask, i64>(x).bind(f.clone()), &f(x), 6, &answers);
        let right_id = prefix_bisim(&m.clone().bind(ret), &m, 6, &answers);
        let (f2, g2) = (f.clone(), g.clone());
        let assoc = prefix_bisim(
            &m.clone().bind(f.clone()).bind(g.clone()),
            &m.clone().bind(move |y| f2(y).bind(g2.clone())),
            6,
            &answers,
        );
        let (h2, f3) = (h.clone(), f.clone());
        let fusion = prefix_bisim(
            &interp(h.clone(), m.clone().bind(f.clone())),
            &interp(h.clone(), m.clone()).bind(move |y| interp(h2.clone(), f3(y))),
            6,
            &answers,
        );
        if !(left_id && right_id && assoc && fusion) {
            failures.push(format!("tree {i}: left {left_id} right {right_id} assoc {assoc} fusion {fusion}"));
        }
    }

    // each node offers two suspended children; only the chosen one runs
    fn node(depth: u64, forced: Arc<AtomicUsize>) -> ITree<Ask, i64> {
        let (f1, f2) = (forced.clone(), forced.clone());
        let left = ITree::suspend(move || {
            f1.fetch_add(1, Ordering::SeqCst);
            node(depth + 1, f1.clone())
        });
        let right = ITree::suspend(move || {
            f2.fetch_add(1, Ordering::SeqCst);
            node(depth + 1, f2.clone())
        });
        ITree::impure(Ask((depth % 3) as u8), move |a| if a % 2 == 0 { left.clone() } else { right.clone() })
    }
    let forced = Arc::new(AtomicUsize::new(0));
    let mut cur = node(0, forced.clone());
    let mut steps = 0;
    while steps < 10_000 {
        match cur.step() {
            Step::Pure(_) => break,
            Step::Impure(_, k) => {
                cur = k(steps as i64);
                steps += 1;
            }
        }
    }
    let forced = forced.load(Ordering::SeqCst);
    let lazy_ok = steps == 10_000 && forced <= steps;
    check(
        failures.is_empty() && lazy_ok,
        format!(
            "500 trees, {} law failures{}; unfolded {steps} steps forcing {forced} children",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("CMP-RST regression", cmp_rst_regression),
        ("reordering fixtures", reordering_fixtures),
        ("mutant kill matrix", kill_matrix),
        ("no false rejection", no_false_rejection),
        ("ETag truth table", etag_truth_table),
        ("Jexp goldens", jexp_goldens),
        ("shrinking", shrinking),
        ("generator distribution", generator_distribution),
        ("interaction laws", interaction_laws),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = Duration::from_millis(start.elapsed().as_millis() as u64);
        match res {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d} [{took:?}]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d} [{took:?}]", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
