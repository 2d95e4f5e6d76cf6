use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use dualcheck::dualize::validator_of;
use dualcheck::harness::{eval_jexp, loose_get_jpath, Jexp, Jpath, LabelledTrace, Registry};
use dualcheck::http::{etag_match, Mode, Packet, PreconditionKind, Request, Response};
use dualcheck::prog::{cmp_rst_prog, random_prog, server_of, Prog, ProgShape};
use dualcheck::qac::{accepts_trace, cmp_set_server, cmp_set_validator, oracle_valid, ChoiceDomain, ServerModel, ValidatorModel};
use dualcheck::runner::{run_test, verdict_name, RunConfig, Target};
use dualcheck::sut::Mutant;
use dualcheck::tester::Verdict;
use dualcheck::wire::{decode, encode};

type Check = Result<String, String>;
type Named = (&'static str, Box<dyn Fn() -> Check>);

/// Runs every check, printing one line each. True if all pass.
pub fn run(dom: ChoiceDomain) -> bool {
    let checks: Vec<Named> = vec![
        ("cmp-set validator", Box::new(move || cmp_set(dom))),
        ("cmp-rst dual validator", Box::new(move || cmp_rst(dom))),
        ("random programs", Box::new(move || random_programs(dom))),
        ("etag comparison", Box::new(etag_table)),
        ("jexp evaluation", Box::new(jexp_goldens)),
        ("wire format", Box::new(wire_examples)),
        ("http tester", Box::new(tester_smoke)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let res = check();
        let ms = start.elapsed().as_millis();
        match res {
            Ok(detail) => println!("ok   {name}: {detail} [{ms} ms]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{ms} ms]");
            }
        }
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    failed == 0
}

/// Every trace of length at most `len` over `vals`.
fn traces(vals: &[i64], len: usize) -> Vec<Vec<(i64, i64)>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for t in &layer {
            for &q in vals {
                for &a in vals {
                    let mut t2: Vec<(i64, i64)> = t.clone();
                    t2.push((q, a));
                    next.push(t2);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn compare<S: Clone + PartialEq, V: Clone>(
    server: &ServerModel<S>,
    validator: &ValidatorModel<V>,
    ts: &[Vec<(i64, i64)>],
    dom: ChoiceDomain,
) -> Result<usize, String> {
    for t in ts {
        let (v, o) = (accepts_trace(validator, t), oracle_valid(server, t, dom));
        if v != o {
            return Err(format!("{t:?}: validator {v}, oracle {o}"));
        }
    }
    Ok(ts.len())
}

fn cmp_set(dom: ChoiceDomain) -> Check {
    let ts = traces(&[-2, -1, 0, 1, 2], 2);
    let n = compare(&cmp_set_server(), &cmp_set_validator(), &ts, dom)?;
    Ok(format!("{n} traces agree with the oracle"))
}

fn cmp_rst(dom: ChoiceDomain) -> Check {
    let p = cmp_rst_prog();
    let v = validator_of(&p, dom).map_err(|e| e.to_string())?;
    let vals: Vec<i64> = (-3..=3).collect();
    let n = compare(&server_of(&p), &v, &traces(&vals, 2), dom)?;
    let golden = ChoiceDomain::default();
    let gv = validator_of(&p, golden).map_err(|e| e.to_string())?;
    let cases: [(&[(i64, i64)], bool); 4] = [
        (&[(5, 1), (3, 0)], true),
        (&[(5, 1), (5, 1)], true),
        (&[(5, 0)], false),
        (&[(0, 1)], false),
    ];
    for (t, want) in cases {
        if accepts_trace(&gv, t) != want {
            return Err(format!("{t:?} should be {}", if want { "accepted" } else { "rejected" }));
        }
    }
    Ok(format!("{n} traces agree with the oracle, 4 goldens hold"))
}

fn random_programs(dom: ChoiceDomain) -> Check {
    let shape = ProgShape {
        max_if_depth: 2,
        max_addr: 3,
        max_const: 3,
        max_writes: 2,
    };
    let ts = traces(&[-2, -1, 0, 1, 2], 2);
    for seed in 0..40u64 {
        let p: Prog = random_prog(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
        let v = validator_of(&p, dom).map_err(|e| format!("program {seed}: {e}"))?;
        compare(&server_of(&p), &v, &ts, dom).map_err(|e| format!("program {seed}: {e}"))?;
    }
    Ok(format!("40 programs x {} traces agree with the oracle", ts.len()))
}

fn etag_table() -> Check {
    let cases = [
        ("W/\"foo\"", "W/\"foo\"", Mode::Strong, false),
        ("W/\"bar\"", "\"bar\"", Mode::Weak, true),
        ("W/\"bar\"", "W/\"foo\"", Mode::Weak, false),
        ("\"foo\"", "\"foo\"", Mode::Strong, true),
    ];
    for (a, b, mode, want) in cases {
        if etag_match(a, b, mode) != want {
            return Err(format!("{a} {mode:?} {b} should be {want}"));
        }
    }
    Ok(format!("{} cases", cases.len()))
}

fn jexp_goldens() -> Check {
    let reg = Registry::default();
    let bar = Jpath::this().index(3).field("bar");
    let j2 = loose_get_jpath(&bar, &json!([{"foo": 21}, {"bar": 22}]));
    let j3 = loose_get_jpath(&bar, &json!([{"bar": 31}, {"baz": 32}, {"foo": 33}]));
    if j2 != Some(json!(22)) || j3 != Some(json!(31)) {
        return Err(format!("loose lookups gave {j2:?} and {j3:?}"));
    }
    let a2 = json!({"files": [{"name": "foo", "mode": 755}, {"name": "bar", "mode": 500}], "exitCode": 0});
    let files = Jpath::this().field("files").index(2);
    let e = Jexp::obj(vec![
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
    let got = eval_jexp(&e, &trace, &reg).map_err(|e| e.to_string())?;
    let want = json!({"command": "chmod", "args": [700, "bar"]});
    if got.as_ref() != Some(&want) {
        return Err(format!("chmod request evaluated to {got:?}"));
    }
    Ok("loose lookup and hole filling".into())
}

fn wire_examples() -> Check {
    let q = Packet::request(1, Request::put("/k", "new").with(PreconditionKind::IfMatch, "\"t0\""));
    let want = "PUT /k HTTP/1.1\r\nIf-Match: \"t0\"\r\nContent-Length: 3\r\n\r\nnew";
    let bytes = encode(&q);
    if bytes != want.as_bytes() {
        return Err(format!("request encoded as {:?}", String::from_utf8_lossy(&bytes)));
    }
    let mut r = Response::new(200);
    r.fields.push(("ETag".to_string(), "\"t1\"".to_string()));
    r.body = "hello".into();
    let r = Packet::response(2, r);
    for p in [q, r] {
        let back = decode(p.src, p.dst, &encode(&p)).map_err(|e| e.to_string())?;
        if back != p {
            return Err(format!("{p} did not survive a round trip"));
        }
    }
    Ok("encoding and round trips".into())
}

fn tester_smoke() -> Check {
    let correct = RunConfig {
        fuel: 200,
        ..RunConfig::default()
    };
    let rep = run_test(&correct);
    if !matches!(rep.verdict(), Verdict::Accept) {
        return Err(format!("correct server: {}", verdict_name(rep.verdict())));
    }
    let mutant = RunConfig {
        fuel: 1000,
        target: Target::InProcess(Some(Mutant::Skip404)),
        shrink_budget: 0,
        ..RunConfig::default()
    };
    let rep = run_test(&mutant);
    if !matches!(rep.verdict(), Verdict::Reject(_)) {
        return Err(format!("mutant M2: {}", verdict_name(rep.verdict())));
    }
    Ok(format!("correct server accepted, M2 rejected after {} messages", rep.run.outcome.messages()))
}
