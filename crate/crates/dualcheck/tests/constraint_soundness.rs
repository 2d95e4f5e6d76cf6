//! The tester's symbolic ETag reasoning against a concrete server that
//! enumerates every ETag it could have chosen.

use std::collections::BTreeMap;

use proptest::prelude::*;

use dualcheck::http::{Packet, PreconditionKind, Request, Response, Sigma};
use dualcheck::tester::{explain, http_tester, Observation};

const ALPHABET: [&str; 4] = ["\"a\"", "\"b\"", "W/\"a\"", "W/\"b\""];
/// Stands for every tag that no request mentions.
const FRESH: &str = "\"fresh\"";
const PATHS: [&str; 2] = ["/a", "/b"];
const BODIES: [&str; 2] = ["x", "y"];

#[derive(Debug, Clone, Copy)]
enum Pre {
    None,
    IfMatch(usize),
    IfNoneMatch(usize),
}

#[derive(Debug, Clone)]
struct Req {
    put: bool,
    path: usize,
    pre: Pre,
    body: usize,
}

impl Req {
    fn to_request(&self) -> Request {
        let path = PATHS[self.path];
        let q = if self.put {
            Request::put(path, BODIES[self.body])
        } else {
            Request::get(path)
        };
        match self.pre {
            Pre::None => q,
            Pre::IfMatch(t) => q.with(PreconditionKind::IfMatch, ALPHABET[t]),
            Pre::IfNoneMatch(t) => q.with(PreconditionKind::IfNoneMatch, ALPHABET[t]),
        }
    }
}

fn strong_eq(a: &str, b: &str) -> bool {
    !a.starts_with("W/") && !b.starts_with("W/") && a == b
}

fn weak_eq(a: &str, b: &str) -> bool {
    a.trim_start_matches("W/") == b.trim_start_matches("W/")
}

/// Path to (content, etag); `None` is a resource without an ETag.
type State = BTreeMap<&'static str, (String, Option<&'static str>)>;

#[derive(Debug, Clone, PartialEq)]
struct Resp {
    status: u16,
    etag: Option<&'static str>,
    body: String,
}

impl Resp {
    fn code(status: u16) -> Resp {
        Resp {
            status,
            etag: None,
            body: String::new(),
        }
    }

    fn to_response(&self) -> Response<String> {
        let mut r = Response::new(self.status);
        r.body = self.body.clone();
        if let Some(t) = self.etag {
            r.fields.push(("ETag".into(), t.to_string()));
        }
        r
    }
}

fn choices() -> Vec<Option<&'static str>> {
    ALPHABET.iter().copied().chain([FRESH]).map(Some).chain([None]).collect()
}

/// Every (response, next state) the concrete server can produce.
fn handle(s: &State, q: &Req) -> Vec<(Resp, State)> {
    let path = PATHS[q.path];
    let cur = s.get(path);
    let tag = |t: usize| ALPHABET[t];
    let matches = |f: fn(&str, &str) -> bool, t: usize| cur.and_then(|r| r.1).is_some_and(|e| f(tag(t), e));
    if !q.put {
        let Some((content, etag)) = cur else {
            return vec![(Resp::code(404), s.clone())];
        };
        let ok = Resp {
            status: 200,
            etag: *etag,
            body: content.clone(),
        };
        let resp = match q.pre {
            Pre::None => ok,
            Pre::IfNoneMatch(t) if matches(weak_eq, t) => Resp::code(304),
            Pre::IfNoneMatch(_) => ok,
            Pre::IfMatch(t) if matches(strong_eq, t) => ok,
            Pre::IfMatch(_) => Resp::code(412),
        };
        return vec![(resp, s.clone())];
    }
    let proceed = match (q.pre, cur) {
        (Pre::None, _) => true,
        (Pre::IfMatch(_), None) => false,
        (Pre::IfMatch(t), Some(_)) => matches(strong_eq, t),
        (Pre::IfNoneMatch(t), _) => !matches(weak_eq, t),
    };
    if !proceed {
        return vec![(Resp::code(412), s.clone())];
    }
    choices()
        .into_iter()
        .map(|etag| {
            let mut next = s.clone();
            next.insert(path, (BODIES[q.body].to_string(), etag));
            (Resp::code(204), next)
        })
        .collect()
}

fn brute_force(s: &State, trace: &[(Req, Resp)]) -> bool {
    let Some(((q, r), rest)) = trace.split_first() else {
        return true;
    };
    handle(s, q).into_iter().any(|(r2, s2)| r2 == *r && brute_force(&s2, rest))
}

fn tester_accepts(trace: &[(Req, Resp)]) -> bool {
    let obs: Vec<Observation> = trace
        .iter()
        .flat_map(|(q, r)| {
            [
                Observation::Sent(Packet::request(1, q.to_request())),
                Observation::Received(Packet::response(1, r.to_response())),
            ]
        })
        .collect();
    explain(http_tester(Sigma::default()), &obs, 12)
}

#[derive(Debug, Clone)]
enum Answer {
    /// What the concrete server answers under the `n`th choice.
    Honest(usize),
    Forged(u16, Option<usize>, usize),
}

fn arb_req() -> impl Strategy<Value = Req> {
    let pre = prop_oneof![
        Just(Pre::None),
        (0..ALPHABET.len()).prop_map(Pre::IfMatch),
        (0..ALPHABET.len()).prop_map(Pre::IfNoneMatch),
    ];
    (any::<bool>(), 0..PATHS.len(), pre, 0..BODIES.len()).prop_map(|(put, path, pre, body)| Req {
        put,
        path,
        pre,
        body,
    })
}

fn arb_answer() -> impl Strategy<Value = Answer> {
    let status = prop::sample::select(vec![200u16, 204, 304, 404, 412]);
    let etag = prop::option::of(0..ALPHABET.len());
    prop_oneof![
        3 => (0..6usize).prop_map(Answer::Honest),
        1 => (status, etag, 0..3usize).prop_map(|(s, e, b)| Answer::Forged(s, e, b)),
    ]
}

/// Builds a single-client trace, mostly following the concrete server.
fn build(steps: &[(Req, Answer)]) -> Vec<(Req, Resp)> {
    let mut s = State::new();
    let mut out = Vec::new();
    for (q, a) in steps {
        let outcomes = handle(&s, q);
        let resp = match a {
            Answer::Honest(n) => {
                let (r, s2) = outcomes[n % outcomes.len()].clone();
                s = s2;
                r
            }
            Answer::Forged(status, etag, body) => Resp {
                status: *status,
                etag: etag.map(|t| ALPHABET[t]),
                body: ["", "x", "y"][*body].to_string(),
            },
        };
        out.push((q.clone(), resp));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn tester_agrees_with_concrete_enumeration(steps in prop::collection::vec((arb_req(), arb_answer()), 1..=3)) {
        let trace = build(&steps);
        prop_assert_eq!(tester_accepts(&trace), brute_force(&State::new(), &trace), "{:?}", trace);
    }
}

fn put(path: usize, body: usize, pre: Pre) -> Req {
    Req {
        put: true,
        path,
        pre,
        body,
    }
}

fn get(path: usize, pre: Pre) -> Req {
    Req {
        put: false,
        path,
        pre,
        body: 0,
    }
}

fn ok(etag: Option<&'static str>, body: &str) -> Resp {
    Resp {
        status: 200,
        etag,
        body: body.into(),
    }
}

#[test]
fn weak_tag_cannot_satisfy_if_match() {
    // the tag is revealed as weak, so a later If-Match can never succeed
    let t = vec![
        (put(0, 0, Pre::None), Resp::code(204)),
        (get(0, Pre::None), ok(Some("W/\"a\""), "x")),
        (put(0, 1, Pre::IfMatch(0)), Resp::code(204)),
    ];
    assert!(!brute_force(&State::new(), &t));
    assert!(!tester_accepts(&t));
}

#[test]
fn unrevealed_tag_explains_either_outcome() {
    for (status, body) in [(304, ""), (200, "x")] {
        let t = vec![
            (put(1, 0, Pre::None), Resp::code(204)),
            (get(1, Pre::IfNoneMatch(2)), Resp { status, etag: None, body: body.into() }),
        ];
        // a 200 without an ETag means the resource has none
        assert!(brute_force(&State::new(), &t), "{status}");
        assert!(tester_accepts(&t), "{status}");
    }
}

#[test]
fn precondition_outcomes_must_be_consistent() {
    let t = vec![
        (put(0, 0, Pre::None), Resp::code(204)),
        (get(0, Pre::IfNoneMatch(0)), Resp::code(304)),
        (get(0, Pre::IfMatch(1)), ok(Some("\"b\""), "x")),
    ];
    assert!(!brute_force(&State::new(), &t));
    assert!(!tester_accepts(&t));
}

#[test]
fn sampled_traces_cover_both_verdicts() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let strat = prop::collection::vec((arb_req(), arb_answer()), 1..=3);
    let mut runner = TestRunner::deterministic();
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..500 {
        let trace = build(&strat.new_tree(&mut runner).unwrap().current());
        let want = brute_force(&State::new(), &trace);
        assert_eq!(tester_accepts(&trace), want, "{trace:?}");
        if want {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    eprintln!("accepted {accepted}, rejected {rejected}");
    assert!(accepted >= 100 && rejected >= 100);
}
