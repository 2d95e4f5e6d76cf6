//! Test inputs: the JSON-shaped message representation, J-expressions whose
//! holes read earlier messages of the trace, generators, and shrinking.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::http::Sigma;

/// Concrete messages as JSON trees.
pub type Ir = Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("bad path {0:?}")]
    BadPath(String),
    #[error("bad J-expression: {0}")]
    BadJexp(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathStep {
    /// 1-based.
    Index(usize),
    Field(String),
}

/// A path into an IR tree, written `this#2@"name"`. Field names are JSON
/// string literals, so names containing `@`, `#` or quotes need no further
/// escaping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Jpath(pub Vec<PathStep>);

impl Jpath {
    pub fn this() -> Self {
        Jpath(Vec::new())
    }

    pub fn index(mut self, n: usize) -> Self {
        self.0.push(PathStep::Index(n));
        self
    }

    pub fn field(mut self, name: &str) -> Self {
        self.0.push(PathStep::Field(name.to_string()));
        self
    }
}

impl fmt::Display for Jpath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("this")?;
        for s in &self.0 {
            match s {
                PathStep::Index(n) => write!(f, "#{n}")?,
                PathStep::Field(name) => write!(f, "@{}", Value::String(name.clone()))?,
            }
        }
        Ok(())
    }
}

impl FromStr for Jpath {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::BadPath(s.to_string());
        let mut rest = s.strip_prefix("this").ok_or_else(bad)?;
        let mut steps = Vec::new();
        while let Some(c) = rest.chars().next() {
            match c {
                '#' => {
                    let digits: String = rest[1..].chars().take_while(char::is_ascii_digit).collect();
                    let n = digits.parse::<usize>().map_err(|_| bad())?;
                    steps.push(PathStep::Index(n));
                    rest = &rest[1 + digits.len()..];
                }
                '@' => {
                    let body = &rest[1..];
                    if !body.starts_with('"') {
                        return Err(bad());
                    }
                    let mut end = None;
                    let mut escaped = false;
                    for (i, ch) in body.char_indices().skip(1) {
                        match ch {
                            _ if escaped => escaped = false,
                            '\\' => escaped = true,
                            '"' => {
                                end = Some(i);
                                break;
                            }
                            _ => {}
                        }
                    }
                    let end = end.ok_or_else(bad)?;
                    let name: String = serde_json::from_str(&body[..=end]).map_err(|_| bad())?;
                    steps.push(PathStep::Field(name));
                    rest = &body[end + 1..];
                }
                _ => return Err(bad()),
            }
        }
        Ok(Jpath(steps))
    }
}

fn strict<'a>(steps: &[PathStep], j: &'a Ir) -> Option<&'a Ir> {
    match steps.split_first() {
        None => Some(j),
        Some((PathStep::Field(f), rest)) => strict(rest, j.as_object()?.get(f)?),
        Some((PathStep::Index(n), rest)) => strict(rest, j.as_array()?.get(n.checked_sub(1)?)?),
    }
}

pub fn get_jpath(p: &Jpath, j: &Ir) -> Option<Ir> {
    strict(&p.0, j).cloned()
}

fn loose<'a>(steps: &[PathStep], j: &'a Ir) -> Option<&'a Ir> {
    match steps.split_first() {
        None => Some(j),
        Some((PathStep::Field(f), rest)) => loose(rest, j.as_object()?.get(f)?),
        Some((PathStep::Index(n), rest)) => {
            let items = j.as_array()?;
            let at = n.checked_sub(1);
            at.and_then(|i| items.get(i))
                .and_then(|x| loose(rest, x))
                .or_else(|| {
                    items
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| Some(*i) != at)
                        .find_map(|(_, x)| loose(rest, x))
                })
        }
    }
}

/// Like [`get_jpath`], but an index step that fails falls back to the other
/// elements of the array, left to right.
pub fn loose_get_jpath(p: &Jpath, j: &Ir) -> Option<Ir> {
    loose(&p.0, j).cloned()
}

/// Recorded messages with their labels. Request `k` (from 0) is labelled
/// `2k+1` and its response one more.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelledTrace(pub Vec<(u64, Ir)>);

impl LabelledTrace {
    pub fn get_label(&self, label: u64) -> Option<&Ir> {
        self.0.iter().find(|(l, _)| *l == label).map(|(_, j)| j)
    }

    pub fn push(&mut self, label: u64, j: Ir) {
        self.0.push((label, j));
    }

    /// ETag values of recorded responses, first occurrence order.
    pub fn etags(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, j) in &self.0 {
            if let Some(t) = response_etag(j) {
                if !out.iter().any(|x| x == t) {
                    out.push(t.to_string());
                }
            }
        }
        out
    }

    /// Even labels whose message carries an ETag.
    pub fn etag_labels(&self) -> Vec<u64> {
        self.0
            .iter()
            .filter(|(l, j)| l % 2 == 0 && response_etag(j).is_some())
            .map(|(l, _)| *l)
            .collect()
    }
}

fn response_etag(j: &Ir) -> Option<&str> {
    j.get("fields")?.get("ETag")?.as_str()
}

pub type HoleFn = fn(&Ir) -> Ir;

/// Named functions that holes may apply.
#[derive(Clone)]
pub struct Registry(BTreeMap<String, HoleFn>);

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry(BTreeMap::new());
        r.register("id", |j| j.clone());
        r.register("mode_add_write", mode_add_write);
        r
    }
}

impl Registry {
    pub fn register(&mut self, name: &str, f: HoleFn) {
        self.0.insert(name.to_string(), f);
    }

    pub fn get(&self, name: &str) -> Result<HoleFn, HarnessError> {
        self.0.get(name).copied().ok_or_else(|| HarnessError::UnknownFunction(name.to_string()))
    }
}

/// ORs two modes written as decimal numerals of octal digits.
pub fn mode_bits_or(a: i64, b: i64) -> i64 {
    let (mut a, mut b, mut scale, mut out) = (a, b, 1, 0);
    while a > 0 || b > 0 {
        out += ((a % 10) | (b % 10)) * scale;
        a /= 10;
        b /= 10;
        scale *= 10;
    }
    out
}

pub fn mode_add_write(j: &Ir) -> Ir {
    match j.as_i64() {
        Some(n) if n >= 0 => Value::from(mode_bits_or(200, n)),
        _ => j.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hole {
    pub label: u64,
    pub path: Jpath,
    pub func: String,
}

/// IR with holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Jexp {
    Null,
    Bool(bool),
    Num(i64),
    Str(String),
    Arr(Vec<Jexp>),
    Obj(Vec<(String, Jexp)>),
    Hole(Hole),
}

impl Jexp {
    pub fn str(s: &str) -> Self {
        Jexp::Str(s.to_string())
    }

    pub fn hole(label: u64, path: Jpath, func: &str) -> Self {
        Jexp::Hole(Hole {
            label,
            path,
            func: func.to_string(),
        })
    }

    pub fn obj(fields: Vec<(&str, Jexp)>) -> Self {
        Jexp::Obj(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn field(&self, name: &str) -> Option<&Jexp> {
        match self {
            Jexp::Obj(fs) => fs.iter().find(|(k, _)| k == name).map(|(_, v)| v),
            _ => None,
        }
    }

    /// A copy with field `name` replaced, if it exists.
    pub fn with_field(&self, name: &str, value: Jexp) -> Jexp {
        match self {
            Jexp::Obj(fs) => Jexp::Obj(
                fs.iter()
                    .map(|(k, v)| (k.clone(), if k == name { value.clone() } else { v.clone() }))
                    .collect(),
            ),
            other => other.clone(),
        }
    }

    pub fn from_ir(j: &Ir) -> Jexp {
        match j {
            Value::Null => Jexp::Null,
            Value::Bool(b) => Jexp::Bool(*b),
            Value::Number(n) => Jexp::Num(n.as_i64().unwrap_or_default()),
            Value::String(s) => Jexp::Str(s.clone()),
            Value::Array(xs) => Jexp::Arr(xs.iter().map(Jexp::from_ir).collect()),
            Value::Object(m) => Jexp::Obj(m.iter().map(|(k, v)| (k.clone(), Jexp::from_ir(v))).collect()),
        }
    }

    pub fn has_holes(&self) -> bool {
        match self {
            Jexp::Hole(_) => true,
            Jexp::Arr(xs) => xs.iter().any(Jexp::has_holes),
            Jexp::Obj(fs) => fs.iter().any(|(_, v)| v.has_holes()),
            _ => false,
        }
    }

    /// Holes are `{"$label": l, "$path": "this..", "$fn": name}`; keys of
    /// literal objects that start with `$` get one more `$`.
    pub fn to_json(&self) -> Value {
        match self {
            Jexp::Null => Value::Null,
            Jexp::Bool(b) => Value::Bool(*b),
            Jexp::Num(n) => Value::from(*n),
            Jexp::Str(s) => Value::String(s.clone()),
            Jexp::Arr(xs) => Value::Array(xs.iter().map(Jexp::to_json).collect()),
            Jexp::Obj(fs) => Value::Object(
                fs.iter()
                    .map(|(k, v)| {
                        let k = if k.starts_with('$') { format!("${k}") } else { k.clone() };
                        (k, v.to_json())
                    })
                    .collect(),
            ),
            Jexp::Hole(h) => {
                let mut m = Map::new();
                m.insert("$label".into(), Value::from(h.label));
                m.insert("$path".into(), Value::String(h.path.to_string()));
                m.insert("$fn".into(), Value::String(h.func.clone()));
                Value::Object(m)
            }
        }
    }

    pub fn from_json(j: &Value) -> Result<Jexp, HarnessError> {
        let bad = |why: &str| HarnessError::BadJexp(format!("{why}: {j}"));
        Ok(match j {
            Value::Null => Jexp::Null,
            Value::Bool(b) => Jexp::Bool(*b),
            Value::Number(n) => Jexp::Num(n.as_i64().ok_or_else(|| bad("not an integer"))?),
            Value::String(s) => Jexp::Str(s.clone()),
            Value::Array(xs) => Jexp::Arr(xs.iter().map(Jexp::from_json).collect::<Result<_, _>>()?),
            Value::Object(m) if m.contains_key("$label") => {
                if m.len() != 3 {
                    return Err(bad("a hole has exactly $label, $path and $fn"));
                }
                let label = m["$label"].as_u64().ok_or_else(|| bad("$label"))?;
                let path = m["$path"].as_str().ok_or_else(|| bad("$path"))?.parse()?;
                let func = m.get("$fn").and_then(Value::as_str).ok_or_else(|| bad("$fn"))?;
                Jexp::hole(label, path, func)
            }
            Value::Object(m) => {
                let mut fs = Vec::new();
                for (k, v) in m {
                    let k = match k.strip_prefix('$') {
                        Some(rest) if rest.starts_with('$') => rest.to_string(),
                        Some(_) => return Err(bad("unescaped $ key")),
                        None => k.clone(),
                    };
                    fs.push((k, Jexp::from_json(v)?));
                }
                Jexp::Obj(fs)
            }
        })
    }
}

/// Evaluates one hole: the labelled message first, then every other message
/// in recording order.
pub fn eval_hole(h: &Hole, t: &LabelledTrace, reg: &Registry) -> Result<Option<Ir>, HarnessError> {
    let f = reg.get(&h.func)?;
    let first = t.0.iter().position(|(l, _)| *l == h.label);
    let order = first.into_iter().chain((0..t.0.len()).filter(|i| Some(*i) != first));
    Ok(order.filter_map(|i| loose_get_jpath(&h.path, &t.0[i].1)).next().map(|j| f(&j)))
}

fn fill(e: &Jexp, t: &LabelledTrace, reg: &Registry, missing: &mut bool) -> Result<Ir, HarnessError> {
    Ok(match e {
        Jexp::Hole(h) => match eval_hole(h, t, reg)? {
            Some(j) => j,
            None => {
                *missing = true;
                Value::Null
            }
        },
        Jexp::Arr(xs) => Value::Array(xs.iter().map(|x| fill(x, t, reg, missing)).collect::<Result<_, _>>()?),
        Jexp::Obj(fs) => {
            let mut m = Map::new();
            for (k, v) in fs {
                m.insert(k.clone(), fill(v, t, reg, missing)?);
            }
            Value::Object(m)
        }
        Jexp::Null => Value::Null,
        Jexp::Bool(b) => Value::Bool(*b),
        Jexp::Num(n) => Value::from(*n),
        Jexp::Str(s) => Value::String(s.clone()),
    })
}

/// Fills every hole from the trace; `None` if some hole cannot be filled.
pub fn eval_jexp(e: &Jexp, t: &LabelledTrace, reg: &Registry) -> Result<Option<Ir>, HarnessError> {
    let mut missing = false;
    let j = fill(e, t, reg, &mut missing)?;
    Ok((!missing).then_some(j))
}

/// Fills what it can; holes that cannot be filled become `null`.
pub fn instantiate(e: &Jexp, t: &LabelledTrace, reg: &Registry) -> Result<Ir, HarnessError> {
    fill(e, t, reg, &mut false)
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Chance, in percent, of taking a state or trace based heuristic.
    pub heuristic_percent: u32,
    /// Client endpoints are `1..=clients`.
    pub clients: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            heuristic_percent: 90,
            clients: 2,
        }
    }
}

fn heuristic<R: Rng>(rng: &mut R, cfg: &GenConfig) -> bool {
    rng.gen_range(0..100) < cfg.heuristic_percent
}

fn random_path<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(1..=2);
    let tail: String = (0..len).map(|_| *b"abcd".choose(rng).unwrap() as char).collect();
    format!("/{tail}")
}

fn random_etag<R: Rng>(rng: &mut R) -> String {
    let weak = if rng.gen_bool(0.5) { "W/" } else { "" };
    format!("{weak}\"tag-{}\"", rng.gen_range(0..8))
}

/// A path, and whether it came from the state.
pub fn gen_path_traced<R: Rng>(state: &Sigma, rng: &mut R, cfg: &GenConfig) -> (String, bool) {
    let paths: Vec<&str> = state.paths().collect();
    if !paths.is_empty() && heuristic(rng, cfg) {
        return (paths.choose(rng).unwrap().to_string(), true);
    }
    (random_path(rng), false)
}

pub fn gen_path<R: Rng>(state: &Sigma, rng: &mut R, cfg: &GenConfig) -> String {
    gen_path_traced(state, rng, cfg).0
}

/// An ETag, and whether it came from the trace.
pub fn gen_etag_traced<R: Rng>(trace: &LabelledTrace, rng: &mut R, cfg: &GenConfig) -> (String, bool) {
    let seen = trace.etags();
    if !seen.is_empty() && heuristic(rng, cfg) {
        return (seen.choose(rng).unwrap().clone(), true);
    }
    (random_etag(rng), false)
}

pub fn gen_etag<R: Rng>(trace: &LabelledTrace, rng: &mut R, cfg: &GenConfig) -> String {
    gen_etag_traced(trace, rng, cfg).0
}

/// A request whose precondition ETag usually refers to an earlier response.
pub fn gen_request_jexp<R: Rng>(state: &Sigma, trace: &LabelledTrace, rng: &mut R, cfg: &GenConfig) -> Jexp {
    let src = rng.gen_range(1..=cfg.clients.max(1));
    let put = rng.gen_bool(0.5);
    let target = gen_path(state, rng, cfg);
    let precondition = match rng.gen_range(0..3) {
        0 => Jexp::Null,
        k => {
            let labels = trace.etag_labels();
            let etag = if !labels.is_empty() && heuristic(rng, cfg) {
                let label = *labels.choose(rng).unwrap();
                Jexp::hole(label, Jpath::this().field("fields").field("ETag"), "id")
            } else {
                Jexp::Str(gen_etag(trace, rng, cfg))
            };
            let kind = if k == 1 { "If-Match" } else { "If-None-Match" };
            Jexp::obj(vec![("kind", Jexp::str(kind)), ("etag", etag)])
        }
    };
    let body = if put {
        format!("v{}", rng.gen_range(0..16))
    } else {
        String::new()
    };
    Jexp::obj(vec![
        ("src", Jexp::Num(src as i64)),
        ("method", Jexp::str(if put { "PUT" } else { "GET" })),
        ("target", Jexp::Str(target)),
        ("precondition", precondition),
        ("body", Jexp::Str(body)),
    ])
}

/// One input of a test: its label, how to compute it, and what it was last
/// computed to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub label: u64,
    pub jexp: Jexp,
    pub instance: Ir,
}

impl ScriptEntry {
    pub fn to_json(&self) -> Value {
        serde_json::json!({"label": self.label, "jexp": self.jexp.to_json(), "instance": self.instance})
    }
}

fn simplifications(e: &ScriptEntry) -> Vec<ScriptEntry> {
    let mut out = Vec::new();
    let with = |jexp: Jexp| ScriptEntry { jexp, ..e.clone() };
    if e.jexp.has_holes() {
        out.push(with(Jexp::from_ir(&e.instance)));
    }
    if let Some(Jexp::Str(body)) = e.jexp.field("body") {
        if !body.is_empty() {
            let half: String = body.chars().take(body.chars().count() / 2).collect();
            out.push(with(e.jexp.with_field("body", Jexp::Str(half))));
        }
    }
    if matches!(e.jexp.field("precondition"), Some(p) if *p != Jexp::Null) {
        out.push(with(e.jexp.with_field("precondition", Jexp::Null)));
    }
    out
}

/// Smaller variants of `inputs`: every single-element drop, then every
/// single simplification. Labels are never changed.
pub fn shrink_candidates(inputs: &[ScriptEntry]) -> Vec<Vec<ScriptEntry>> {
    let mut out = Vec::new();
    for i in 0..inputs.len() {
        let mut c = inputs.to_vec();
        c.remove(i);
        out.push(c);
    }
    for (i, e) in inputs.iter().enumerate() {
        for s in simplifications(e) {
            let mut c = inputs.to_vec();
            c[i] = s;
            out.push(c);
        }
    }
    out
}

/// Greedy shrinking. `runner` replays a candidate and, if it still fails,
/// returns the inputs that run consumed (re-instantiated on its own trace).
/// At most `budget` candidates are tried.
pub fn shrink_loop(
    failing: Vec<ScriptEntry>,
    mut runner: impl FnMut(&[ScriptEntry]) -> Option<Vec<ScriptEntry>>,
    budget: usize,
) -> Vec<ScriptEntry> {
    let mut cur = failing;
    let mut runs = 0;
    'outer: loop {
        for cand in shrink_candidates(&cur) {
            if runs >= budget {
                break 'outer;
            }
            runs += 1;
            if let Some(next) = runner(&cand) {
                cur = next;
                continue 'outer;
            }
        }
        break;
    }
    cur
}
