use std::collections::BTreeMap;
use std::fmt;

use im::Vector;

use crate::http::{
    etag_match, parse_etag, throw, ETagExp, Mode, NtEvent, ObsEvent, Packet, Payload, Reply, Resource, Sigma, SymPacket,
};
use crate::itree::{ret, trigger, ITree};
use crate::symbolic::Var;

/// `etag_match(lit, x, mode) == holds` for the variable it is attached to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtagFact {
    pub lit: String,
    pub mode: Mode,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarKnowledge {
    pub known: Option<String>,
    pub facts: Vec<EtagFact>,
}

impl VarKnowledge {
    fn admits(&self, value: &str) -> bool {
        self.facts.iter().all(|f| etag_match(&f.lit, value, f.mode) == f.holds)
    }

    /// Whether some ETag satisfies all facts. An unknown variable can always
    /// take a tag that matches nothing, so only positive facts narrow it.
    pub fn satisfiable(&self) -> bool {
        if let Some(v) = &self.known {
            return self.admits(v);
        }
        let Some(pos) = self.facts.iter().find(|f| f.holds) else {
            return true;
        };
        let (weak, opaque) = parse_etag(&pos.lit);
        let candidates = match pos.mode {
            Mode::Strong if weak => vec![],
            Mode::Strong => vec![pos.lit.clone()],
            Mode::Weak => vec![opaque.to_string(), format!("W/{opaque}")],
        };
        candidates.iter().any(|c| !c.is_empty() && self.admits(c))
    }
}

/// What the tester knows about the server's chosen ETags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EtagConstraintState {
    pub next: u32,
    pub vars: BTreeMap<Var, VarKnowledge>,
}

impl EtagConstraintState {
    pub fn fresh(&mut self) -> Var {
        let x = Var(self.next);
        self.next += 1;
        self.vars.insert(x, VarKnowledge::default());
        x
    }

    pub fn satisfiable(&self) -> bool {
        self.vars.values().all(VarKnowledge::satisfiable)
    }

    fn entry(&mut self, x: Var) -> &mut VarKnowledge {
        self.vars.entry(x).or_default()
    }

    /// Records `etag_match(lit, x, mode) == holds`.
    pub fn assume(&mut self, x: Var, lit: &str, mode: Mode, holds: bool) -> bool {
        let k = self.entry(x);
        k.facts.push(EtagFact {
            lit: lit.to_string(),
            mode,
            holds,
        });
        k.satisfiable()
    }

    /// Records that `x` was observed as `value`.
    pub fn reveal(&mut self, x: Var, value: &str) -> bool {
        let k = self.entry(x);
        match &k.known {
            Some(v) if v != value => false,
            _ => {
                k.known = Some(value.to_string());
                k.satisfiable()
            }
        }
    }
}

struct Renaming(Vec<Var>);

impl Renaming {
    fn exp(&mut self, e: &ETagExp) -> ETagExp {
        match e {
            ETagExp::Const(c) => ETagExp::Const(c.clone()),
            ETagExp::Var(x) => {
                let i = match self.0.iter().position(|y| y == x) {
                    Some(i) => i,
                    None => {
                        self.0.push(*x);
                        self.0.len() - 1
                    }
                };
                ETagExp::Var(Var(i as u32))
            }
            ETagExp::Compare(lit, inner, mode) => ETagExp::Compare(lit.clone(), Box::new(self.exp(inner)), *mode),
        }
    }

    fn packet(&mut self, p: &SymPacket) -> SymPacket {
        let payload = match &p.payload {
            Payload::Request(r) => Payload::Request(r.clone()),
            Payload::Response(r) => {
                let mut r = r.clone();
                for (_, v) in r.fields.iter_mut() {
                    *v = self.exp(v);
                }
                Payload::Response(r)
            }
        };
        Packet { payload, ..p.clone() }
    }
}

impl EtagConstraintState {
    /// A canonical description of the tester's state when the server waits
    /// for a request: the resources and packets in flight with variables
    /// numbered by first occurrence, plus what is known about those
    /// variables. Unreachable variables are left out.
    pub fn state_key(&self, sigma: &Sigma, in_flight: &Vector<SymPacket>) -> String {
        let mut rn = Renaming(Vec::new());
        let resources: Vec<(String, Resource)> = sigma
            .0
            .iter()
            .map(|(path, r)| {
                let etag = rn.exp(&r.etag);
                (path.clone(), Resource { content: r.content.clone(), etag })
            })
            .collect();
        let packets: Vec<SymPacket> = in_flight.iter().map(|p| rn.packet(p)).collect();
        let knowledge: Vec<(Option<String>, Vec<String>)> = rn
            .0
            .iter()
            .map(|x| {
                let k = self.vars.get(x).cloned().unwrap_or_default();
                let mut facts: Vec<String> = k.facts.iter().map(|f| format!("{f:?}")).collect();
                facts.sort();
                facts.dedup();
                (k.known, facts)
            })
            .collect();
        format!("{resources:?}|{packets:?}|{knowledge:?}")
    }
}

impl fmt::Display for EtagConstraintState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (x, k) in &self.vars {
            if let Some(v) = &k.known {
                parts.push(format!("{x} = {v}"));
            }
            for fact in &k.facts {
                let op = match (fact.holds, fact.mode) {
                    (true, Mode::Strong) => "=strong=",
                    (true, Mode::Weak) => "=weak=",
                    (false, Mode::Strong) => "!=strong=",
                    (false, Mode::Weak) => "!=weak=",
                };
                parts.push(format!("{} {op} {x}", fact.lit));
            }
        }
        write!(f, "{{{}}}", parts.join("; "))
    }
}

fn guard(v: &mut EtagConstraintState, px: &SymPacket, p: &Packet) -> Result<(), String> {
    if px.src != p.src || px.dst != p.dst {
        return Err(format!("expected a packet {} -> {}, observed {} -> {}", px.src, px.dst, p.src, p.dst));
    }
    match (&px.payload, &p.payload) {
        (Payload::Request(a), Payload::Request(b)) if a == b => Ok(()),
        (Payload::Response(a), Payload::Response(b)) => {
            if a.status != b.status {
                return Err(format!("expected status {}, observed {}", a.status, b.status));
            }
            if a.body != b.body {
                return Err(format!("expected body {:?}, observed {:?}", a.body, b.body));
            }
            let mut names_a: Vec<String> = a.fields.iter().map(|(n, _)| n.to_ascii_lowercase()).collect();
            let mut names_b: Vec<String> = b.fields.iter().map(|(n, _)| n.to_ascii_lowercase()).collect();
            names_a.sort();
            names_b.sort();
            if names_a != names_b {
                return Err(format!("expected fields {names_a:?}, observed {names_b:?}"));
            }
            for (name, exp) in &a.fields {
                let seen = b.field(name).expect("field sets are equal");
                let ok = match exp {
                    ETagExp::Const(c) => c == seen,
                    ETagExp::Var(x) => v.reveal(*x, seen),
                    ETagExp::Compare(..) => false,
                };
                if !ok {
                    return Err(format!("{name}: {exp} cannot be {seen}"));
                }
            }
            Ok(())
        }
        _ => Err("packet kinds differ".to_string()),
    }
}

fn unify_cond(v: &mut EtagConstraintState, bx: &ETagExp, b: bool) -> Result<(), String> {
    let ETagExp::Compare(t, tx, mode) = bx else {
        return Err(format!("{bx} is not a condition"));
    };
    let ok = match tx.as_ref() {
        ETagExp::Const(c) => etag_match(t, c, *mode) == b,
        ETagExp::Var(x) => v.assume(*x, t, *mode, b),
        ETagExp::Compare(..) => false,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("({bx}) = {b}"))
    }
}

/// Interprets Choice, Guard and Unify over the constraint state; every
/// other observer event passes through. A contradiction throws.
pub fn unify(e: ObsEvent, mut v: EtagConstraintState) -> ITree<NtEvent, (EtagConstraintState, Reply)> {
    let pass = |ev: NtEvent, v: EtagConstraintState| trigger(ev).map(move |r| (v.clone(), r));
    let checked = |res: Result<(), String>, v: EtagConstraintState| match res {
        Ok(()) => ret((v, Reply::Unit)),
        Err(why) => throw(NtEvent::Throw(format!("Conflict: {why} under {v}"))),
    };
    match e {
        ObsEvent::FromObserver(s, in_flight) => {
            let key = v.state_key(&s, &in_flight);
            pass(NtEvent::FromObserver(s, key), v)
        }
        ObsEvent::ToObserver => pass(NtEvent::ToObserver, v),
        ObsEvent::Or => pass(NtEvent::Or, v),
        ObsEvent::Choice => {
            let x = v.fresh();
            ret((v, Reply::Exp(ETagExp::Var(x))))
        }
        ObsEvent::Guard(px, p) => {
            let res = guard(&mut v, &px, &p);
            checked(res, v)
        }
        ObsEvent::Unify(bx, b) => {
            let res = unify_cond(&mut v, &bx, b);
            checked(res, v)
        }
    }
}
