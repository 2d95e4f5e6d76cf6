//! Dualization of Prog server models into symbolic validators.

use std::collections::{HashMap, HashSet};

use crate::prog::{Addr, Op, Prog, SExp, DEFAULT_ADDRESSES};
use crate::qac::{ChoiceDomain, ValidatorModel};
use crate::symbolic::{
    fresh, print_constraints, solvable, split, translate_sexp, Cmp, Constraint, VExp, ValidationState, Var,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DualizeError {
    #[error("division by a non-constant or zero divisor `{0}` is not supported")]
    UnsupportedDivision(SExp),
    #[error("address !{0} is outside the configured address space 0..{1}")]
    AddressOutOfRange(Addr, u32),
    #[error("validator state count {0} exceeds the configured cap {1}")]
    StateCapExceeded(usize, usize),
}

/// One validation state per live execution hypothesis. An empty set only
/// appears after a rejecting step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualValidatorState {
    pub states: Vec<ValidationState>,
}

/// `{(_ ↦ #0, {#0 = 0})}` over `addresses` cells.
pub fn initial_dual_state(addresses: u32) -> DualValidatorState {
    let vs = vec![Var(0); addresses as usize];
    let cs = vec![Constraint::new(VExp::var(0), Cmp::Eq, VExp::Const(0))];
    DualValidatorState {
        states: vec![ValidationState::new(vs, cs)],
    }
}

pub fn havoc(d: Addr, mut v: ValidationState) -> ValidationState {
    let x = fresh(&mut v);
    v.vs[d as usize] = x;
    v
}

fn check_division(e: &SExp) -> Result<(), DualizeError> {
    match e {
        SExp::Const(_) | SExp::Read(_) => Ok(()),
        SExp::BinOp(op, l, r) => {
            if *op == Op::Div && !matches!(**r, SExp::Const(z) if z != 0) {
                return Err(DualizeError::UnsupportedDivision((**r).clone()));
            }
            check_division(l)?;
            check_division(r)
        }
    }
}

pub fn write_rule(d: Addr, e: &SExp, mut v: ValidationState) -> Result<ValidationState, DualizeError> {
    check_division(e)?;
    let rhs = translate_sexp(e, &v.vs);
    let x = fresh(&mut v);
    v.vs[d as usize] = x;
    v.add(Constraint::new(VExp::VarRef(x), Cmp::Eq, rhs));
    Ok(v)
}

pub fn exec(p: &Prog, v: ValidationState) -> Result<Vec<ValidationState>, DualizeError> {
    let mut out = Vec::new();
    exec_into(p, v, &mut out)?;
    Ok(out)
}

fn exec_into(p: &Prog, v: ValidationState, out: &mut Vec<ValidationState>) -> Result<(), DualizeError> {
    match p {
        Prog::Return => out.push(v),
        Prog::Write(d, e, rest) => exec_into(rest, write_rule(*d, e, v)?, out)?,
        Prog::IfLe(a, b, t, e) => {
            let ta = translate_sexp(a, &v.vs);
            let tb = translate_sexp(b, &v.vs);
            let mut vt = v.clone();
            vt.add(Constraint::new(ta.clone(), Cmp::Le, tb.clone()));
            exec_into(t, vt, out)?;
            let mut ve = v;
            ve.add(Constraint::new(tb, Cmp::Lt, ta));
            exec_into(e, ve, out)?;
        }
    }
    Ok(())
}

/// Drops constraints that cannot affect later steps: components of
/// non-ground variables none of which is held in memory, and ground-only
/// constraints unrelated to what is kept. `v` must be solvable.
pub fn forget_unreachable(v: ValidationState) -> ValidationState {
    let Some(sp) = split(&v.cs) else {
        return v;
    };
    let mut relevant: HashSet<Var> = v.vs.iter().copied().collect();
    let mut keep = vec![false; v.cs.len()];
    loop {
        let mut changed = false;
        for g in &sp.groups {
            if keep[g[0]] {
                continue;
            }
            let hit = g.iter().any(|&i| {
                v.cs[i]
                    .vars()
                    .iter()
                    .any(|x| sp.ground[x.0 as usize].is_none() && relevant.contains(x))
            });
            if hit {
                for &i in g {
                    keep[i] = true;
                    relevant.extend(v.cs[i].vars());
                }
                changed = true;
            }
        }
        for &i in &sp.fixed {
            if !keep[i] && v.cs[i].vars().iter().any(|x| relevant.contains(x)) {
                keep[i] = true;
                relevant.extend(v.cs[i].vars());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let cs = v.cs.iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c.clone()).collect();
    ValidationState { cs, ..v }
}

/// Rejection explanation: the constraint set of every branch that became
/// unsatisfiable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub branches: Vec<String>,
}

/// Validator configuration.
#[derive(Debug, Clone)]
pub struct Dualizer {
    pub prog: Prog,
    pub dom: ChoiceDomain,
    pub addresses: u32,
    /// Hard limit on live states after a step; exceeding it is an error.
    pub state_cap: Option<usize>,
    /// Rename variables canonically and merge identical states.
    pub canonicalize: bool,
    /// Record the constraint sets of dead branches in rejections.
    pub explain: bool,
}

impl Dualizer {
    pub fn new(prog: Prog, dom: ChoiceDomain) -> Result<Self, DualizeError> {
        let d = Dualizer {
            prog,
            dom,
            addresses: DEFAULT_ADDRESSES,
            state_cap: None,
            canonicalize: false,
            explain: true,
        };
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<(), DualizeError> {
        fn divs(p: &Prog) -> Result<(), DualizeError> {
            match p {
                Prog::Return => Ok(()),
                Prog::Write(_, e, rest) => {
                    check_division(e)?;
                    divs(rest)
                }
                Prog::IfLe(a, b, t, e) => {
                    check_division(a)?;
                    check_division(b)?;
                    divs(t)?;
                    divs(e)
                }
            }
        }
        divs(&self.prog)?;
        let need = self.prog.max_address().unwrap_or(0).max(1);
        if need >= self.addresses {
            return Err(DualizeError::AddressOutOfRange(need, self.addresses));
        }
        Ok(())
    }

    pub fn initial(&self) -> DualValidatorState {
        initial_dual_state(self.addresses)
    }

    /// One validator step. `Ok(Err(_))` is a rejection.
    pub fn step(
        &self,
        q: i64,
        a: i64,
        dv: &DualValidatorState,
    ) -> Result<Result<DualValidatorState, Rejection>, DualizeError> {
        let mut next = Vec::new();
        let mut dead = Vec::new();
        for v in &dv.states {
            let v = havoc(0, v.clone());
            let v = write_rule(1, &SExp::Const(q), v)?;
            for mut v in exec(&self.prog, v)? {
                let out = v.var_at(1);
                v.add(Constraint::new(VExp::VarRef(out), Cmp::Eq, VExp::Const(a)));
                if solvable(&v.cs, self.dom).is_some() {
                    next.push(forget_unreachable(v));
                } else if self.explain {
                    dead.push(print_constraints(&v.cs));
                }
            }
        }
        if self.canonicalize {
            next = canonical_dedup(next);
        }
        if let Some(cap) = self.state_cap {
            if next.len() > cap {
                return Err(DualizeError::StateCapExceeded(next.len(), cap));
            }
        }
        if next.is_empty() {
            Ok(Err(Rejection { branches: dead }))
        } else {
            Ok(Ok(DualValidatorState { states: next }))
        }
    }

    pub fn accepts(&self, t: &[(i64, i64)]) -> Result<bool, DualizeError> {
        let mut dv = self.initial();
        for &(q, a) in t {
            match self.step(q, a, &dv)? {
                Ok(next) => dv = next,
                Err(_) => return Ok(false),
            }
        }
        Ok(true)
    }
}

pub fn vstep(p: &Prog, q: i64, a: i64, dv: &DualValidatorState, dom: ChoiceDomain) -> Option<DualValidatorState> {
    let d = Dualizer {
        prog: p.clone(),
        dom,
        addresses: dv.states.first().map(|v| v.vs.len() as u32).unwrap_or(DEFAULT_ADDRESSES),
        state_cap: None,
        canonicalize: false,
        explain: true,
    };
    d.step(q, a, dv).ok()?.ok()
}

/// Packages the dualized validator as a plain validator model. Programs
/// dividing by anything but a nonzero constant are refused.
pub fn validator_of(p: &Prog, dom: ChoiceDomain) -> Result<ValidatorModel<DualValidatorState>, DualizeError> {
    let d = Dualizer {
        explain: false,
        ..Dualizer::new(p.clone(), dom)?
    };
    let init = d.initial();
    Ok(ValidatorModel::new(init, move |q, a, dv| {
        d.step(q, a, dv).expect("program checked at construction").ok()
    }))
}

fn canonical_dedup(states: Vec<ValidationState>) -> Vec<ValidationState> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for v in states {
        let c = canonical(&v);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Renames variables in order of first occurrence (vs first, then cs).
fn canonical(v: &ValidationState) -> ValidationState {
    let mut map: HashMap<Var, Var> = HashMap::new();
    let mut rename = |x: Var, map: &mut HashMap<Var, Var>| {
        let n = map.len() as u32;
        *map.entry(x).or_insert(Var(n))
    };
    let vs: Vec<Var> = v.vs.iter().map(|&x| rename(x, &mut map)).collect();
    fn re(e: &VExp, map: &mut HashMap<Var, Var>, rename: &mut dyn FnMut(Var, &mut HashMap<Var, Var>) -> Var) -> VExp {
        match e {
            VExp::Const(z) => VExp::Const(*z),
            VExp::VarRef(x) => VExp::VarRef(rename(*x, map)),
            VExp::BinOp(op, l, r) => VExp::bin(*op, re(l, map, rename), re(r, map, rename)),
        }
    }
    let cs: Vec<Constraint> = v
        .cs
        .iter()
        .map(|c| Constraint::new(re(&c.left, &mut map, &mut rename), c.cmp, re(&c.right, &mut map, &mut rename)))
        .collect();
    ValidationState::new(vs, cs)
}
