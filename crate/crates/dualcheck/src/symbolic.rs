//! Symbolic variables, validator expressions, constraints and a bounded
//! constraint solver.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::prog::{self, Addr, DivByZero, Op, ParseError, SExp, Tok};
use crate::qac::ChoiceDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VExp {
    Const(i64),
    VarRef(Var),
    BinOp(Op, Arc<VExp>, Arc<VExp>),
}

impl VExp {
    pub fn bin(op: Op, l: VExp, r: VExp) -> VExp {
        VExp::BinOp(op, Arc::new(l), Arc::new(r))
    }

    pub fn var(id: u32) -> VExp {
        VExp::VarRef(Var(id))
    }

    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            VExp::Const(_) => {}
            VExp::VarRef(x) => out.push(*x),
            VExp::BinOp(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
        }
    }

    fn max_var(&self) -> Option<Var> {
        match self {
            VExp::Const(_) => None,
            VExp::VarRef(x) => Some(*x),
            VExp::BinOp(_, l, r) => l.max_var().max(r.max_var()),
        }
    }

    /// Evaluates against a partial assignment indexed by variable id.
    fn eval_partial(&self, vals: &[Option<i64>]) -> Option<Result<i64, DivByZero>> {
        match self {
            VExp::Const(z) => Some(Ok(*z)),
            VExp::VarRef(x) => vals.get(x.0 as usize).copied().flatten().map(Ok),
            VExp::BinOp(op, l, r) => {
                let l = l.eval_partial(vals)?;
                let r = r.eval_partial(vals)?;
                Some(l.and_then(|l| r.and_then(|r| op.apply(l, r))))
            }
        }
    }
}

impl fmt::Display for VExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VExp::Const(z) => write!(f, "{z}"),
            VExp::VarRef(x) => write!(f, "{x}"),
            VExp::BinOp(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
}

impl Cmp {
    pub fn holds(self, l: i64, r: i64) -> bool {
        match self {
            Cmp::Lt => l < r,
            Cmp::Le => l <= r,
            Cmp::Eq => l == r,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub left: VExp,
    pub cmp: Cmp,
    pub right: VExp,
}

impl Constraint {
    pub fn new(left: VExp, cmp: Cmp, right: VExp) -> Self {
        Constraint { left, cmp, right }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.left.vars(&mut out);
        self.right.vars(&mut out);
        out
    }

    pub fn check(&self, asgn: &Assignment) -> Result<bool, DivByZero> {
        Ok(self.cmp.holds(vexp_eval(&self.left, asgn)?, vexp_eval(&self.right, asgn)?))
    }

    /// `Some(false)` on a violated comparison or a division by zero.
    fn check_partial(&self, vals: &[Option<i64>]) -> Option<bool> {
        let l = self.left.eval_partial(vals)?;
        let r = self.right.eval_partial(vals)?;
        Some(match (l, r) {
            (Ok(l), Ok(r)) => self.cmp.holds(l, r),
            _ => false,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.cmp.symbol(), self.right)
    }
}

/// Prints a constraint set as `{c1, c2, ...}`.
pub fn print_constraints(cs: &[Constraint]) -> String {
    let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Total mapping from variables to integers; unmapped variables are 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment(pub BTreeMap<Var, i64>);

impl Assignment {
    pub fn get(&self, x: Var) -> i64 {
        self.0.get(&x).copied().unwrap_or(0)
    }

    pub fn set(&mut self, x: Var, v: i64) {
        self.0.insert(x, v);
    }
}

pub fn vexp_eval(e: &VExp, asgn: &Assignment) -> Result<i64, DivByZero> {
    match e {
        VExp::Const(z) => Ok(*z),
        VExp::VarRef(x) => Ok(asgn.get(*x)),
        VExp::BinOp(op, l, r) => op.apply(vexp_eval(l, asgn)?, vexp_eval(r, asgn)?),
    }
}

/// The outcome of checking an assignment against a constraint set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated(Constraint),
    DivByZero(Constraint),
}

pub fn check_all(asgn: &Assignment, cs: &[Constraint]) -> Verdict {
    for c in cs {
        match c.check(asgn) {
            Ok(true) => {}
            Ok(false) => return Verdict::Violated(c.clone()),
            Err(DivByZero) => return Verdict::DivByZero(c.clone()),
        }
    }
    Verdict::Satisfied
}

pub fn satisfies(asgn: &Assignment, cs: &[Constraint]) -> bool {
    check_all(asgn, cs) == Verdict::Satisfied
}

/// The first defining equation of each variable, indexed by id: the first
/// equation `#x = e` (either side) whose right-hand side only mentions
/// variables with smaller ids.
fn definitions<'a>(cs: &[&'a Constraint], width: usize) -> Vec<Option<(usize, &'a VExp)>> {
    let mut def: Vec<Option<(usize, &VExp)>> = vec![None; width];
    for (i, c) in cs.iter().enumerate() {
        if c.cmp != Cmp::Eq {
            continue;
        }
        for (lhs, rhs) in [(&c.left, &c.right), (&c.right, &c.left)] {
            if let VExp::VarRef(x) = lhs {
                let slot = &mut def[x.0 as usize];
                if slot.is_none() && rhs.max_var().is_none_or(|m| m < *x) {
                    *slot = Some((i, rhs));
                    break;
                }
            }
        }
    }
    def
}

/// A constraint set split for solving. Ground variables have their value
/// fixed by definitions alone. The remaining constraints are grouped into
/// components connected through non-ground variables; constraints over
/// ground variables only are listed in `fixed`.
#[derive(Debug, Clone)]
pub struct Split {
    pub ground: Vec<Option<i64>>,
    pub groups: Vec<Vec<usize>>,
    pub fixed: Vec<usize>,
}

/// Computes the ground values and components of `cs`. `None` when a ground
/// value divides by zero or a ground-only constraint fails.
pub fn split(cs: &[Constraint]) -> Option<Split> {
    let vars: Vec<Vec<Var>> = cs.iter().map(Constraint::vars).collect();
    let width = vars.iter().flatten().map(|x| x.0 as usize + 1).max().unwrap_or(0);
    let refs: Vec<&Constraint> = cs.iter().collect();
    let def = definitions(&refs, width);
    let mut ground: Vec<Option<i64>> = vec![None; width];
    for x in 0..width {
        if let Some((_, e)) = def[x] {
            match e.eval_partial(&ground) {
                Some(Ok(v)) => ground[x] = Some(v),
                Some(Err(DivByZero)) => return None,
                None => {}
            }
        }
    }
    let mut parent: Vec<usize> = (0..width).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut fixed = Vec::new();
    let mut free_of: Vec<Vec<usize>> = Vec::with_capacity(cs.len());
    for (i, vs) in vars.iter().enumerate() {
        let free: Vec<usize> = vs.iter().map(|x| x.0 as usize).filter(|&x| ground[x].is_none()).collect();
        if free.is_empty() {
            if cs[i].check_partial(&ground) != Some(true) {
                return None;
            }
            fixed.push(i);
        } else {
            let r = find(&mut parent, free[0]);
            for &y in &free[1..] {
                let ry = find(&mut parent, y);
                parent[ry] = r;
            }
        }
        free_of.push(free);
    }
    let mut slot: Vec<Option<usize>> = vec![None; width];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, free) in free_of.iter().enumerate() {
        let Some(&a) = free.first() else { continue };
        let r = find(&mut parent, a);
        let g = *slot[r].get_or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    Some(Split { ground, groups, fixed })
}

/// Searches for a satisfying assignment.
///
/// A variable `x` is *defined* by the first equation `#x = e` (either side)
/// whose right-hand side only mentions variables with smaller ids; its value
/// is computed from `e` and is not restricted to `dom`. Every other variable
/// is enumerated over `dom` in ascending order, smallest id first. Each
/// constraint is checked as soon as its largest variable is assigned.
///
/// Any satisfying assignment whose undefined variables lie in `dom` implies
/// that a witness is found. Variables not occurring in `cs` are left at 0.
///
/// Variables whose definitions only involve constants are evaluated first,
/// and constraint groups sharing no other variable are solved separately;
/// the witness is the same as for a joint search.
pub fn solvable(cs: &[Constraint], dom: ChoiceDomain) -> Option<Assignment> {
    let sp = split(cs)?;
    let mut asgn = Assignment::default();
    for i in &sp.fixed {
        for x in cs[*i].vars() {
            asgn.set(x, sp.ground[x.0 as usize].expect("ground"));
        }
    }
    for group in &sp.groups {
        let group: Vec<&Constraint> = group.iter().map(|&i| &cs[i]).collect();
        for (x, v) in solve_group(&group, &sp.ground, dom)? {
            asgn.set(x, v);
        }
    }
    Some(asgn)
}

/// Backtracking search over the non-ground variables of one group.
fn solve_group(cs: &[&Constraint], ground: &[Option<i64>], dom: ChoiceDomain) -> Option<Vec<(Var, i64)>> {
    let is_ground = |x: &Var| ground.get(x.0 as usize).is_some_and(Option::is_some);
    let mut all: Vec<Var> = cs.iter().flat_map(|c| c.vars()).collect();
    all.sort();
    all.dedup();
    let width = all.last().map(|x| x.0 as usize + 1).unwrap_or(0);
    let ids: Vec<Var> = all.iter().copied().filter(|x| !is_ground(x)).collect();
    let def = definitions(cs, width);
    let top = |c: &Constraint| c.vars().into_iter().filter(|x| !is_ground(x)).max();
    let mut checks: Vec<Vec<&Constraint>> = vec![Vec::new(); width];
    for (i, c) in cs.iter().enumerate() {
        let m = top(c).expect("groups only hold constraints with free variables");
        let is_def = def[m.0 as usize].is_some_and(|(j, _)| j == i);
        if !is_def {
            checks[m.0 as usize].push(c);
        }
    }

    fn go(
        k: usize,
        ids: &[Var],
        def: &[Option<(usize, &VExp)>],
        checks: &[Vec<&Constraint>],
        vals: &mut Vec<Option<i64>>,
        dom: ChoiceDomain,
    ) -> bool {
        let Some(&x) = ids.get(k) else {
            return true;
        };
        let xi = x.0 as usize;
        let ok_here = |vals: &Vec<Option<i64>>| checks[xi].iter().all(|c| c.check_partial(vals) == Some(true));
        if let Some((_, e)) = def[xi] {
            let Some(Ok(v)) = e.eval_partial(vals) else {
                return false;
            };
            vals[xi] = Some(v);
            if ok_here(vals) && go(k + 1, ids, def, checks, vals, dom) {
                return true;
            }
        } else {
            for v in dom.iter() {
                vals[xi] = Some(v);
                if ok_here(vals) && go(k + 1, ids, def, checks, vals, dom) {
                    return true;
                }
            }
        }
        vals[xi] = None;
        false
    }

    let mut vals: Vec<Option<i64>> = (0..width).map(|x| ground.get(x).copied().flatten()).collect();
    if !go(0, &ids, &def, &checks, &mut vals, dom) {
        return None;
    }
    Some(all.into_iter().map(|x| (x, vals[x.0 as usize].expect("assigned"))).collect())
}

/// Address-to-variable mapping plus a constraint set. `next` is the
/// fresh-variable counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValidationState {
    pub vs: Vec<Var>,
    pub cs: Vec<Constraint>,
    pub next: u32,
}

impl ValidationState {
    pub fn new(vs: Vec<Var>, cs: Vec<Constraint>) -> Self {
        let next = vs
            .iter()
            .copied()
            .chain(cs.iter().flat_map(|c| c.vars()))
            .map(|x| x.0 + 1)
            .max()
            .unwrap_or(0);
        ValidationState { vs, cs, next }
    }

    pub fn var_at(&self, a: Addr) -> Var {
        self.vs[a as usize]
    }

    pub fn add(&mut self, c: Constraint) {
        self.cs.push(c);
    }
}

/// Allocates a variable that occurs neither in `v.vs` nor in `v.cs`.
pub fn fresh(v: &mut ValidationState) -> Var {
    let x = Var(v.next);
    v.next += 1;
    x
}

pub fn translate_sexp(e: &SExp, vs: &[Var]) -> VExp {
    match e {
        SExp::Const(z) => VExp::Const(*z),
        SExp::Read(a) => VExp::VarRef(vs[*a as usize]),
        SExp::BinOp(op, l, r) => VExp::bin(*op, translate_sexp(l, vs), translate_sexp(r, vs)),
    }
}

fn parse_vexp(c: &mut prog::Cursor) -> Result<VExp, ParseError> {
    let mut leaf = |c: &mut prog::Cursor| -> Result<Option<VExp>, ParseError> {
        if c.peek() == Some(&Tok::Hash) {
            c.next();
            let id = c.int()?;
            let id = u32::try_from(id).map_err(|_| c.error("variable id out of range"))?;
            Ok(Some(VExp::var(id)))
        } else {
            Ok(None)
        }
    };
    c.arith(&mut leaf, &VExp::bin, &VExp::Const)
}

/// Parses a constraint file: one `lhs (< | <= | =) rhs` per line or
/// `;`-separated, with `#n` for variables and `//` comments.
pub fn parse_constraints(src: &str) -> Result<Vec<Constraint>, ParseError> {
    let mut c = prog::Cursor::new(prog::tokenize(src)?);
    let mut out = Vec::new();
    while !c.at_end() {
        let l = parse_vexp(&mut c)?;
        let cmp = match c.next() {
            Some(Tok::Lt) => Cmp::Lt,
            Some(Tok::Le) => Cmp::Le,
            Some(Tok::Eq) => Cmp::Eq,
            other => return Err(c.error(format!("expected <, <= or =, found {other:?}"))),
        };
        let r = parse_vexp(&mut c)?;
        out.push(Constraint::new(l, cmp, r));
        if matches!(c.peek(), Some(Tok::Lt | Tok::Le | Tok::Eq)) {
            return Err(c.error("chained comparisons are not supported"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prog::{sexp_eval, Memory};
    use proptest::prelude::*;

    fn eq(l: VExp, r: VExp) -> Constraint {
        Constraint::new(l, Cmp::Eq, r)
    }

    fn asgn(pairs: &[(u32, i64)]) -> Assignment {
        let mut a = Assignment::default();
        for &(x, v) in pairs {
            a.set(Var(x), v);
        }
        a
    }

    #[test]
    fn vexp_examples() {
        assert_eq!(vexp_eval(&VExp::var(0), &asgn(&[(0, 0)])), Ok(0));
        let e = VExp::bin(Op::Add, VExp::Const(2), VExp::var(3));
        assert_eq!(vexp_eval(&e, &asgn(&[(3, 5)])), Ok(7));
        assert_eq!(vexp_eval(&VExp::Const(-4), &Assignment::default()), Ok(-4));
    }

    #[test]
    fn satisfies_examples() {
        let cs = vec![eq(VExp::var(0), VExp::Const(0))];
        assert!(satisfies(&asgn(&[(0, 0)]), &cs));
        assert!(!satisfies(&asgn(&[(0, 1)]), &cs));
        assert!(satisfies(&asgn(&[(0, 1)]), &[]));
        let div = vec![eq(VExp::bin(Op::Div, VExp::Const(1), VExp::var(0)), VExp::Const(0))];
        assert!(matches!(check_all(&asgn(&[]), &div), Verdict::DivByZero(_)));
    }

    #[test]
    fn split_cuts_at_ground_variables() {
        let le = |l, r| Constraint::new(l, Cmp::Le, r);
        let cs = vec![
            eq(VExp::var(0), VExp::Const(0)),
            eq(VExp::var(2), VExp::var(0)),
            le(VExp::var(1), VExp::var(2)),
            le(VExp::var(3), VExp::bin(Op::Add, VExp::var(0), VExp::Const(5))),
        ];
        let sp = split(&cs).unwrap();
        assert_eq!(&sp.ground[..4], &[Some(0), None, Some(0), None]);
        assert_eq!(sp.fixed, vec![0, 1]);
        assert_eq!(sp.groups, vec![vec![2], vec![3]]);
        let w = solvable(&cs, ChoiceDomain::default()).unwrap();
        assert_eq!((w.get(Var(1)), w.get(Var(3))), (-8, -8));
        let bad = vec![eq(VExp::var(0), VExp::Const(1)), eq(VExp::var(0), VExp::Const(2))];
        assert!(split(&bad).is_none());
        let div = vec![eq(VExp::var(1), VExp::bin(Op::Div, VExp::Const(1), VExp::var(0))), eq(VExp::var(0), VExp::Const(0))];
        assert!(solvable(&div, ChoiceDomain::default()).is_none());
    }

    #[test]
    fn solvable_examples() {
        let dom = ChoiceDomain::default();
        let w = solvable(&[eq(VExp::var(0), VExp::Const(0))], dom).unwrap();
        assert_eq!(w.get(Var(0)), 0);
        assert!(solvable(&[eq(VExp::var(1), VExp::Const(0)), eq(VExp::var(1), VExp::Const(1))], dom).is_none());
        let lt = Constraint::new(VExp::var(2), Cmp::Lt, VExp::var(3));
        let le = Constraint::new(VExp::var(3), Cmp::Le, VExp::var(2));
        assert!(solvable(&[lt, le], dom).is_none());
        assert_eq!(solvable(&[], dom), Some(Assignment::default()));
    }

    #[test]
    fn defined_variables_may_leave_the_domain() {
        let dom = ChoiceDomain::new(-2, 2);
        let cs = vec![
            eq(VExp::var(1), VExp::bin(Op::Mul, VExp::var(0), VExp::Const(10))),
            eq(VExp::var(1), VExp::Const(20)),
        ];
        let w = solvable(&cs, dom).unwrap();
        assert_eq!((w.get(Var(0)), w.get(Var(1))), (2, 20));
    }

    #[test]
    fn fresh_allocation() {
        let mut v = ValidationState::new(vec![Var(0); 4], vec![eq(VExp::var(0), VExp::Const(0))]);
        assert_eq!(fresh(&mut v), Var(1));
        assert_eq!(fresh(&mut v), Var(2));
        let cs = (0..10).map(|i| eq(VExp::var(i), VExp::Const(0))).collect();
        let mut w = ValidationState::new(vec![Var(0); 4], cs);
        assert_eq!(fresh(&mut w), Var(10));
    }

    #[test]
    fn translate_examples() {
        let mut vs = vec![Var(0); 8];
        vs[0] = Var(4);
        vs[1] = Var(7);
        assert_eq!(translate_sexp(&SExp::Read(0), &vs), VExp::var(4));
        assert_eq!(translate_sexp(&SExp::Const(3), &vs), VExp::Const(3));
        let e = SExp::bin(Op::Add, SExp::Read(1), SExp::Const(2));
        assert_eq!(translate_sexp(&e, &vs), VExp::bin(Op::Add, VExp::var(7), VExp::Const(2)));
    }

    #[test]
    fn constraint_file() {
        let cs = parse_constraints("// demo\n#1 + 2 <= #3\n#3 < 5; #1 = -1\n").unwrap();
        assert_eq!(cs.len(), 3);
        assert_eq!(cs[0].to_string(), "(#1 + 2) <= #3");
        let w = solvable(&cs, ChoiceDomain::default()).unwrap();
        assert!(satisfies(&w, &cs));
        assert!(parse_constraints("#1 <").is_err());
        assert!(parse_constraints("#1 < #2 < #3").is_err());
    }

    fn arb_vexp(nvars: u32) -> impl Strategy<Value = VExp> {
        let leaf = prop_oneof![(-3i64..3).prop_map(VExp::Const), (0..nvars).prop_map(VExp::var)];
        leaf.prop_recursive(2, 6, 2, |inner| {
            (prop_oneof![Just(Op::Add), Just(Op::Sub), Just(Op::Mul)], inner.clone(), inner)
                .prop_map(|(op, l, r)| VExp::bin(op, l, r))
        })
    }

    fn arb_constraints(nvars: u32) -> impl Strategy<Value = Vec<Constraint>> {
        let c = (arb_vexp(nvars), prop_oneof![Just(Cmp::Lt), Just(Cmp::Le), Just(Cmp::Eq)], arb_vexp(nvars))
            .prop_map(|(l, c, r)| Constraint::new(l, c, r));
        proptest::collection::vec(c, 0..5)
    }

    fn brute_force(cs: &[Constraint], nvars: u32, dom: ChoiceDomain) -> bool {
        let n = nvars as usize;
        let vals: Vec<i64> = dom.iter().collect();
        let mut idx = vec![0usize; n];
        loop {
            let mut a = Assignment::default();
            for (i, &j) in idx.iter().enumerate() {
                a.set(Var(i as u32), vals[j]);
            }
            if satisfies(&a, cs) {
                return true;
            }
            let mut k = 0;
            loop {
                if k == n {
                    return false;
                }
                idx[k] += 1;
                if idx[k] < vals.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn witness_is_sound(cs in arb_constraints(3)) {
            if let Some(w) = solvable(&cs, ChoiceDomain::new(-3, 3)) {
                prop_assert!(satisfies(&w, &cs));
            }
        }

        #[test]
        fn complete_over_domain(cs in arb_constraints(3)) {
            let dom = ChoiceDomain::new(-3, 3);
            if brute_force(&cs, 3, dom) {
                prop_assert!(solvable(&cs, dom).is_some());
            }
        }

        #[test]
        fn translation_commutes(e in crate::prog::tests::arb_sexp(5), vals in proptest::collection::vec(-9i64..9, 6), perm in Just(vec![3u32, 0, 5, 1, 4, 2])) {
            let vs: Vec<Var> = perm.iter().map(|&i| Var(i)).collect();
            let mut s = Memory::new();
            let mut a = Assignment::default();
            for k in 0..6u32 {
                s.set(k, vals[k as usize]);
                a.set(vs[k as usize], vals[k as usize]);
            }
            prop_assert_eq!(vexp_eval(&translate_sexp(&e, &vs), &a), sexp_eval(&e, &s));
        }

        #[test]
        fn fresh_preserves_satisfaction(cs in arb_constraints(3), vals in proptest::collection::vec(-3i64..3, 3), extra in -50i64..50) {
            let mut v = ValidationState::new(vec![Var(0); 4], cs.clone());
            let mut a = Assignment::default();
            for (i, &x) in vals.iter().enumerate() {
                a.set(Var(i as u32), x);
            }
            let before = satisfies(&a, &cs);
            let x = fresh(&mut v);
            prop_assert!(!cs.iter().flat_map(|c| c.vars()).any(|y| y == x));
            a.set(x, extra);
            prop_assert_eq!(satisfies(&a, &cs), before);
        }
    }
}
