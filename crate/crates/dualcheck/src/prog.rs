//! The Prog modelling language: integer-machine programs, their evaluation,
//! and the server models they denote.

use std::collections::BTreeMap;
use std::fmt;

use crate::qac::{ServerModel, StepError};

pub type Addr = u32;

/// Default number of addressable cells.
pub const DEFAULT_ADDRESSES: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("division by zero")]
pub struct DivByZero;

impl Op {
    /// Wrapping integer arithmetic; division truncates toward zero.
    pub fn apply(self, l: i64, r: i64) -> Result<i64, DivByZero> {
        match self {
            Op::Add => Ok(l.wrapping_add(r)),
            Op::Sub => Ok(l.wrapping_sub(r)),
            Op::Mul => Ok(l.wrapping_mul(r)),
            Op::Div if r == 0 => Err(DivByZero),
            Op::Div => Ok(l.wrapping_div(r)),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SExp {
    Const(i64),
    Read(Addr),
    BinOp(Op, Box<SExp>, Box<SExp>),
}

impl SExp {
    pub fn bin(op: Op, l: SExp, r: SExp) -> SExp {
        SExp::BinOp(op, Box::new(l), Box::new(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prog {
    Return,
    Write(Addr, SExp, Box<Prog>),
    IfLe(SExp, SExp, Box<Prog>, Box<Prog>),
}

impl Prog {
    pub fn write(dst: Addr, e: SExp, rest: Prog) -> Prog {
        Prog::Write(dst, e, Box::new(rest))
    }

    pub fn if_le(e1: SExp, e2: SExp, then: Prog, els: Prog) -> Prog {
        Prog::IfLe(e1, e2, Box::new(then), Box::new(els))
    }

    /// Largest address read or written, if any.
    pub fn max_address(&self) -> Option<Addr> {
        fn sexp(e: &SExp) -> Option<Addr> {
            match e {
                SExp::Const(_) => None,
                SExp::Read(a) => Some(*a),
                SExp::BinOp(_, l, r) => sexp(l).max(sexp(r)),
            }
        }
        match self {
            Prog::Return => None,
            Prog::Write(d, e, rest) => Some(*d).max(sexp(e)).max(rest.max_address()),
            Prog::IfLe(a, b, t, e) => sexp(a).max(sexp(b)).max(t.max_address()).max(e.max_address()),
        }
    }

    /// Nesting depth of conditionals.
    pub fn if_depth(&self) -> usize {
        match self {
            Prog::Return => 0,
            Prog::Write(_, _, rest) => rest.if_depth(),
            Prog::IfLe(_, _, t, e) => 1 + t.if_depth().max(e.if_depth()),
        }
    }
}

/// Total map from addresses to integers; unset cells read as 0.
/// Zero cells are never stored, so derived equality is extensional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Memory(BTreeMap<Addr, i64>);

impl Memory {
    pub fn new() -> Self {
        Memory::default()
    }

    pub fn get(&self, a: Addr) -> i64 {
        self.0.get(&a).copied().unwrap_or(0)
    }

    pub fn set(&mut self, a: Addr, v: i64) {
        if v == 0 {
            self.0.remove(&a);
        } else {
            self.0.insert(a, v);
        }
    }

    pub fn with(mut self, a: Addr, v: i64) -> Self {
        self.set(a, v);
        self
    }
}

pub fn sexp_eval(e: &SExp, s: &Memory) -> Result<i64, DivByZero> {
    match e {
        SExp::Const(z) => Ok(*z),
        SExp::Read(a) => Ok(s.get(*a)),
        SExp::BinOp(op, l, r) => op.apply(sexp_eval(l, s)?, sexp_eval(r, s)?),
    }
}

pub fn eval(p: &Prog, s: &Memory) -> Result<Memory, DivByZero> {
    let mut s = s.clone();
    let mut p = p;
    loop {
        match p {
            Prog::Return => return Ok(s),
            Prog::Write(d, e, rest) => {
                let v = sexp_eval(e, &s)?;
                s.set(*d, v);
                p = rest;
            }
            Prog::IfLe(a, b, t, e) => {
                p = if sexp_eval(a, &s)? <= sexp_eval(b, &s)? { t } else { e };
            }
        }
    }
}

/// The server that writes the choice to `!0` and the query to `!1`, runs
/// `p`, and answers with `!1`.
pub fn server_of(p: &Prog) -> ServerModel<Memory> {
    let p = p.clone();
    ServerModel::new(Memory::new(), move |q, c, s| {
        let s = s.clone().with(0, c).with(1, q);
        let s = eval(&p, &s).map_err(|e| StepError(e.to_string()))?;
        Ok((s.get(1), s))
    })
}

/// `if !1 <= !2 then !1 := 0; return else !1 := 1; !2 := !0; return`
pub fn cmp_rst_prog() -> Prog {
    Prog::if_le(
        SExp::Read(1),
        SExp::Read(2),
        Prog::write(1, SExp::Const(0), Prog::Return),
        Prog::write(1, SExp::Const(1), Prog::write(2, SExp::Read(0), Prog::Return)),
    )
}

/// `if !1 <= 0 then !1 := 0 - !1; return else return`
pub fn abs_prog() -> Prog {
    Prog::if_le(
        SExp::Read(1),
        SExp::Const(0),
        Prog::write(1, SExp::bin(Op::Sub, SExp::Const(0), SExp::Read(1)), Prog::Return),
        Prog::Return,
    )
}

impl fmt::Display for SExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExp::Const(z) => write!(f, "{z}"),
            SExp::Read(a) => write!(f, "!{a}"),
            SExp::BinOp(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl fmt::Display for Prog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(p: &Prog, indent: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(indent);
            match p {
                Prog::Return => writeln!(f, "{pad}return"),
                Prog::Write(d, e, rest) => {
                    writeln!(f, "{pad}!{d} := {e}")?;
                    go(rest, indent, f)
                }
                Prog::IfLe(a, b, t, e) => {
                    writeln!(f, "{pad}if {a} <= {b} then")?;
                    go(t, indent + 1, f)?;
                    writeln!(f, "{pad}else")?;
                    go(e, indent + 1, f)
                }
            }
        }
        go(self, 0, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Int(u64),
    Bang,
    Assign,
    Le,
    Lt,
    Eq,
    Hash,
    Op(Op),
    LParen,
    RParen,
    Word(String),
}

/// Shared tokenizer for Prog sources and constraint files. Newlines and `;`
/// are plain separators; `//` starts a comment.
pub(crate) fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split("//").next().unwrap_or("");
        let mut cs = text.chars().peekable();
        while let Some(&c) = cs.peek() {
            let err = |msg: String| ParseError { line, msg };
            match c {
                c if c.is_whitespace() || c == ';' => {
                    cs.next();
                }
                '0'..='9' => {
                    let mut n = String::new();
                    while let Some(&d) = cs.peek().filter(|d| d.is_ascii_digit()) {
                        n.push(d);
                        cs.next();
                    }
                    let v = n.parse::<u64>().map_err(|e| err(format!("bad integer {n}: {e}")))?;
                    out.push((Tok::Int(v), line));
                }
                'a'..='z' | 'A'..='Z' | '_' => {
                    let mut w = String::new();
                    while let Some(&d) = cs.peek().filter(|d| d.is_alphanumeric() || **d == '_') {
                        w.push(d);
                        cs.next();
                    }
                    out.push((Tok::Word(w), line));
                }
                _ => {
                    cs.next();
                    let tok = match c {
                        '!' => Tok::Bang,
                        '#' => Tok::Hash,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '+' => Tok::Op(Op::Add),
                        '-' | '−' => Tok::Op(Op::Sub),
                        '*' | '×' => Tok::Op(Op::Mul),
                        '/' | '÷' => Tok::Op(Op::Div),
                        '=' => Tok::Eq,
                        '≤' => Tok::Le,
                        '<' => {
                            if cs.peek() == Some(&'=') {
                                cs.next();
                                Tok::Le
                            } else {
                                Tok::Lt
                            }
                        }
                        ':' => {
                            if cs.next() != Some('=') {
                                return Err(err("expected ':='".into()));
                            }
                            Tok::Assign
                        }
                        other => return Err(err(format!("unexpected character {other:?}"))),
                    };
                    out.push((tok, line));
                }
            }
        }
    }
    Ok(out)
}

/// Recursive-descent cursor over tokens, shared with the constraint parser.
pub(crate) struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(toks: Vec<(Tok, usize)>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    pub(crate) fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        let line = self
            .toks
            .get(self.pos)
            .or(self.toks.last())
            .map(|t| t.1)
            .unwrap_or(1);
        ParseError { line, msg: msg.into() }
    }

    pub(crate) fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.error(format!("expected {want:?}, found {other:?}"))),
        }
    }

    pub(crate) fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        self.expect(&Tok::Word(w.to_string()))
    }

    pub(crate) fn int(&mut self) -> Result<u64, ParseError> {
        match self.next() {
            Some(Tok::Int(v)) => Ok(v),
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected integer, found {other:?}")))
            }
        }
    }

    /// Signed integer literal; a leading `-` binds to the literal.
    pub(crate) fn signed(&mut self) -> Result<i64, ParseError> {
        let neg = if self.peek() == Some(&Tok::Op(Op::Sub)) {
            self.pos += 1;
            true
        } else {
            false
        };
        let v = self.int()?;
        let v = if neg {
            if v == i64::MIN.unsigned_abs() {
                i64::MIN
            } else {
                -i64::try_from(v).map_err(|_| self.error("integer out of range"))?
            }
        } else {
            i64::try_from(v).map_err(|_| self.error("integer out of range"))?
        };
        Ok(v)
    }

    /// Binary-expression parser with conventional precedence, parameterised
    /// over the leaf parser.
    pub(crate) fn arith<L: Clone>(
        &mut self,
        leaf: &mut dyn FnMut(&mut Cursor) -> Result<Option<L>, ParseError>,
        mk: &dyn Fn(Op, L, L) -> L,
        konst: &dyn Fn(i64) -> L,
    ) -> Result<L, ParseError> {
        let mut acc = self.term(leaf, mk, konst)?;
        while let Some(Tok::Op(op @ (Op::Add | Op::Sub))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.term(leaf, mk, konst)?;
            acc = mk(op, acc, r);
        }
        Ok(acc)
    }

    fn term<L: Clone>(
        &mut self,
        leaf: &mut dyn FnMut(&mut Cursor) -> Result<Option<L>, ParseError>,
        mk: &dyn Fn(Op, L, L) -> L,
        konst: &dyn Fn(i64) -> L,
    ) -> Result<L, ParseError> {
        let mut acc = self.atom(leaf, mk, konst)?;
        while let Some(Tok::Op(op @ (Op::Mul | Op::Div))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.atom(leaf, mk, konst)?;
            acc = mk(op, acc, r);
        }
        Ok(acc)
    }

    fn atom<L: Clone>(
        &mut self,
        leaf: &mut dyn FnMut(&mut Cursor) -> Result<Option<L>, ParseError>,
        mk: &dyn Fn(Op, L, L) -> L,
        konst: &dyn Fn(i64) -> L,
    ) -> Result<L, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.arith(leaf, mk, konst)?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Int(_)) | Some(Tok::Op(Op::Sub)) => Ok(konst(self.signed()?)),
            _ => match leaf(self)? {
                Some(l) => Ok(l),
                None => Err(self.error(format!("expected expression, found {:?}", self.peek()))),
            },
        }
    }
}

fn parse_sexp(c: &mut Cursor) -> Result<SExp, ParseError> {
    let mut leaf = |c: &mut Cursor| -> Result<Option<SExp>, ParseError> {
        if c.peek() == Some(&Tok::Bang) {
            c.next();
            let a = c.int()?;
            let a = Addr::try_from(a).map_err(|_| c.error("address out of range"))?;
            Ok(Some(SExp::Read(a)))
        } else {
            Ok(None)
        }
    };
    c.arith(&mut leaf, &SExp::bin, &SExp::Const)
}

fn parse_prog_at(c: &mut Cursor) -> Result<Prog, ParseError> {
    match c.peek() {
        Some(Tok::Word(w)) if w == "return" => {
            c.next();
            Ok(Prog::Return)
        }
        Some(Tok::Word(w)) if w == "if" => {
            c.next();
            let a = parse_sexp(c)?;
            c.expect(&Tok::Le)?;
            let b = parse_sexp(c)?;
            c.expect_word("then")?;
            let t = parse_prog_at(c)?;
            c.expect_word("else")?;
            let e = parse_prog_at(c)?;
            Ok(Prog::if_le(a, b, t, e))
        }
        Some(Tok::Bang) => {
            c.next();
            let d = c.int()?;
            let d = Addr::try_from(d).map_err(|_| c.error("address out of range"))?;
            c.expect(&Tok::Assign)?;
            let e = parse_sexp(c)?;
            let rest = parse_prog_at(c)?;
            Ok(Prog::write(d, e, rest))
        }
        None => Err(c.error("unexpected end of program (missing `return`?)")),
        Some(t) => Err(c.error(format!("expected statement, found {t:?}"))),
    }
}

/// Parses the textual Prog syntax. Statements are separated by newlines or
/// `;`; a program always ends in `return` or an `if ... then ... else ...`.
pub fn parse_prog(src: &str) -> Result<Prog, ParseError> {
    let mut c = Cursor::new(tokenize(src)?);
    let p = parse_prog_at(&mut c)?;
    if !c.at_end() {
        return Err(c.error("trailing input after program"));
    }
    Ok(p)
}

pub fn parse_sexp_str(src: &str) -> Result<SExp, ParseError> {
    let mut c = Cursor::new(tokenize(src)?);
    let e = parse_sexp(&mut c)?;
    if !c.at_end() {
        return Err(c.error("trailing input after expression"));
    }
    Ok(e)
}

/// Bounds for [`random_prog`].
#[derive(Debug, Clone, Copy)]
pub struct ProgShape {
    pub max_if_depth: usize,
    /// Addresses are `0..=max_addr`.
    pub max_addr: Addr,
    /// Constants are drawn from `-max_const..=max_const`.
    pub max_const: i64,
    pub max_writes: usize,
}

fn random_sexp<R: rand::Rng>(rng: &mut R, shape: &ProgShape, depth: usize) -> SExp {
    if depth == 0 || rng.gen_bool(0.5) {
        return if rng.gen_bool(0.5) {
            SExp::Const(rng.gen_range(-shape.max_const..=shape.max_const))
        } else {
            SExp::Read(rng.gen_range(0..=shape.max_addr))
        };
    }
    let l = random_sexp(rng, shape, depth - 1);
    match rng.gen_range(0..4) {
        0 => SExp::bin(Op::Add, l, random_sexp(rng, shape, depth - 1)),
        1 => SExp::bin(Op::Sub, l, random_sexp(rng, shape, depth - 1)),
        2 => SExp::bin(Op::Mul, l, random_sexp(rng, shape, depth - 1)),
        _ => {
            let mut d = 0;
            while d == 0 {
                d = rng.gen_range(-shape.max_const..=shape.max_const);
            }
            SExp::bin(Op::Div, l, SExp::Const(d))
        }
    }
}

/// A random program that only divides by nonzero constants.
pub fn random_prog<R: rand::Rng>(rng: &mut R, shape: &ProgShape) -> Prog {
    fn block<R: rand::Rng>(rng: &mut R, shape: &ProgShape, depth: usize) -> Prog {
        let tail = if depth > 0 && rng.gen_bool(0.6) {
            let (a, b) = (random_sexp(rng, shape, 2), random_sexp(rng, shape, 2));
            Prog::if_le(a, b, block(rng, shape, depth - 1), block(rng, shape, depth - 1))
        } else {
            Prog::Return
        };
        let writes = rng.gen_range(0..=shape.max_writes);
        (0..writes).fold(tail, |rest, _| {
            Prog::write(rng.gen_range(0..=shape.max_addr), random_sexp(rng, shape, 2), rest)
        })
    }
    block(rng, shape, shape.max_if_depth)
}
