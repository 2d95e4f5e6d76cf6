//! Interaction trees: lazily produced computations that either return a
//! result or perform an event and continue with its answer.
//!
//! Every event family declares a single answer type; continuations for a
//! particular event only ever receive the answer variant that event yields.
//! A tree is forced one node at a time with [`ITree::step`], so infinite
//! trees are fine as long as consumers are demand-driven.

use std::convert::Infallible;
use std::fmt;
use std::sync::Arc;

pub trait Effect: Clone + fmt::Debug + Send + Sync + 'static {
    type Answer: Clone + fmt::Debug + Send + Sync + 'static;
}

pub type Cont<E, R> = Arc<dyn Fn(<E as Effect>::Answer) -> ITree<E, R> + Send + Sync>;
type Thunk<E, R> = Arc<dyn Fn() -> ITree<E, R> + Send + Sync>;

pub struct ITree<E: Effect, R>(Repr<E, R>);

enum Repr<E: Effect, R> {
    Pure(R),
    Impure(E, Cont<E, R>),
    Suspend(Thunk<E, R>),
}

/// The head of a forced tree.
pub enum Step<E: Effect, R> {
    Pure(R),
    Impure(E, Cont<E, R>),
}

/// Trees that never return.
pub type Void = Infallible;

impl<E: Effect, R: Clone> Clone for ITree<E, R> {
    fn clone(&self) -> Self {
        ITree(match &self.0 {
            Repr::Pure(r) => Repr::Pure(r.clone()),
            Repr::Impure(e, k) => Repr::Impure(e.clone(), k.clone()),
            Repr::Suspend(f) => Repr::Suspend(f.clone()),
        })
    }
}

impl<E: Effect, R: fmt::Debug> fmt::Debug for ITree<E, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Pure(r) => write!(f, "Pure({r:?})"),
            Repr::Impure(e, _) => write!(f, "Impure({e:?}, ..)"),
            Repr::Suspend(_) => write!(f, "<suspended>"),
        }
    }
}

pub fn ret<E: Effect, R>(r: R) -> ITree<E, R> {
    ITree(Repr::Pure(r))
}

pub fn trigger<E: Effect>(e: E) -> ITree<E, E::Answer> {
    ITree(Repr::Impure(e, Arc::new(|a| ret(a))))
}

impl<E: Effect, R: Clone + Send + Sync + 'static> ITree<E, R> {
    pub fn impure(e: E, k: impl Fn(E::Answer) -> ITree<E, R> + Send + Sync + 'static) -> Self {
        ITree(Repr::Impure(e, Arc::new(k)))
    }

    pub fn impure_arc(e: E, k: Cont<E, R>) -> Self {
        ITree(Repr::Impure(e, k))
    }

    /// A tree whose head is computed on demand.
    pub fn suspend(f: impl Fn() -> ITree<E, R> + Send + Sync + 'static) -> Self {
        ITree(Repr::Suspend(Arc::new(f)))
    }

    /// Forces the tree until its head is a `Pure` or an event.
    pub fn step(self) -> Step<E, R> {
        let mut cur = self;
        loop {
            match cur.0 {
                Repr::Pure(r) => return Step::Pure(r),
                Repr::Impure(e, k) => return Step::Impure(e, k),
                Repr::Suspend(f) => cur = f(),
            }
        }
    }

    pub fn bind<S: Clone + Send + Sync + 'static>(
        self,
        k: impl Fn(R) -> ITree<E, S> + Send + Sync + 'static,
    ) -> ITree<E, S> {
        self.bind_arc(Arc::new(k))
    }

    fn bind_arc<S: Clone + Send + Sync + 'static>(
        self,
        k: Arc<dyn Fn(R) -> ITree<E, S> + Send + Sync>,
    ) -> ITree<E, S> {
        match self.0 {
            Repr::Pure(r) => ITree::suspend(move || k(r.clone())),
            Repr::Impure(e, c) => ITree::impure(e, move |a| c(a).bind_arc(k.clone())),
            Repr::Suspend(f) => ITree::suspend(move || f().bind_arc(k.clone())),
        }
    }

    pub fn map<S: Clone + Send + Sync + 'static>(self, f: impl Fn(R) -> S + Send + Sync + 'static) -> ITree<E, S> {
        self.bind(move |r| ret(f(r)))
    }

    /// Sequencing that discards the result.
    pub fn then<S: Clone + Send + Sync + 'static>(self, next: ITree<E, S>) -> ITree<E, S> {
        self.bind(move |_| next.clone())
    }
}

pub type Handler<E, F> = Arc<dyn Fn(E) -> ITree<F, <E as Effect>::Answer> + Send + Sync>;

/// Replaces each event with the tree the handler produces for it.
pub fn interp<E: Effect, F: Effect, R: Clone + Send + Sync + 'static>(h: Handler<E, F>, m: ITree<E, R>) -> ITree<F, R> {
    ITree::suspend(move || match m.clone().step() {
        Step::Pure(r) => ret(r),
        Step::Impure(e, k) => {
            let h2 = h.clone();
            h(e).bind(move |a| interp(h2.clone(), k(a)))
        }
    })
}

pub type StateHandler<E, F, S> = Arc<dyn Fn(E, S) -> ITree<F, (S, <E as Effect>::Answer)> + Send + Sync>;

/// Like [`interp`], threading a state through the handler.
pub fn interp_state<E: Effect, F: Effect, S, R>(h: StateHandler<E, F, S>, m: ITree<E, R>, s: S) -> ITree<F, (S, R)>
where
    S: Clone + Send + Sync + 'static,
    R: Clone + Send + Sync + 'static,
{
    ITree::suspend(move || match m.clone().step() {
        Step::Pure(r) => ret((s.clone(), r)),
        Step::Impure(e, k) => {
            let h2 = h.clone();
            h(e, s.clone()).bind(move |(s2, a)| interp_state(h2.clone(), k(a), s2))
        }
    })
}

/// Compares two trees on every event path up to `depth` events deep. Events
/// must be equal at each node; `answers` enumerates the answers to explore.
pub fn prefix_bisim<E, R>(
    a: &ITree<E, R>,
    b: &ITree<E, R>,
    depth: usize,
    answers: &dyn Fn(&E) -> Vec<E::Answer>,
) -> bool
where
    E: Effect + PartialEq,
    R: Clone + PartialEq + Send + Sync + 'static,
{
    match (a.clone().step(), b.clone().step()) {
        (Step::Pure(x), Step::Pure(y)) => x == y,
        (Step::Impure(e1, k1), Step::Impure(e2, k2)) => {
            if e1 != e2 {
                return false;
            }
            if depth == 0 {
                return true;
            }
            answers(&e1)
                .into_iter()
                .all(|ans| prefix_bisim(&k1(ans.clone()), &k2(ans), depth - 1, answers))
        }
        _ => false,
    }
}

/// Unfolds up to `fuel` events, answering each with `answer`, and returns the
/// events seen plus the result if the tree finished.
pub fn run_with<E, R>(m: ITree<E, R>, fuel: usize, mut answer: impl FnMut(&E) -> E::Answer) -> (Vec<E>, Option<R>)
where
    E: Effect,
    R: Clone + Send + Sync + 'static,
{
    let mut seen = Vec::new();
    let mut cur = m;
    for _ in 0..fuel {
        match cur.step() {
            Step::Pure(r) => return (seen, Some(r)),
            Step::Impure(e, k) => {
                let a = answer(&e);
                seen.push(e);
                cur = k(a);
            }
        }
    }
    (seen, None)
}
