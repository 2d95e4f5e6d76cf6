//! Query/answer/choice server models, validators and the brute-force
//! trace-validity oracle.

use std::fmt;
use std::sync::Arc;

/// A synchronous trace of `(query, answer)` pairs.
pub type Trace = Vec<(i64, i64)>;

/// Inclusive bounds for choice enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChoiceDomain {
    pub lo: i64,
    pub hi: i64,
}

impl ChoiceDomain {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "empty choice domain [{lo},{hi}]");
        ChoiceDomain { lo, hi }
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + Clone {
        self.lo..=self.hi
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl Default for ChoiceDomain {
    fn default() -> Self {
        ChoiceDomain { lo: -8, hi: 8 }
    }
}

/// A server step that could not complete, e.g. a division by zero in a
/// Prog-derived model. The oracle treats it as "no transition".
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("model step failed: {0}")]
pub struct StepError(pub String);

type ServerStep<S> = dyn Fn(i64, i64, &S) -> Result<(i64, S), StepError> + Send + Sync;
type ValidatorStep<V> = dyn Fn(i64, i64, &V) -> Option<V> + Send + Sync;

/// A nondeterministic server: a step function over (query, choice, state)
/// and the current state.
pub struct ServerModel<S> {
    pub state: S,
    step: Arc<ServerStep<S>>,
}

impl<S: Clone> Clone for ServerModel<S> {
    fn clone(&self) -> Self {
        ServerModel {
            state: self.state.clone(),
            step: self.step.clone(),
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for ServerModel<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServerModel").field("state", &self.state).finish()
    }
}

impl<S: Clone + PartialEq> ServerModel<S> {
    pub fn new(
        state: S,
        step: impl Fn(i64, i64, &S) -> Result<(i64, S), StepError> + Send + Sync + 'static,
    ) -> Self {
        ServerModel {
            state,
            step: Arc::new(step),
        }
    }

    /// Same step function, different state.
    pub fn with_state(&self, state: S) -> Self {
        ServerModel {
            state,
            step: self.step.clone(),
        }
    }

    pub fn raw_step(&self, q: i64, c: i64, s: &S) -> Result<(i64, S), StepError> {
        (self.step)(q, c, s)
    }
}

pub fn step_server<S: Clone + PartialEq>(
    m: &ServerModel<S>,
    q: i64,
    c: i64,
) -> Result<(i64, ServerModel<S>), StepError> {
    let (a, s) = m.raw_step(q, c, &m.state)?;
    Ok((a, m.with_state(s)))
}

/// A deterministic validator: consumes `(query, answer)` pairs and either
/// moves to a new state or rejects.
pub struct ValidatorModel<V> {
    pub state: V,
    step: Arc<ValidatorStep<V>>,
}

impl<V: Clone> Clone for ValidatorModel<V> {
    fn clone(&self) -> Self {
        ValidatorModel {
            state: self.state.clone(),
            step: self.step.clone(),
        }
    }
}

impl<V: fmt::Debug> fmt::Debug for ValidatorModel<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValidatorModel")
            .field("state", &self.state)
            .finish()
    }
}

impl<V: Clone> ValidatorModel<V> {
    pub fn new(state: V, step: impl Fn(i64, i64, &V) -> Option<V> + Send + Sync + 'static) -> Self {
        ValidatorModel {
            state,
            step: Arc::new(step),
        }
    }
}

pub fn step_validator<V: Clone>(v: &ValidatorModel<V>, q: i64, a: i64) -> Option<ValidatorModel<V>> {
    let next = (v.step)(q, a, &v.state)?;
    Some(ValidatorModel {
        state: next,
        step: v.step.clone(),
    })
}

pub fn accepts_trace<V: Clone>(v: &ValidatorModel<V>, t: &[(i64, i64)]) -> bool {
    let mut cur = v.clone();
    for &(q, a) in t {
        match step_validator(&cur, q, a) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    true
}

/// Searches for a choice sequence in `dom` that makes `m` produce `t`.
/// Choices are tried in ascending order; the first witness is returned.
pub fn oracle_witness<S: Clone + PartialEq>(
    m: &ServerModel<S>,
    t: &[(i64, i64)],
    dom: ChoiceDomain,
) -> Option<Vec<i64>> {
    fn go<S: Clone + PartialEq>(
        m: &ServerModel<S>,
        s: &S,
        t: &[(i64, i64)],
        dom: ChoiceDomain,
        acc: &mut Vec<i64>,
    ) -> bool {
        let Some(&(q, a)) = t.first() else {
            return true;
        };
        for c in dom.iter() {
            if let Ok((a2, s2)) = m.raw_step(q, c, s) {
                if a2 == a {
                    acc.push(c);
                    if go(m, &s2, &t[1..], dom, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
        }
        false
    }
    let mut acc = Vec::new();
    go(m, &m.state, t, dom, &mut acc).then_some(acc)
}

pub fn oracle_valid<S: Clone + PartialEq>(m: &ServerModel<S>, t: &[(i64, i64)], dom: ChoiceDomain) -> bool {
    oracle_witness(m, t, dom).is_some()
}

/// CMP-SET: answers 0 if the query is at most the stored number, otherwise
/// answers 1 and stores the query.
pub fn cmp_set_server() -> ServerModel<i64> {
    ServerModel::new(0, |q, _c, &n| Ok(if q <= n { (0, n) } else { (1, q) }))
}

/// CMP-RST: like CMP-SET, but on a larger query the stored number is reset to
/// the internal choice.
pub fn cmp_rst_server() -> ServerModel<i64> {
    ServerModel::new(0, |q, c, &n| Ok(if q <= n { (0, n) } else { (1, c) }))
}

/// Hand-written validator for CMP-SET.
pub fn cmp_set_validator() -> ValidatorModel<i64> {
    ValidatorModel::new(0, |q, a, &v| {
        if q <= v {
            (a == 0).then_some(v)
        } else {
            (a == 1).then_some(q)
        }
    })
}
