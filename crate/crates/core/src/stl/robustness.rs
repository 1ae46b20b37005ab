//! Quantitative (robust) semantics over sampled traces.
//!
//! Temporal operators take min/max over the sample points whose offset from
//! the evaluation point lies in the operator interval, clipped to the trace
//! horizon. An empty window is vacuous: `alw` gives `+inf`, `ev` gives `-inf`.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::ops::{Neg, Range};

use super::ast::{Atom, Formula, Interval, Relation};
use super::{StlError, Trace};

/// Robustness degree, an extended real. `NaN` never appears in values produced here.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Robustness(pub f64);

impl Robustness {
    pub const TOP: Robustness = Robustness(f64::INFINITY);
    pub const BOTTOM: Robustness = Robustness(f64::NEG_INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_satisfied(self) -> bool {
        self.0 > 0.0
    }

    pub fn meet(self, other: Robustness) -> Robustness {
        Robustness(self.0.min(other.0))
    }

    pub fn join(self, other: Robustness) -> Robustness {
        Robustness(self.0.max(other.0))
    }

    pub fn total_cmp(&self, other: &Robustness) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Neg for Robustness {
    type Output = Robustness;
    fn neg(self) -> Robustness {
        Robustness(-self.0)
    }
}

impl From<f64> for Robustness {
    fn from(v: f64) -> Self {
        Robustness(v)
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Robustness value of an atom given the value of its affine expression.
pub(crate) fn atom_robustness(relation: Relation, value: f64, threshold: f64) -> f64 {
    match relation {
        Relation::Gt | Relation::Ge => value - threshold,
        Relation::Lt | Relation::Le => threshold - value,
        Relation::Eq => 0.5 - (value - threshold).abs(),
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Atom {
        terms: Vec<(usize, f64)>,
        relation: Relation,
        threshold: f64,
    },
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Until(Interval, Box<Node>, Box<Node>),
    Release(Interval, Box<Node>, Box<Node>),
    Eventually(Interval, Box<Node>),
    Always(Interval, Box<Node>),
}

fn compile(f: &Formula, variables: &[String]) -> Result<Node, StlError> {
    let c = |g: &Formula| compile(g, variables).map(Box::new);
    Ok(match f {
        Formula::True => Node::Const(f64::INFINITY),
        Formula::False => Node::Const(f64::NEG_INFINITY),
        Formula::Atom(Atom {
            expr,
            relation,
            threshold,
        }) => {
            let terms = expr
                .terms()
                .iter()
                .map(|(name, coeff)| {
                    variables
                        .iter()
                        .position(|v| v == name)
                        .map(|i| (i, *coeff))
                        .ok_or_else(|| StlError::UnknownVariable(name.clone()))
                })
                .collect::<Result<_, _>>()?;
            Node::Atom {
                terms,
                relation: *relation,
                threshold: *threshold,
            }
        }
        Formula::Not(g) => Node::Not(c(g)?),
        Formula::And(l, r) => Node::And(c(l)?, c(r)?),
        Formula::Or(l, r) => Node::Or(c(l)?, c(r)?),
        Formula::Implies(l, r) => Node::Or(Box::new(Node::Not(c(l)?)), c(r)?),
        Formula::Until(i, l, r) => Node::Until(*i, c(l)?, c(r)?),
        Formula::Release(i, l, r) => Node::Release(*i, c(l)?, c(r)?),
        Formula::Eventually(i, g) => Node::Eventually(*i, c(g)?),
        Formula::Always(i, g) => Node::Always(*i, c(g)?),
    })
}

/// Window of child indices needed to evaluate `range` through an interval.
fn child_range(range: &Range<usize>, offsets: (usize, Option<usize>), len: usize) -> Range<usize> {
    let start = range.start.saturating_add(offsets.0).min(len);
    let end = match offsets.1 {
        Some(hi) => range.end.saturating_add(hi).min(len),
        None => len,
    };
    start..end.max(start)
}

/// Sliding-window extremum: `out[k] = op over child[k+lo ..= k+hi]` (clipped),
/// or `empty` when the window is empty. `maximize` selects max vs min.
fn window_extremum(
    child: &[f64],
    child_start: usize,
    range: &Range<usize>,
    offsets: (usize, Option<usize>),
    len: usize,
    maximize: bool,
    empty: f64,
) -> Vec<f64> {
    let better = |a: f64, b: f64| if maximize { a >= b } else { a <= b };
    let mut out = Vec::with_capacity(range.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = child_start;
    let child_end = child_start + child.len();
    for k in range.clone() {
        let lo = k.saturating_add(offsets.0);
        let hi = match offsets.1 {
            Some(h) => k.saturating_add(h).min(len - 1),
            None => len - 1,
        };
        if lo > hi || lo >= len {
            out.push(empty);
            continue;
        }
        while next <= hi && next < child_end {
            let v = child[next - child_start];
            while let Some(&back) = deque.back() {
                if better(v, child[back - child_start]) {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        out.push(deque.front().map_or(empty, |&i| child[i - child_start]));
    }
    out
}

impl Node {
    /// Robustness signal on sample indices `range` (non-empty, within the trace).
    fn eval(&self, trace: &Trace, range: Range<usize>) -> Vec<f64> {
        let len = trace.len();
        let dt = trace.step();
        match self {
            Node::Const(c) => vec![*c; range.len()],
            Node::Atom {
                terms,
                relation,
                threshold,
            } => range
                .map(|k| {
                    let value: f64 = terms.iter().map(|(i, c)| c * trace.column(*i)[k]).sum();
                    atom_robustness(*relation, value, *threshold)
                })
                .collect(),
            Node::Not(g) => g.eval(trace, range).into_iter().map(|v| -v).collect(),
            Node::And(l, r) => {
                let a = l.eval(trace, range.clone());
                let b = r.eval(trace, range);
                a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect()
            }
            Node::Or(l, r) => {
                let a = l.eval(trace, range.clone());
                let b = r.eval(trace, range);
                a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect()
            }
            Node::Eventually(i, g) | Node::Always(i, g) => {
                let maximize = matches!(self, Node::Eventually(..));
                let empty = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
                let offsets = i.sample_offsets(dt);
                let cr = child_range(&range, offsets, len);
                let child = if cr.is_empty() { Vec::new() } else { g.eval(trace, cr.clone()) };
                window_extremum(&child, cr.start, &range, offsets, len, maximize, empty)
            }
            Node::Until(i, l, r) | Node::Release(i, l, r) => {
                let until = matches!(self, Node::Until(..));
                let offsets = i.sample_offsets(dt);
                let rr = child_range(&range, offsets, len);
                // the left operand is needed from k up to the last window index (exclusive)
                let lr = range.start..rr.end.max(range.start + 1).min(len);
                let rhs = if rr.is_empty() { Vec::new() } else { r.eval(trace, rr.clone()) };
                let lhs = l.eval(trace, lr.clone());
                let (outer_empty, inner_empty) = if until {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (f64::INFINITY, f64::NEG_INFINITY)
                };
                range
                    .map(|k| {
                        let lo = k.saturating_add(offsets.0);
                        let hi = match offsets.1 {
                            Some(h) => k.saturating_add(h).min(len - 1),
                            None => len - 1,
                        };
                        let mut acc = outer_empty;
                        let mut prefix = inner_empty;
                        let mut t = k;
                        loop {
                            if t >= lo {
                                let v2 = rhs[t - rr.start];
                                acc = if until {
                                    acc.max(v2.min(prefix))
                                } else {
                                    acc.min(v2.max(prefix))
                                };
                            }
                            if t >= hi {
                                break;
                            }
                            let v1 = lhs[t - lr.start];
                            prefix = if until { prefix.min(v1) } else { prefix.max(v1) };
                            t += 1;
                        }
                        acc
                    })
                    .collect()
            }
        }
    }
}

/// A formula bound to a variable ordering, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Monitor {
    root: Node,
    variables: Vec<String>,
}

impl Monitor {
    /// Resolves every variable of `formula` against `variables`.
    pub fn new(formula: &Formula, variables: &[String]) -> Result<Self, StlError> {
        Ok(Monitor {
            root: compile(formula, variables)?,
            variables: variables.to_vec(),
        })
    }

    /// Robustness at sample `at`. The trace must carry the monitor's variables in order.
    pub fn robustness(&self, trace: &Trace, at: usize) -> Result<Robustness, StlError> {
        if at >= trace.len() {
            return Err(StlError::SampleOutOfRange {
                index: at,
                len: trace.len(),
            });
        }
        if trace.variables() != self.variables.as_slice() {
            return Err(StlError::InvalidTrace("trace variables do not match the monitor".into()));
        }
        Ok(Robustness(self.root.eval(trace, at..at + 1)[0]))
    }

    /// Robustness at every sample of the trace.
    pub fn robustness_signal(&self, trace: &Trace) -> Result<Vec<f64>, StlError> {
        if trace.variables() != self.variables.as_slice() {
            return Err(StlError::InvalidTrace("trace variables do not match the monitor".into()));
        }
        Ok(self.root.eval(trace, 0..trace.len()))
    }
}

/// Robustness of `formula` on `trace` at sample `at_sample`.
pub fn robustness(trace: &Trace, formula: &Formula, at_sample: usize) -> Result<Robustness, StlError> {
    Monitor::new(formula, trace.variables())?.robustness(trace, at_sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_formula;

    fn trace(name: &str, step: f64, values: Vec<f64>) -> Trace {
        Trace::new(vec![name.to_string()], step, vec![values]).unwrap()
    }

    fn rob(t: &Trace, s: &str, at: usize) -> f64 {
        robustness(t, &parse_formula(s).unwrap(), at).unwrap().value()
    }

    #[test]
    fn constant_signal_always() {
        let t = trace("x", 1.0, vec![5.0; 11]);
        assert_eq!(rob(&t, "alw_[0,10] (x > 3)", 0), 2.0);
    }

    #[test]
    fn until_on_ramp() {
        // x(t) = t; x > 2 first holds at t = 3 with value 1, and x < 10 holds before it.
        let t = trace("x", 1.0, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(rob(&t, "(x < 10) U_[0,3] (x > 2)", 0), 1.0);
    }

    #[test]
    fn vacuous_windows() {
        let t = trace("x", 1.0, vec![1.0; 5]);
        assert_eq!(rob(&t, "alw_[10,20] (x > 3)", 0), f64::INFINITY);
        assert_eq!(rob(&t, "ev_[10,20] (x > 3)", 0), f64::NEG_INFINITY);
        assert_eq!(rob(&t, "(x > 0) U_[10,20] (x > 3)", 0), f64::NEG_INFINITY);
        assert_eq!(rob(&t, "(x > 0) R_[10,20] (x > 3)", 0), f64::INFINITY);
        // window partially beyond the horizon is clipped
        assert_eq!(rob(&t, "ev_[3,20] (x > 3)", 0), -2.0);
    }

    #[test]
    fn constants_and_negation() {
        let t = trace("x", 1.0, vec![1.0; 3]);
        assert_eq!(rob(&t, "true", 0), f64::INFINITY);
        assert_eq!(rob(&t, "false", 0), f64::NEG_INFINITY);
        let f = parse_formula("true").unwrap().negate();
        assert_eq!(robustness(&t, &f, 0).unwrap().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn equality_atoms() {
        let t = trace("mode", 1.0, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(rob(&t, "mode = 1", 1), 0.5);
        assert_eq!(rob(&t, "mode = 1", 0), -0.5);
        assert_eq!(rob(&t, "ev_[0,3] (mode = 1)", 0), 0.5);
        assert_eq!(rob(&t, "alw_[0,3] (mode = 1)", 0), -0.5);
    }

    #[test]
    fn nonstrict_shares_strict_value() {
        let t = trace("x", 1.0, vec![2.0]);
        assert_eq!(rob(&t, "x >= 3", 0), rob(&t, "x > 3", 0));
        assert_eq!(rob(&t, "x <= 3", 0), rob(&t, "x < 3", 0));
    }

    #[test]
    fn unknown_variable_and_range_errors() {
        let t = trace("x", 1.0, vec![1.0; 3]);
        assert!(matches!(
            robustness(&t, &parse_formula("y > 0").unwrap(), 0),
            Err(StlError::UnknownVariable(v)) if v == "y"
        ));
        assert!(matches!(
            robustness(&t, &parse_formula("x > 0").unwrap(), 3),
            Err(StlError::SampleOutOfRange { .. })
        ));
    }

    #[test]
    fn implies_is_not_or() {
        let t = trace("x", 1.0, vec![1.0, 5.0, -2.0]);
        for k in 0..3 {
            assert_eq!(rob(&t, "x > 2 -> x < 0", k), rob(&t, "not (x > 2) \\/ x < 0", k));
        }
    }

    #[test]
    fn signal_matches_pointwise() {
        let t = trace("x", 0.5, vec![0.0, 3.0, -1.0, 4.0, 2.0, 2.5, -3.0]);
        let f = parse_formula("ev_[0,1] alw_[0.5,1] (x > 0) \\/ (x > 1) U_[0.5,2] (x < 0)").unwrap();
        let m = Monitor::new(&f, t.variables()).unwrap();
        let sig = m.robustness_signal(&t).unwrap();
        for (k, v) in sig.iter().enumerate() {
            assert_eq!(*v, m.robustness(&t, k).unwrap().value());
        }
    }
}
