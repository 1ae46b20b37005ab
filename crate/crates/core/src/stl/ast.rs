use std::fmt;

/// Tolerance used when deciding whether a sample offset falls inside an interval.
pub const INTERVAL_EPS: f64 = 1e-9;

/// A non-singular time interval `[lo, hi]` in seconds. `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Returns `None` unless `0 <= lo < hi`.
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        if lo.is_finite() && lo >= 0.0 && !hi.is_nan() && lo < hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Whether a (relative) time offset lies in the closed interval.
    pub fn contains(&self, offset: f64) -> bool {
        offset >= self.lo - INTERVAL_EPS && offset <= self.hi + INTERVAL_EPS
    }

    /// Range of sample offsets `d` (in steps of `dt`) with `d * dt` inside the interval.
    /// The upper end is `None` when the interval is unbounded.
    pub(crate) fn sample_offsets(&self, dt: f64) -> (usize, Option<usize>) {
        const FAR: f64 = 1e15;
        if self.lo / dt >= FAR {
            return (usize::MAX, Some(0));
        }
        let mut first = ((self.lo - INTERVAL_EPS) / dt).ceil().max(0.0) as usize;
        while first > 0 && self.contains((first - 1) as f64 * dt) {
            first -= 1;
        }
        while !self.contains(first as f64 * dt) && (first as f64 * dt) < self.lo {
            first += 1;
        }
        if self.hi / dt >= FAR {
            return (first, None);
        }
        let mut last = ((self.hi + INTERVAL_EPS) / dt).floor().max(0.0) as usize;
        while self.contains((last + 1) as f64 * dt) {
            last += 1;
        }
        while last > 0 && (last as f64 * dt) > self.hi && !self.contains(last as f64 * dt) {
            last -= 1;
        }
        (first, Some(last))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi.is_infinite() {
            write!(f, "[{},inf]", self.lo)
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
        }
    }
}

/// Linear combination of named variables (the constant part lives in the atom threshold).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    terms: Vec<(String, f64)>,
}

impl AffineExpr {
    pub fn var(name: impl Into<String>) -> Self {
        AffineExpr {
            terms: vec![(name.into(), 1.0)],
        }
    }

    /// Builds an expression, merging repeated variables and dropping zero coefficients.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut out: Vec<(String, f64)> = Vec::new();
        for (name, coeff) in terms {
            let name = name.into();
            match out.iter_mut().find(|(n, _)| *n == name) {
                Some((_, c)) => *c += coeff,
                None => out.push((name, coeff)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        AffineExpr { terms: out }
    }

    pub fn terms(&self) -> &[(String, f64)] {
        &self.terms
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(n, _)| n.as_str())
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (name, coeff)) in self.terms.iter().enumerate() {
            let magnitude = coeff.abs();
            if i == 0 {
                if *coeff < 0.0 {
                    write!(f, "-")?;
                }
            } else if *coeff < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if magnitude == 1.0 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{magnitude}*{name}")?;
            }
        }
        Ok(())
    }
}

/// `expr <relation> threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub expr: AffineExpr,
    pub relation: Relation,
    pub threshold: f64,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.expr, self.relation.symbol(), self.threshold)
    }
}

/// STL formula tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Release(Interval, Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
}

impl Formula {
    pub fn atom(expr: AffineExpr, relation: Relation, threshold: f64) -> Self {
        Formula::Atom(Atom {
            expr,
            relation,
            threshold,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn until(interval: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(interval, Box::new(lhs), Box::new(rhs))
    }

    pub fn release(interval: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Release(interval, Box::new(lhs), Box::new(rhs))
    }

    pub fn eventually(interval: Interval, inner: Formula) -> Self {
        Formula::Eventually(interval, Box::new(inner))
    }

    pub fn always(interval: Interval, inner: Formula) -> Self {
        Formula::Always(interval, Box::new(inner))
    }

    /// Splits nested top-level conjunctions left to right.
    pub fn top_level_conjuncts(&self) -> Vec<Formula> {
        fn walk(f: &Formula, out: &mut Vec<Formula>) {
            match f {
                Formula::And(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other.clone()),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Negation. Removes a leading `Not` instead of stacking two.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::Not(inner) => (**inner).clone(),
            other => Formula::not(other.clone()),
        }
    }

    /// Variables referenced anywhere in the formula, in first-use order.
    pub fn variables(&self) -> Vec<String> {
        fn walk(f: &Formula, out: &mut Vec<String>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Atom(a) => {
                    for v in a.expr.variables() {
                        if !out.iter().any(|o| o == v) {
                            out.push(v.to_string());
                        }
                    }
                }
                Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => walk(g, out),
                Formula::And(l, r)
                | Formula::Or(l, r)
                | Formula::Implies(l, r)
                | Formula::Until(_, l, r)
                | Formula::Release(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Furthest finite time offset the formula inspects. Unbounded intervals
    /// contribute their lower end, since they are clipped to any horizon.
    pub fn time_reach(&self) -> f64 {
        let end = |i: &Interval| if i.hi().is_finite() { i.hi() } else { i.lo() };
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0.0,
            Formula::Not(g) => g.time_reach(),
            Formula::Eventually(i, g) | Formula::Always(i, g) => end(i) + g.time_reach(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => l.time_reach().max(r.time_reach()),
            Formula::Until(i, l, r) | Formula::Release(i, l, r) => end(i) + l.time_reach().max(r.time_reach()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => 1 + g.depth(),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Implies(l, r)
            | Formula::Until(_, l, r)
            | Formula::Release(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

// Fully parenthesized so that the output always parses back to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "({a})"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(l, r) => write!(f, "({l} /\\ {r})"),
            Formula::Or(l, r) => write!(f, "({l} \\/ {r})"),
            Formula::Implies(l, r) => write!(f, "({l} -> {r})"),
            Formula::Until(i, l, r) => write!(f, "({l} U_{i} {r})"),
            Formula::Release(i, l, r) => write!(f, "({l} R_{i} {r})"),
            Formula::Eventually(i, g) => write!(f, "(ev_{i} {g})"),
            Formula::Always(i, g) => write!(f, "(alw_{i} {g})"),
        }
    }
}
