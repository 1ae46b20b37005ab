//! Shared test helpers: a random trace/formula generator and a direct,
//! quadratic-time evaluator of the quantitative semantics.

#![allow(dead_code)]

use conjsynth::stl::{AffineExpr, Formula, Interval, Relation, Trace};
use rand::seq::SliceRandom;
use rand::Rng;

const EPS: f64 = 1e-9;

fn in_window(interval: &Interval, offset: f64) -> bool {
    offset >= interval.lo() - EPS && offset <= interval.hi() + EPS
}

/// Evaluates each operator straight from its definition, enumerating every
/// sample of every window.
pub fn oracle(trace: &Trace, f: &Formula, k: usize) -> f64 {
    let n = trace.len();
    let dt = trace.step();
    let window = |i: &Interval| -> Vec<usize> { (k..n).filter(|&j| in_window(i, (j - k) as f64 * dt)).collect() };
    match f {
        Formula::True => f64::INFINITY,
        Formula::False => f64::NEG_INFINITY,
        Formula::Atom(a) => {
            let value: f64 = a
                .expr
                .terms()
                .iter()
                .map(|(name, c)| c * trace.values(name).unwrap()[k])
                .sum();
            match a.relation {
                Relation::Gt | Relation::Ge => value - a.threshold,
                Relation::Lt | Relation::Le => a.threshold - value,
                Relation::Eq => 0.5 - (value - a.threshold).abs(),
            }
        }
        Formula::Not(g) => -oracle(trace, g, k),
        Formula::And(l, r) => oracle(trace, l, k).min(oracle(trace, r, k)),
        Formula::Or(l, r) => oracle(trace, l, k).max(oracle(trace, r, k)),
        Formula::Implies(l, r) => (-oracle(trace, l, k)).max(oracle(trace, r, k)),
        Formula::Eventually(i, g) => window(i)
            .into_iter()
            .map(|j| oracle(trace, g, j))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always(i, g) => window(i)
            .into_iter()
            .map(|j| oracle(trace, g, j))
            .fold(f64::INFINITY, f64::min),
        Formula::Until(i, l, r) => window(i)
            .into_iter()
            .map(|j| {
                let before = (k..j).map(|m| oracle(trace, l, m)).fold(f64::INFINITY, f64::min);
                oracle(trace, r, j).min(before)
            })
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Release(i, l, r) => window(i)
            .into_iter()
            .map(|j| {
                let before = (k..j).map(|m| oracle(trace, l, m)).fold(f64::NEG_INFINITY, f64::max);
                oracle(trace, r, j).max(before)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Trace {
    let len = rng.gen_range(1..=max_len);
    let step = *[0.25, 0.5, 1.0].choose(rng).unwrap();
    let mut column = || -> Vec<f64> {
        (0..len)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(-3..=3) as f64
                } else {
                    rng.gen_range(-4.0..4.0)
                }
            })
            .collect()
    };
    let values = vec![column(), column()];
    Trace::new(vec!["x".into(), "y".into()], step, values).unwrap()
}

pub fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let lo = *[0.0, 0.0, 0.5, 1.0, 2.0, 3.25].choose(rng).unwrap();
    let width = *[0.25, 0.5, 1.0, 2.5, 5.0, f64::INFINITY].choose(rng).unwrap();
    Interval::new(lo, lo + width).unwrap()
}

fn random_atom<R: Rng>(rng: &mut R) -> Formula {
    if rng.gen_ratio(1, 20) {
        return if rng.gen_bool(0.5) { Formula::True } else { Formula::False };
    }
    let expr = match rng.gen_range(0..4) {
        0 => AffineExpr::var("x"),
        1 => AffineExpr::var("y"),
        2 => AffineExpr::from_terms([("x", 1.0), ("y", -1.0)]),
        _ => AffineExpr::from_terms([("x", 2.0), ("y", 0.5)]),
    };
    let relation = *[Relation::Gt, Relation::Ge, Relation::Lt, Relation::Le, Relation::Eq]
        .choose(rng)
        .unwrap();
    let threshold = rng.gen_range(-4..=4) as f64 / 2.0;
    Formula::atom(expr, relation, threshold)
}

/// A formula with `depth() <= depth`.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    if depth <= 1 || rng.gen_ratio(1, 5) {
        return random_atom(rng);
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 => Formula::not(random_formula(rng, d)),
        1 => Formula::and(random_formula(rng, d), random_formula(rng, d)),
        2 => Formula::or(random_formula(rng, d), random_formula(rng, d)),
        3 => Formula::implies(random_formula(rng, d), random_formula(rng, d)),
        4 => Formula::until(random_interval(rng), random_formula(rng, d), random_formula(rng, d)),
        5 => Formula::release(random_interval(rng), random_formula(rng, d), random_formula(rng, d)),
        6 => Formula::eventually(random_interval(rng), random_formula(rng, d)),
        _ => Formula::always(random_interval(rng), random_formula(rng, d)),
    }
}

/// Bitwise equality that also treats equal infinities as equal.
pub fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}
