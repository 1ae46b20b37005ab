//! Boolean satisfaction over sampled traces, using the same sampling
//! discipline as the robust semantics.

use super::ast::{Formula, Interval, Relation};
use super::{StlError, Trace};

fn window(trace: &Trace, at: usize, interval: Interval) -> impl Iterator<Item = usize> + '_ {
    (at..trace.len()).filter(move |&j| interval.contains((j - at) as f64 * trace.step()))
}

fn sat(trace: &Trace, f: &Formula, at: usize) -> Result<bool, StlError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            let mut value = 0.0;
            for (name, coeff) in a.expr.terms() {
                let column = trace
                    .values(name)
                    .ok_or_else(|| StlError::UnknownVariable(name.clone()))?;
                value += coeff * column[at];
            }
            match a.relation {
                Relation::Gt => value > a.threshold,
                Relation::Ge => value >= a.threshold,
                Relation::Lt => value < a.threshold,
                Relation::Le => value <= a.threshold,
                // integer-valued signals: nearest-integer equality
                Relation::Eq => (value - a.threshold).abs() < 0.5,
            }
        }
        Formula::Not(g) => !sat(trace, g, at)?,
        Formula::And(l, r) => {
            let a = sat(trace, l, at)?;
            sat(trace, r, at)? && a
        }
        Formula::Or(l, r) => {
            let a = sat(trace, l, at)?;
            sat(trace, r, at)? || a
        }
        Formula::Implies(l, r) => {
            let a = sat(trace, l, at)?;
            sat(trace, r, at)? || !a
        }
        Formula::Eventually(i, g) => {
            let mut any = false;
            for j in window(trace, at, *i) {
                any |= sat(trace, g, j)?;
            }
            any
        }
        Formula::Always(i, g) => {
            let mut all = true;
            for j in window(trace, at, *i) {
                all &= sat(trace, g, j)?;
            }
            all
        }
        Formula::Until(i, l, r) => {
            let mut found = false;
            for j in window(trace, at, *i) {
                let mut held = true;
                for t in at..j {
                    held &= sat(trace, l, t)?;
                }
                found |= held && sat(trace, r, j)?;
            }
            found
        }
        Formula::Release(i, l, r) => {
            let mut holds = true;
            for j in window(trace, at, *i) {
                let mut released = false;
                for t in at..j {
                    released |= sat(trace, l, t)?;
                }
                holds &= released || sat(trace, r, j)?;
            }
            holds
        }
    })
}

/// Classical satisfaction of `formula` by `trace` at sample `at_sample`.
pub fn boolean_sat(trace: &Trace, formula: &Formula, at_sample: usize) -> Result<bool, StlError> {
    if at_sample >= trace.len() {
        return Err(StlError::SampleOutOfRange {
            index: at_sample,
            len: trace.len(),
        });
    }
    // Validate variables up front so vacuous windows still report unknown names.
    for v in formula.variables() {
        if trace.index_of(&v).is_none() {
            return Err(StlError::UnknownVariable(v));
        }
    }
    sat(trace, formula, at_sample)
}
