//! Multiple constraint ranking.
//!
//! Each individual carries the robustness of the objective conjunct and of
//! every constraint conjunct. Scores are sums of per-population competition
//! ranks (ties share the smallest rank), so only the order of robustness
//! values matters, never their magnitude:
//!
//! * `RObj`: rank by objective, descending.
//! * `RCon^j`: rank by `min(0, constraint_j)`, descending. Positive margins are ignored.
//! * `RVNum`: rank by number of violated constraints (robustness `<= 0`), ascending.
//!
//! `F = RVNum + sum_j RCon^j`, plus `RObj` when at least one individual in
//! the population is feasible. Lower `F` is fitter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::DecisionVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McrError {
    #[error("empty population")]
    Empty,
    #[error("individual {index} has {got} constraints, expected {expected}")]
    Arity { index: usize, expected: usize, got: usize },
    #[error("individual {0} has a NaN robustness value")]
    NaN(usize),
    #[error("constraint index {index} out of range for {count} constraints")]
    ConstraintIndex { index: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedIndividual {
    pub decision: DecisionVector,
    /// Robustness of the objective conjunct.
    pub objective: f64,
    /// Robustness of each constraint conjunct.
    pub constraints: Vec<f64>,
}

impl EvaluatedIndividual {
    pub fn new(decision: DecisionVector, objective: f64, constraints: Vec<f64>) -> Self {
        EvaluatedIndividual {
            decision,
            objective,
            constraints,
        }
    }

    /// Number of constraints with robustness `<= 0`.
    pub fn violations(&self) -> usize {
        self.constraints.iter().filter(|&&c| c <= 0.0).count()
    }
}

/// Every constraint has strictly positive robustness.
pub fn is_feasible(ind: &EvaluatedIndividual) -> bool {
    ind.constraints.iter().all(|&c| c > 0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McrScore {
    pub r_obj: usize,
    pub r_con: Vec<usize>,
    pub r_vnum: usize,
    /// Whether `r_obj` contributes to `total` (some individual is feasible).
    pub objective_counted: bool,
    pub total: usize,
}

/// Competition ranks for "larger key is better": `1 + #{j : key_i < key_j}`.
fn ranks_descending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).expect("NaN filtered earlier"));
    let mut ranks = vec![0; keys.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && keys[order[pos - 1]] == keys[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    ranks
}

fn check(pop: &[EvaluatedIndividual]) -> Result<usize, McrError> {
    let first = pop.first().ok_or(McrError::Empty)?;
    let arity = first.constraints.len();
    for (index, ind) in pop.iter().enumerate() {
        if ind.constraints.len() != arity {
            return Err(McrError::Arity {
                index,
                expected: arity,
                got: ind.constraints.len(),
            });
        }
        if ind.objective.is_nan() || ind.constraints.iter().any(|c| c.is_nan()) {
            return Err(McrError::NaN(index));
        }
    }
    Ok(arity)
}

pub fn rank_objective(pop: &[EvaluatedIndividual]) -> Result<Vec<usize>, McrError> {
    check(pop)?;
    let keys: Vec<f64> = pop.iter().map(|i| i.objective).collect();
    Ok(ranks_descending(&keys))
}

/// Ranks by `min(0, constraint j)`; `j` is 0-based over the constraint list.
pub fn rank_constraint(pop: &[EvaluatedIndividual], j: usize) -> Result<Vec<usize>, McrError> {
    let arity = check(pop)?;
    if j >= arity {
        return Err(McrError::ConstraintIndex { index: j, count: arity });
    }
    let keys: Vec<f64> = pop.iter().map(|i| i.constraints[j].min(0.0)).collect();
    Ok(ranks_descending(&keys))
}

pub fn rank_violation_count(pop: &[EvaluatedIndividual]) -> Result<Vec<usize>, McrError> {
    check(pop)?;
    // fewer violations is better: negate to reuse the descending ranking
    let keys: Vec<f64> = pop.iter().map(|i| -(i.violations() as f64)).collect();
    Ok(ranks_descending(&keys))
}

pub fn score(pop: &[EvaluatedIndividual]) -> Result<Vec<McrScore>, McrError> {
    let arity = check(pop)?;
    let r_obj = rank_objective(pop)?;
    let r_vnum = rank_violation_count(pop)?;
    let r_con: Vec<Vec<usize>> = (0..arity).map(|j| rank_constraint(pop, j)).collect::<Result<_, _>>()?;
    let any_feasible = pop.iter().any(is_feasible);
    Ok((0..pop.len())
        .map(|i| {
            let cons: Vec<usize> = r_con.iter().map(|r| r[i]).collect();
            let mut total = r_vnum[i] + cons.iter().sum::<usize>();
            if any_feasible {
                total += r_obj[i];
            }
            McrScore {
                r_obj: r_obj[i],
                r_con: cons,
                r_vnum: r_vnum[i],
                objective_counted: any_feasible,
                total,
            }
        })
        .collect())
}

/// Selection order, fittest first: ascending `F`, ties by population index.
pub fn selection_order(pop: &[EvaluatedIndividual]) -> Result<Vec<usize>, McrError> {
    let scores = score(pop)?;
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by_key(|&i| scores[i].total);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(objective: f64, constraints: &[f64]) -> EvaluatedIndividual {
        EvaluatedIndividual::new(DecisionVector(vec![]), objective, constraints.to_vec())
    }

    fn table2() -> Vec<EvaluatedIndividual> {
        vec![ind(1400.0, &[59.9, -2.0]), ind(-9.0, &[2.0, 1.0]), ind(-180.0, &[2.0, -1.0])]
    }

    #[test]
    fn feasibility() {
        let t = table2();
        assert!(is_feasible(&t[1]));
        assert!(!is_feasible(&t[0]));
        assert!(is_feasible(&ind(-1.0, &[])));
        assert!(!is_feasible(&ind(1.0, &[0.0])));
    }

    #[test]
    fn worked_example_ranks() {
        let t = table2();
        assert_eq!(rank_objective(&t).unwrap(), vec![1, 2, 3]);
        assert_eq!(rank_constraint(&t, 0).unwrap(), vec![1, 1, 1]);
        assert_eq!(rank_constraint(&t, 1).unwrap(), vec![3, 1, 2]);
        assert_eq!(rank_violation_count(&t).unwrap(), vec![2, 1, 2]);
        let totals: Vec<usize> = score(&t).unwrap().iter().map(|s| s.total).collect();
        assert_eq!(totals, vec![7, 5, 8]);
        assert_eq!(selection_order(&t).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn competition_ties() {
        let all_equal = vec![ind(2.0, &[]), ind(2.0, &[]), ind(2.0, &[])];
        assert_eq!(rank_objective(&all_equal).unwrap(), vec![1, 1, 1]);
        let p = vec![ind(5.0, &[]), ind(5.0, &[]), ind(1.0, &[])];
        assert_eq!(rank_objective(&p).unwrap(), vec![1, 1, 3]);
        let p = vec![ind(0.0, &[-1.0, -1.0]), ind(0.0, &[-1.0, 1.0]), ind(0.0, &[1.0, 1.0])];
        assert_eq!(rank_violation_count(&p).unwrap(), vec![3, 2, 1]);
        let p = vec![ind(0.0, &[1.0]), ind(0.0, &[2.0])];
        assert_eq!(rank_violation_count(&p).unwrap(), vec![1, 1]);
    }

    #[test]
    fn satisfaction_margin_is_ignored() {
        let a = vec![ind(0.0, &[100.0]), ind(0.0, &[0.001])];
        let b = vec![ind(0.0, &[1.0]), ind(0.0, &[1.0])];
        assert_eq!(rank_constraint(&a, 0).unwrap(), rank_constraint(&b, 0).unwrap());
    }

    #[test]
    fn infeasible_branch_excludes_objective() {
        let p = vec![ind(5.0, &[-1.0, -2.0]), ind(9.0, &[-3.0, -5.0])];
        let s = score(&p).unwrap();
        assert_eq!(s.iter().map(|s| s.total).collect::<Vec<_>>(), vec![3, 5]);
        assert!(!s[0].objective_counted);
    }

    #[test]
    fn single_feasible_individual() {
        let s = score(&[ind(1.0, &[1.0, 2.0])]).unwrap();
        assert_eq!(s[0].total, 4);
        let s = score(&[ind(1.0, &[1.0])]).unwrap();
        assert_eq!(s[0].total, 3);
    }

    #[test]
    fn errors() {
        assert_eq!(score(&[]), Err(McrError::Empty));
        assert!(matches!(score(&[ind(0.0, &[1.0]), ind(0.0, &[])]), Err(McrError::Arity { index: 1, .. })));
        assert_eq!(score(&[ind(f64::NAN, &[])]), Err(McrError::NaN(0)));
        assert!(rank_constraint(&[ind(0.0, &[1.0])], 1).is_err());
    }

    #[test]
    fn infinities_rank_normally() {
        let p = vec![ind(f64::NEG_INFINITY, &[f64::INFINITY]), ind(0.0, &[f64::NEG_INFINITY])];
        assert_eq!(rank_objective(&p).unwrap(), vec![2, 1]);
        assert_eq!(rank_constraint(&p, 0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn removing_only_feasible_flips_branch() {
        let t = table2();
        assert!(score(&t).unwrap().iter().all(|s| s.objective_counted));
        let rest = vec![t[0].clone(), t[2].clone()];
        assert!(score(&rest).unwrap().iter().all(|s| !s.objective_counted));
    }

    // Literal set-cardinality evaluation of the ranking formulas.
    fn oracle(pop: &[EvaluatedIndividual]) -> Vec<usize> {
        let violated = |u: &EvaluatedIndividual| u.constraints.iter().filter(|&&c| c <= 0.0).count();
        let feasible = pop.iter().any(|u| u.constraints.iter().all(|&c| c > 0.0));
        pop.iter()
            .map(|u| {
                let robj = 1 + pop.iter().filter(|v| u.objective < v.objective).count();
                let rvnum = 1 + pop.iter().filter(|v| violated(u) > violated(v)).count();
                let rcon: usize = (0..u.constraints.len())
                    .map(|j| 1 + pop.iter().filter(|v| u.constraints[j].min(0.0) < v.constraints[j].min(0.0)).count())
                    .sum();
                rvnum + rcon + if feasible { robj } else { 0 }
            })
            .collect()
    }

    fn value() -> impl Strategy<Value = f64> {
        // small integers force ties
        prop_oneof![(-5i32..5).prop_map(f64::from), -1000.0f64..1000.0, Just(0.0)]
    }

    fn population() -> impl Strategy<Value = Vec<EvaluatedIndividual>> {
        (1usize..=8, 0usize..=4).prop_flat_map(|(size, arity)| {
            prop::collection::vec(
                (value(), prop::collection::vec(value(), arity)).prop_map(|(o, c)| ind(o, &c)),
                size,
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(pop in population()) {
            let got: Vec<usize> = score(&pop).unwrap().iter().map(|s| s.total).collect();
            prop_assert_eq!(got, oracle(&pop));
        }

        #[test]
        fn ranks_in_range(pop in population()) {
            let lambda = pop.len();
            let m = pop[0].constraints.len() + 1;
            for s in score(&pop).unwrap() {
                prop_assert!(s.r_obj >= 1 && s.r_obj <= lambda);
                prop_assert!(s.r_vnum >= 1 && s.r_vnum <= lambda);
                prop_assert!(s.r_con.iter().all(|&r| r >= 1 && r <= lambda));
                if s.objective_counted {
                    prop_assert!(s.total >= m && s.total <= (m + 1) * lambda);
                }
            }
        }

        #[test]
        fn positive_scaling_is_invisible(pop in population(), k in 1e-3f64..1e3, j in 0usize..4) {
            let base = score(&pop).unwrap();
            let mut scaled = pop.clone();
            for u in &mut scaled {
                u.objective *= k;
            }
            prop_assert_eq!(rank_objective(&scaled).unwrap(), rank_objective(&pop).unwrap());
            if j < pop[0].constraints.len() {
                let mut scaled = pop.clone();
                for u in &mut scaled {
                    u.constraints[j] *= k;
                }
                prop_assert_eq!(score(&scaled).unwrap(), base.clone());
                prop_assert_eq!(selection_order(&scaled).unwrap(), selection_order(&pop).unwrap());
            }
        }

        #[test]
        fn monotone_maps_fixing_zero_are_invisible(pop in population()) {
            // h(x) = x^3 + x is strictly increasing with h(0) = 0
            let h = |x: f64| x * x * x + x;
            let mut mapped = pop.clone();
            for u in &mut mapped {
                for c in &mut u.constraints {
                    *c = h(*c);
                }
                u.objective = h(u.objective);
            }
            prop_assert_eq!(score(&mapped).unwrap(), score(&pop).unwrap());
        }
    }
}
