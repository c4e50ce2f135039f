//! Brute-force oracles. Deliberately naive: straight enumeration over
//! `eval_cost`, sharing no logic with the search code they are used to check.

use crate::error::Error;
use crate::instance::{eval_cost, Instance, Solution};
use crate::Result;
use std::collections::BTreeSet;

/// Guard against runaway enumeration; oracles refuse to start when the
/// number of candidate solutions exceeds the budget.
#[derive(Clone, Copy, Debug)]
pub struct OracleBudget {
    pub max_solutions: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_solutions: 2_000_000,
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Visit all k-combinations of 0..n in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance to the next combination.
        let mut j = k;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if idx[j] != j + n - k {
                break;
            }
            if j == 0 {
                return;
            }
        }
        idx[j] += 1;
        for t in j + 1..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn better(challenger: &Solution, incumbent: &Solution) -> bool {
    challenger.total() < incumbent.total()
        || (challenger.total() == incumbent.total() && challenger.open < incumbent.open)
}

/// Exact optimum by full enumeration: all open sets of size exactly k when
/// every weight is zero (extra centers are then free wins, so the optimum
/// uses all k), and every size 1..=k otherwise. Ties break toward the
/// lexicographically smallest open set.
pub fn exact_opt(inst: &Instance, budget: OracleBudget) -> Result<Solution> {
    let nc = inst.candidates.len();
    let sizes: Vec<usize> = if inst.is_unweighted() {
        vec![inst.k]
    } else {
        (1..=inst.k).collect()
    };
    let needed: u128 = sizes.iter().map(|&s| binomial(nc, s)).sum();
    if needed > budget.max_solutions as u128 {
        return Err(Error::BudgetExhausted {
            needed: needed.min(u64::MAX as u128) as u64,
            budget: budget.max_solutions,
        });
    }
    let mut best: Option<Solution> = None;
    for &s in &sizes {
        for_each_combination(nc, s, |open| {
            let sol = eval_cost(inst, open).expect("enumerated open set is valid");
            if best.as_ref().is_none_or(|b| better(&sol, b)) {
                best = Some(sol);
            }
        });
    }
    best.ok_or(Error::EmptyCandidates)
}

/// Exact optimum among solutions within swap distance `delta` of `base`:
/// remove a set D1 from the open centers, add a set D2 of closed candidates,
/// with |D1| + |D2| <= delta, |D2| <= |D1|, no touched center in `forbidden`,
/// |S| <= k, and S nonempty. The base solution itself (empty swap) always
/// qualifies, so the result never costs more than `base`.
pub fn exact_opt_delta(
    inst: &Instance,
    base: &Solution,
    delta: usize,
    forbidden: &BTreeSet<usize>,
    budget: OracleBudget,
) -> Result<Solution> {
    let removable: Vec<usize> = base
        .open
        .iter()
        .copied()
        .filter(|i| !forbidden.contains(i))
        .collect();
    let open_set: BTreeSet<usize> = base.open.iter().copied().collect();
    let addable: Vec<usize> = (0..inst.candidates.len())
        .filter(|i| !open_set.contains(i) && !forbidden.contains(i))
        .collect();

    let mut needed: u128 = 0;
    for r in 0..=delta.min(removable.len()) {
        for a in 0..=r.min(delta.saturating_sub(r)).min(addable.len()) {
            needed += binomial(removable.len(), r) * binomial(addable.len(), a);
        }
    }
    if needed > budget.max_solutions as u128 {
        return Err(Error::BudgetExhausted {
            needed: needed.min(u64::MAX as u128) as u64,
            budget: budget.max_solutions,
        });
    }

    let mut best = eval_cost(inst, &base.open)?;
    for r in 0..=delta.min(removable.len()) {
        for_each_combination(removable.len(), r, |d1_idx| {
            let d1: BTreeSet<usize> = d1_idx.iter().map(|&i| removable[i]).collect();
            let kept: Vec<usize> = base
                .open
                .iter()
                .copied()
                .filter(|i| !d1.contains(i))
                .collect();
            for a in 0..=r.min(delta - r).min(addable.len()) {
                if kept.len() + a > inst.k || kept.len() + a == 0 {
                    continue;
                }
                for_each_combination(addable.len(), a, |d2_idx| {
                    let mut open = kept.clone();
                    open.extend(d2_idx.iter().map(|&i| addable[i]));
                    let sol = eval_cost(inst, &open).expect("enumerated open set is valid");
                    if better(&sol, &best) {
                        best = sol;
                    }
                });
            }
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Point;

    fn line_instance(k: usize) -> Instance {
        // Two well-separated pairs on a line; candidates sit on the clients.
        let xs = [0i64, 1, 100, 101];
        let clients: Vec<Point> = xs.iter().map(|&x| Point::new(vec![x, 0])).collect();
        let candidates = clients.iter().map(|p| (p.clone(), 0.0)).collect();
        Instance::new(2, clients, candidates, k, 0.25).unwrap()
    }

    #[test]
    fn exact_opt_finds_the_obvious_pair() {
        let inst = line_instance(2);
        let opt = exact_opt(&inst, OracleBudget::default()).unwrap();
        // {0, 100} and {1, 100} etc. all cost 2; lexicographic tie-break
        // keeps [0, 2].
        assert_eq!(opt.total(), 2.0);
        assert_eq!(opt.open, vec![0, 2]);
    }

    #[test]
    fn exact_opt_agrees_with_reverse_order_enumeration() {
        let inst = line_instance(2);
        let opt = exact_opt(&inst, OracleBudget::default()).unwrap();
        // Independent re-enumeration in reverse order must reach the same
        // optimal cost.
        let nc = inst.candidates.len();
        let mut best = f64::INFINITY;
        for i in (0..nc).rev() {
            for j in (0..i).rev() {
                best = best.min(eval_cost(&inst, &[j, i]).unwrap().total());
            }
        }
        assert_eq!(opt.total(), best);
    }

    #[test]
    fn exact_opt_considers_smaller_open_sets_when_weights_bite() {
        // Opening the second center costs more than it saves.
        let clients = vec![Point::new(vec![0]), Point::new(vec![4])];
        let candidates = vec![
            (Point::new(vec![0]), 1.0),
            (Point::new(vec![4]), 50.0),
        ];
        let inst = Instance::new(1, clients, candidates, 2, 0.25).unwrap();
        let opt = exact_opt(&inst, OracleBudget::default()).unwrap();
        assert_eq!(opt.open, vec![0]);
        assert_eq!(opt.total(), 17.0); // 0 + 16 service, 1 opening
    }

    #[test]
    fn budget_guard_reports_needed_count() {
        let inst = line_instance(2);
        let err = exact_opt(&inst, OracleBudget { max_solutions: 2 }).unwrap_err();
        match err {
            Error::BudgetExhausted { needed, budget } => {
                assert_eq!(needed, 6); // C(4, 2)
                assert_eq!(budget, 2);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn delta_oracle_fixes_a_bad_pair_with_one_swap() {
        let inst = line_instance(2);
        let base = eval_cost(&inst, &[0, 1]).unwrap();
        assert_eq!(base.total(), 9801.0 + 10000.0);
        let best = exact_opt_delta(
            &inst,
            &base,
            2,
            &BTreeSet::new(),
            OracleBudget::default(),
        )
        .unwrap();
        assert_eq!(best.total(), 2.0);
        assert_eq!(best.open, vec![0, 2]);
    }

    #[test]
    fn delta_oracle_honors_forbidden_sets() {
        let inst = line_instance(2);
        let base = eval_cost(&inst, &[0, 1]).unwrap();
        // Candidate 0 may not be removed, candidate 2 may not be added.
        let forbidden: BTreeSet<usize> = [0, 2].into_iter().collect();
        let best = exact_opt_delta(&inst, &base, 2, &forbidden, OracleBudget::default()).unwrap();
        assert_eq!(best.open, vec![0, 3]);
        assert_eq!(best.total(), 2.0);
    }

    #[test]
    fn delta_oracle_never_adds_more_than_it_removes() {
        // k = 2 but base opens only one center; |D2| <= |D1| forbids growth.
        let inst = line_instance(2);
        let base = eval_cost(&inst, &[0]).unwrap();
        let best = exact_opt_delta(
            &inst,
            &base,
            2,
            &BTreeSet::new(),
            OracleBudget::default(),
        )
        .unwrap();
        assert_eq!(best.open.len(), 1);
    }

    #[test]
    fn delta_oracle_respects_budget() {
        let inst = line_instance(2);
        let base = eval_cost(&inst, &[0, 1]).unwrap();
        let err = exact_opt_delta(
            &inst,
            &base,
            2,
            &BTreeSet::new(),
            OracleBudget { max_solutions: 1 },
        )
        .unwrap_err();
        assert!(err.is_budget());
    }
}
