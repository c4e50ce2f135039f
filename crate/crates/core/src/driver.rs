//! The iterated local-search driver.
//!
//! One run seeds a solution by D²-sampling, rounds the opening weights once
//! against that initial cost, and then repeats: draw a handful of
//! independently shifted dissections, ask [`find_improvement`] for the best
//! bounded-size swap under each, and apply the single best result — stopping
//! as soon as the best available improvement no longer exceeds
//! `epsilon * cost / k`. The final solution is re-evaluated against the
//! original (unrounded) weights.

use crate::dissection::{build_dissection, classify_moat};
use crate::dp::{find_improvement, DpConfig, DpProfile};
use crate::error::Error;
use crate::instance::{eval_cost, round_weights, Instance, Solution};
use crate::oracle::{exact_opt_delta, OracleBudget};
use crate::seeding::{dsquared_seed, SeedConfig};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Instant;

/// Independent D²-sampling restarts behind the driver's initial solution.
const SEED_TRIALS: usize = 3;

/// Configuration of one driver run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriverConfig {
    /// Master seed; every random choice in the run derives from it.
    pub seed: u64,
    /// Overrides the instance's epsilon when set (must lie in (0, 1)).
    pub epsilon: Option<f64>,
    /// Swap budget handed to the DP (a remove + add pair costs two).
    pub delta: usize,
    /// Moat width parameter; defaults to `epsilon^13 / log2 n`.
    pub gamma: Option<f64>,
    /// Dissections drawn per iteration; defaults to `max(3, ceil(log2 k))`.
    pub retries: Option<usize>,
    /// Rounding-resolution preset for the DP.
    pub profile: DpProfile,
}

impl DriverConfig {
    pub fn new(seed: u64, delta: usize) -> Self {
        DriverConfig {
            seed,
            epsilon: None,
            delta,
            gamma: None,
            retries: None,
            profile: DpProfile::Desk,
        }
    }
}

/// What happened in one do-while iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Working cost before this iteration.
    pub cost_before: f64,
    /// Total cost proposed by each dissection trial, in trial order.
    pub trial_costs: Vec<f64>,
    /// Best improvement on offer: `cost_before - min(trial_costs)`.
    pub improvement: f64,
    /// The loop guard `epsilon * cost_before / k`.
    pub threshold: f64,
    /// Whether the improvement cleared the guard and was applied.
    pub applied: bool,
    /// Working cost after this iteration.
    pub cost_after: f64,
    pub wall_ms: f64,
}

/// Full account of a driver run. Costs prefixed `working_` are measured on
/// the weight-rounded instance the loop optimizes; `initial_cost` and
/// `final_cost` are measured on the original instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriverTrace {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub working_initial_cost: f64,
    pub working_final_cost: f64,
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub wall_ms: f64,
}

fn default_gamma(inst: &Instance) -> f64 {
    inst.epsilon.powi(13) / inst.log2_n()
}

fn default_retries(k: usize) -> usize {
    ((k as f64).log2().ceil().max(0.0) as usize).max(3)
}

/// Run the full local-search scheme on `inst`.
///
/// Steps: D²-sample an initial solution; round opening weights once against
/// its cost; then, until the loop guard trips, draw `retries` independently
/// shifted dissections, run the swap DP under each (concurrently — they are
/// pure), and apply the single best proposal if it improves the working cost
/// by more than `epsilon * cost / k`. Identical `(inst, config)` pairs
/// produce identical traces.
pub fn run(inst: &Instance, config: &DriverConfig) -> Result<(Solution, DriverTrace)> {
    let started = Instant::now();
    let mut work = inst.clone();
    if let Some(e) = config.epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::BadEpsilon(e));
        }
        work.epsilon = e;
    }

    let seed_sol = dsquared_seed(
        &work,
        SeedConfig {
            seed: config.seed,
            trials: SEED_TRIALS,
        },
    )?;
    let initial_cost = eval_cost(inst, &seed_sol.open)?.total();

    // Round the opening weights once, against the initial cost (a zero
    // initial cost means the seed is already perfect and rounding is moot).
    let work = if seed_sol.total() > 0.0 {
        round_weights(&work, seed_sol.total())
    } else {
        work
    };
    let mut current = eval_cost(&work, &seed_sol.open)?;
    let working_initial_cost = current.total();

    let gamma = config.gamma.unwrap_or_else(|| default_gamma(&work));
    let retries = config.retries.unwrap_or_else(|| default_retries(work.k));
    let dp_config = match config.profile {
        DpProfile::Desk => DpConfig::desk(&work, config.delta),
        DpProfile::PaperFaithful => DpConfig::paper_faithful(&work, config.delta),
    };

    let mut records = Vec::new();
    // Trial seeds are pre-drawn so the parallel trials stay deterministic.
    let mut next_seed = {
        let mut state = config.seed;
        move || {
            // SplitMix64: cheap, well-distributed derivation of per-trial seeds.
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        }
    };

    loop {
        let iter_started = Instant::now();
        let cost_before = current.total();
        let trial_seeds: Vec<u64> = (0..retries).map(|_| next_seed()).collect();
        let proposals: Vec<Solution> = trial_seeds
            .par_iter()
            .map(|&s| {
                let diss = build_dissection(&work, s);
                let moat = classify_moat(&diss, &work.candidates, gamma);
                find_improvement(&work, &current, &diss, &moat, config.delta, &dp_config)
            })
            .collect::<Result<_>>()?;
        let trial_costs: Vec<f64> = proposals.iter().map(|p| p.total()).collect();
        let best = proposals
            .into_iter()
            .min_by(|a, b| {
                a.total()
                    .partial_cmp(&b.total())
                    .expect("working costs are finite")
                    .then_with(|| a.open.cmp(&b.open))
            })
            .expect("at least one dissection trial per iteration");
        let improvement = cost_before - best.total();
        let threshold = work.epsilon * cost_before / work.k as f64;
        let applied = improvement > threshold;
        if applied {
            current = best;
        }
        records.push(IterationRecord {
            iteration: records.len(),
            cost_before,
            trial_costs,
            improvement,
            threshold,
            applied,
            cost_after: current.total(),
            wall_ms: iter_started.elapsed().as_secs_f64() * 1e3,
        });
        if !applied {
            break;
        }
    }

    let final_sol = eval_cost(inst, &current.open)?;
    let trace = DriverTrace {
        initial_cost,
        final_cost: final_sol.total(),
        working_initial_cost,
        working_final_cost: current.total(),
        iterations: records.len(),
        records,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok((final_sol, trace))
}

/// Certify how far `solution` is from being swap-optimal: the largest cost
/// improvement any swap of at most `swap_size` centers achieves (removals
/// and additions together count toward `swap_size`, additions never
/// outnumber removals). Returns 0 for an exact local optimum at that radius.
/// Enumeration is guarded by `budget`.
pub fn verify_local_optimality(
    inst: &Instance,
    solution: &Solution,
    swap_size: usize,
    budget: OracleBudget,
) -> Result<f64> {
    let base = eval_cost(inst, &solution.open)?;
    let best = exact_opt_delta(inst, &base, swap_size, &BTreeSet::new(), budget)?;
    Ok((base.total() - best.total()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Point;
    use crate::oracle::exact_opt;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n_clients: usize, n_cands: usize, k: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point =
            |rng: &mut ChaCha8Rng| Point::new(vec![rng.random_range(0..512), rng.random_range(0..512)]);
        let clients: Vec<Point> = (0..n_clients).map(|_| point(&mut rng)).collect();
        let candidates: Vec<(Point, f64)> =
            (0..n_cands).map(|_| (point(&mut rng), 0.0)).collect();
        Instance::new(2, clients, candidates, k, 0.5).unwrap()
    }

    #[test]
    fn co_located_candidates_drive_the_cost_to_zero() {
        let pts: Vec<Point> = (0..4)
            .map(|i| Point::new(vec![100 * i, 50 * i + 7]))
            .collect();
        let candidates: Vec<(Point, f64)> = pts.iter().map(|p| (p.clone(), 0.0)).collect();
        let inst = Instance::new(2, pts, candidates, 4, 0.5).unwrap();
        let (sol, trace) = run(&inst, &DriverConfig::new(1, 2)).unwrap();
        assert_eq!(sol.total(), 0.0);
        assert_eq!(trace.final_cost, 0.0);
    }

    #[test]
    fn single_center_runs_land_near_the_enumerated_best() {
        for seed in 0..8u64 {
            let inst = random_instance(40 + seed, 9, 7, 1);
            let (sol, _) = run(&inst, &DriverConfig::new(seed, 2)).unwrap();
            let opt = exact_opt(&inst, OracleBudget::default()).unwrap();
            assert!(sol.total() >= opt.total() - 1e-9);
            assert!(
                sol.total() <= 2.0 * opt.total().max(1e-12),
                "seed {seed}: driver cost {} vs enumerated best {}",
                sol.total(),
                opt.total()
            );
        }
    }

    #[test]
    fn traces_respect_the_iteration_bound_and_loop_guard() {
        for seed in 0..6u64 {
            let inst = random_instance(70 + seed, 10, 8, 3);
            let (sol, trace) = run(&inst, &DriverConfig::new(seed, 2)).unwrap();
            assert!(sol.open.len() <= inst.k);
            assert!(!sol.open.is_empty());
            // Applied iterations must clear the guard and strictly shrink
            // the working cost; the last record is the non-applied stop.
            let mut applied = 0usize;
            for rec in &trace.records {
                if rec.applied {
                    applied += 1;
                    assert!(rec.improvement > rec.threshold);
                    assert!(rec.cost_after < rec.cost_before);
                } else {
                    assert_eq!(rec.cost_after, rec.cost_before);
                }
            }
            assert!(!trace.records.last().unwrap().applied);
            assert_eq!(applied, trace.iterations - 1);
            // Iteration bound with the initialization cost as the anchor.
            if trace.working_final_cost > 0.0 && trace.working_initial_cost > 0.0 {
                let bound = 4.0
                    * inst.k as f64
                    * (trace.working_initial_cost / trace.working_final_cost)
                        .ln()
                        .max(0.0)
                    + 1.0;
                assert!(
                    trace.iterations as f64 <= bound + 1e-9,
                    "seed {seed}: {} iterations exceed the bound {bound}",
                    trace.iterations
                );
            }
        }
    }

    #[test]
    fn identical_configs_produce_identical_traces() {
        let inst = random_instance(99, 10, 8, 3);
        let cfg = DriverConfig::new(12345, 2);
        let (a, ta) = run(&inst, &cfg).unwrap();
        let (b, tb) = run(&inst, &cfg).unwrap();
        assert_eq!(a.open, b.open);
        assert_eq!(ta.iterations, tb.iterations);
        for (ra, rb) in ta.records.iter().zip(&tb.records) {
            assert_eq!(ra.trial_costs, rb.trial_costs);
            assert_eq!(ra.applied, rb.applied);
            assert_eq!(ra.cost_after, rb.cost_after);
        }
    }

    #[test]
    fn certificates_report_zero_at_local_optima_and_the_gap_elsewhere() {
        let inst = random_instance(123, 8, 6, 2);
        let opt = exact_opt(&inst, OracleBudget::default()).unwrap();
        let at_opt =
            verify_local_optimality(&inst, &opt, 2, OracleBudget::default()).unwrap();
        assert_eq!(at_opt, 0.0);

        // A deliberately bad solution: the certificate must equal the best
        // single enumerated move's improvement.
        let worst = {
            let mut best: Option<Solution> = None;
            for c in 0..inst.candidates.len() {
                let sol = eval_cost(&inst, &[c]).unwrap();
                best = Some(match best {
                    None => sol,
                    Some(b) => {
                        if sol.total() > b.total() {
                            sol
                        } else {
                            b
                        }
                    }
                });
            }
            best.unwrap()
        };
        let gap = verify_local_optimality(&inst, &worst, 2, OracleBudget::default()).unwrap();
        let brute = exact_opt_delta(
            &inst,
            &worst,
            2,
            &BTreeSet::new(),
            OracleBudget::default(),
        )
        .unwrap();
        assert!((gap - (worst.total() - brute.total())).abs() <= 1e-9);
    }

    #[test]
    fn driver_outputs_pass_their_own_stop_certificate() {
        for seed in 0..4u64 {
            let inst = random_instance(200 + seed, 9, 7, 2);
            let (sol, _) = run(&inst, &DriverConfig::new(seed, 2)).unwrap();
            let gap =
                verify_local_optimality(&inst, &sol, 2, OracleBudget::default()).unwrap();
            // The loop stops when no dissection offers more than
            // eps * cost / k; the certificate sees every swap, including
            // those a dissection's moat hides, so allow rounding slack on
            // top of the guard.
            let slack = inst.epsilon * sol.total() / inst.k as f64
                + inst.epsilon * sol.total()
                + 1e-9;
            assert!(
                gap <= slack,
                "seed {seed}: certificate gap {gap} exceeds guard slack {slack}"
            );
        }
    }
}
