//! Randomized property tests for the module-level invariants: cost
//! evaluation symmetries, rounding windows, file-format round trips,
//! dissection determinism, baseline monotonicity, and DP output contracts.

use proptest::collection::vec;
use proptest::prelude::*;
use quadls::dissection::{build_dissection, classify_moat};
use quadls::dp::{find_improvement, DpConfig};
use quadls::instance::{
    eval_cost, generate_candidates, round_weights, snap_to_grid, Instance, Point,
};
use quadls::io::{parse_instance, write_instance};
use quadls::oracle::{exact_opt, exact_opt_delta, OracleBudget};
use quadls::seeding::{dsquared_seed, exhaustive_swap_search, lloyd_refine, SeedConfig};
use std::collections::BTreeSet;

/// A small random instance: d = 2, clients and candidates on a 256-grid,
/// k in 1..=3, optional weights.
fn small_instance(weighted: bool) -> impl Strategy<Value = Instance> {
    let coord = 0..256i64;
    let client = (coord.clone(), coord.clone()).prop_map(|(x, y)| Point::new(vec![x, y]));
    let cand = (0..256i64, 0..256i64, 0u32..=40).prop_map(move |(x, y, w)| {
        let weight = if weighted { w as f64 } else { 0.0 };
        (Point::new(vec![x, y]), weight)
    });
    (
        vec(client, 1..10),
        vec(cand, 3..8),
        1usize..=3,
        1usize..=8,
    )
        .prop_map(|(clients, mut candidates, k, eps_num)| {
            candidates.sort_by(|a, b| a.0.cmp(&b.0));
            candidates.dedup_by(|a, b| a.0 == b.0);
            let k = k.min(candidates.len());
            let epsilon = eps_num as f64 / 10.0;
            Instance::new(2, clients, candidates, k, epsilon).expect("valid small instance")
        })
}

/// A size-k open set drawn from the instance's candidates.
fn with_open_set(weighted: bool) -> impl Strategy<Value = (Instance, Vec<usize>)> {
    small_instance(weighted).prop_flat_map(|inst| {
        let nc = inst.candidates.len();
        let k = inst.k;
        proptest::sample::subsequence((0..nc).collect::<Vec<_>>(), k..=k)
            .prop_map(move |open| (inst.clone(), open))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Client order never changes a solution's cost.
    #[test]
    fn eval_cost_is_permutation_invariant((inst, open) in with_open_set(true)) {
        let base = eval_cost(&inst, &open).unwrap();
        let mut shuffled = inst.clone();
        shuffled.clients.reverse();
        let rev = eval_cost(&shuffled, &open).unwrap();
        prop_assert!((base.total() - rev.total()).abs() <= 1e-9 * base.total().abs().max(1.0));
    }

    /// Opening one more zero-weight center never increases total cost.
    #[test]
    fn zero_weight_centers_are_free_wins((inst, open) in with_open_set(false)) {
        let base = eval_cost(&inst, &open).unwrap();
        for extra in 0..inst.candidates.len() {
            if open.contains(&extra) {
                continue;
            }
            let mut bigger = open.clone();
            bigger.push(extra);
            let grown = eval_cost(&inst, &bigger).unwrap();
            prop_assert!(grown.total() <= base.total() + 1e-9);
        }
    }

    /// Rounded weights only grow, and any fixed solution's cost stays inside
    /// the (1+eps) multiplicative plus per-center additive window.
    #[test]
    fn weight_rounding_window_holds((inst, open) in with_open_set(true)) {
        let reference = eval_cost(&inst, &open).unwrap().total().max(1.0);
        let rounded = round_weights(&inst, reference);
        for (w0, w1) in inst.weights.iter().zip(&rounded.weights) {
            prop_assert!(w1 >= w0);
        }
        let before = eval_cost(&inst, &open).unwrap().total();
        let after = eval_cost(&rounded, &open).unwrap().total();
        let slack = open.len() as f64 * inst.epsilon * reference / inst.n() as f64;
        prop_assert!(after + 1e-9 >= before);
        prop_assert!(after <= (1.0 + inst.epsilon) * before + slack + 1e-9);
    }

    /// The candidate surrogate always contains every client point.
    #[test]
    fn surrogate_contains_all_clients(
        raw in vec((0..512i64, 0..512i64), 1..12),
        eps_num in 1usize..=8,
    ) {
        let clients: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(vec![x, y])).collect();
        let cands = generate_candidates(&clients, eps_num as f64 / 10.0, 2).unwrap();
        for c in &clients {
            prop_assert!(cands.contains(c));
        }
    }

    /// Snapping preserves nearest-neighbor order on triples whose distance
    /// gap is clearly above the snapping resolution.
    #[test]
    fn snapping_preserves_wide_nearest_neighbor_order(
        raw in vec((-1e3f64..1e3, -1e3f64..1e3), 3..=3),
    ) {
        let rows: Vec<Vec<f64>> = raw.iter().map(|&(x, y)| vec![x, y]).collect();
        let (pts, rec) = snap_to_grid(&rows, 0.5).unwrap();
        let d0 = |a: &[f64], b: &[f64]| ((a[0]-b[0]).powi(2) + (a[1]-b[1]).powi(2)).sqrt();
        let d1 = |a: &Point, b: &Point| {
            (((a.coords[0]-b.coords[0]).pow(2) + (a.coords[1]-b.coords[1]).pow(2)) as f64).sqrt()
        };
        let before = d0(&rows[0], &rows[1]) - d0(&rows[0], &rows[2]);
        // Only clearly separated gaps must survive: the documented bound is
        // 4 grid cells mapped back through the recorded scale.
        if before.abs() > 8.0 / rec.scale.max(f64::MIN_POSITIVE) {
            let after = d1(&pts[0], &pts[1]) - d1(&pts[0], &pts[2]);
            prop_assert_eq!(before < 0.0, after < 0.0);
        }
    }

    /// The instance text format round-trips bit-exactly.
    #[test]
    fn instance_file_round_trips((inst, _open) in with_open_set(true)) {
        let text = write_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back.clients, &inst.clients);
        prop_assert_eq!(&back.candidates, &inst.candidates);
        prop_assert_eq!(&back.weights, &inst.weights);
        prop_assert_eq!(back.k, inst.k);
        prop_assert_eq!(back.exponent_p, inst.exponent_p);
        prop_assert!((back.epsilon - inst.epsilon).abs() < 1e-12);
    }

    /// Identical (instance, seed) pairs give identical dissections; the
    /// regions partition candidates level by level.
    #[test]
    fn dissection_is_deterministic((inst, _open) in with_open_set(false), seed in any::<u64>()) {
        let a = build_dissection(&inst, seed);
        let b = build_dissection(&inst, seed);
        prop_assert_eq!(a.shift.clone(), b.shift.clone());
        prop_assert_eq!(a.regions.len(), b.regions.len());
        for (ra, rb) in a.regions.iter().zip(&b.regions) {
            prop_assert_eq!(ra.corner.clone(), rb.corner.clone());
            prop_assert_eq!(&ra.candidates, &rb.candidates);
            prop_assert_eq!(&ra.clients, &rb.clients);
        }
        let moat_a = classify_moat(&a, &inst.candidates, 0.01);
        let moat_b = classify_moat(&b, &inst.candidates, 0.01);
        prop_assert_eq!(moat_a.levels, moat_b.levels);
    }

    /// Refinement baselines never increase cost, and seeding is
    /// seed-deterministic.
    #[test]
    fn baselines_never_increase_cost((inst, _open) in with_open_set(false), seed in any::<u64>()) {
        let s1 = dsquared_seed(&inst, SeedConfig { seed, trials: 2 }).unwrap();
        let s2 = dsquared_seed(&inst, SeedConfig { seed, trials: 2 }).unwrap();
        prop_assert_eq!(&s1.open, &s2.open);
        let lloyd = lloyd_refine(&inst, &s1, 30).unwrap();
        prop_assert!(lloyd.total() <= s1.total() + 1e-9);
        let swapped = exhaustive_swap_search(&inst, &s1, 1, 0.0).unwrap();
        prop_assert!(swapped.total() <= s1.total() + 1e-9);
    }

    /// The exact optimum lower-bounds everything the other modules produce.
    #[test]
    fn exact_opt_is_a_lower_bound((inst, open) in with_open_set(true), seed in any::<u64>()) {
        let budget = OracleBudget::default();
        let opt = exact_opt(&inst, budget).unwrap();
        let fixed = eval_cost(&inst, &open).unwrap();
        prop_assert!(opt.total() <= fixed.total() + 1e-9);
        let seeded = dsquared_seed(&inst, SeedConfig { seed, trials: 1 }).unwrap();
        prop_assert!(opt.total() <= seeded.total() + 1e-9);
    }

    /// On unweighted instances with a full-size base solution, a swap radius
    /// of 2k reaches the global optimum.
    #[test]
    fn wide_swaps_reach_the_optimum((inst, open) in with_open_set(false)) {
        let budget = OracleBudget::default();
        let base = eval_cost(&inst, &open).unwrap();
        let wide = exact_opt_delta(&inst, &base, 2 * inst.k, &BTreeSet::new(), budget).unwrap();
        let opt = exact_opt(&inst, budget).unwrap();
        prop_assert!((wide.total() - opt.total()).abs() <= 1e-9 * opt.total().abs().max(1.0));
    }
}

proptest! {
    // The DP cases are heavier; fewer cases keep the suite quick.
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// DP output contract: at most k centers, every touched center is
    /// swappable (never moat), and the claimed total matches a from-scratch
    /// re-evaluation. Raising delta never yields a worse proposal.
    #[test]
    fn dp_output_contract(
        (inst, open) in with_open_set(false),
        seed in any::<u64>(),
    ) {
        let current = eval_cost(&inst, &open).unwrap();
        let diss = build_dissection(&inst, seed);
        let moat = classify_moat(&diss, &inst.candidates, 0.05);
        let cfg = DpConfig::desk(&inst, 2);
        let d1 = find_improvement(&inst, &current, &diss, &moat, 1, &cfg).unwrap();
        let d2 = find_improvement(&inst, &current, &diss, &moat, 2, &cfg).unwrap();
        for sol in [&d1, &d2] {
            prop_assert!(!sol.open.is_empty() && sol.open.len() <= inst.k);
            let recomputed = eval_cost(&inst, &sol.open).unwrap();
            prop_assert!(
                (sol.total() - recomputed.total()).abs()
                    <= 1e-9 * recomputed.total().abs().max(1.0)
            );
            let cur: BTreeSet<usize> = current.open.iter().copied().collect();
            let new: BTreeSet<usize> = sol.open.iter().copied().collect();
            for &touched in cur.symmetric_difference(&new) {
                prop_assert!(!moat.is_moat(touched), "moat center {touched} was swapped");
            }
        }
        prop_assert!(d2.total() <= d1.total() + 1e-9, "delta 2 must not lose to delta 1");
    }
}
