//! Instance and solution types plus the exact cost arithmetic everything
//! else is measured against.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// A point on the integer grid.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<i64>,
}

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Exact squared Euclidean distance in integer arithmetic.
    pub fn dist2(&self, other: &Point) -> i128 {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        let mut acc: i128 = 0;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let d = (*a - *b) as i128;
            acc += d * d;
        }
        acc
    }

    /// dist(self, other)^p, computed from the exact squared distance.
    pub fn dist_p(&self, other: &Point, p: u32) -> f64 {
        pow_p(self.dist2(other), p)
    }
}

impl From<Vec<i64>> for Point {
    fn from(coords: Vec<i64>) -> Self {
        Point { coords }
    }
}

/// Raise an exact squared distance to the p/2-th power, i.e. dist^p.
pub fn pow_p(d2: i128, p: u32) -> f64 {
    let d2f = d2 as f64;
    match p {
        0 => {
            if d2 == 0 {
                0.0
            } else {
                1.0
            }
        }
        1 => d2f.sqrt(),
        2 => d2f,
        p if p % 2 == 0 => d2f.powi((p / 2) as i32),
        p => d2f.powf(f64::from(p) / 2.0),
    }
}

/// Compensated (Kahan) accumulator; `eval_cost` sums through this so that
/// cost comparisons between near-equal solutions are not at the mercy of
/// summation order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// A clustering instance: clients to serve, candidate centers with opening
/// weights, a center budget `k`, and the objective exponent `p`.
///
/// All points live on the integer grid `[0, grid_side)^dim`; `grid_side` is
/// always the smallest power of two exceeding every coordinate, so it is a
/// pure function of the points and never needs to be stored in files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub dim: usize,
    pub clients: Vec<Point>,
    pub candidates: Vec<Point>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub epsilon: f64,
    pub exponent_p: u32,
    pub grid_side: u64,
}

impl Instance {
    /// Build and validate an instance. `exponent_p` defaults to 2; use
    /// [`Instance::with_exponent`] for other objectives.
    pub fn new(
        dim: usize,
        clients: Vec<Point>,
        candidates: Vec<(Point, f64)>,
        k: usize,
        epsilon: f64,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if k == 0 {
            return Err(Error::KZero);
        }
        if k > candidates.len() {
            return Err(Error::KTooLarge {
                k,
                candidates: candidates.len(),
            });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::BadEpsilon(epsilon));
        }
        let (candidates, weights): (Vec<Point>, Vec<f64>) = candidates.into_iter().unzip();
        for p in clients.iter().chain(&candidates) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    got: p.dim(),
                    want: dim,
                });
            }
            for &c in &p.coords {
                if c < 0 {
                    return Err(Error::NegativeCoordinate(c));
                }
            }
        }
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadWeight(w));
            }
        }
        let grid_side = canonical_grid_side(clients.iter().chain(&candidates));
        Ok(Instance {
            dim,
            clients,
            candidates,
            weights,
            k,
            epsilon,
            exponent_p: 2,
            grid_side,
        })
    }

    pub fn with_exponent(mut self, p: u32) -> Self {
        self.exponent_p = p;
        self
    }

    /// Total instance size n = |clients| + |candidates|.
    pub fn n(&self) -> usize {
        self.clients.len() + self.candidates.len()
    }

    /// log2(n), floored at 1 so it is safe as a divisor.
    pub fn log2_n(&self) -> f64 {
        (self.n() as f64).log2().max(1.0)
    }

    /// True when every opening weight is zero (pure service-cost objective).
    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// Smallest power of two strictly greater than every coordinate (at least 1).
pub fn canonical_grid_side<'a>(points: impl IntoIterator<Item = &'a Point>) -> u64 {
    let mut max_coord: i64 = 0;
    for p in points {
        for &c in &p.coords {
            max_coord = max_coord.max(c);
        }
    }
    ((max_coord as u64) + 1).next_power_of_two()
}

/// A feasible solution: which candidates are open and how clients are served.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    /// Sorted candidate indices of the open centers.
    pub open: Vec<usize>,
    /// For each client, the candidate index of its serving open center
    /// (nearest open center, ties to the lowest candidate index).
    pub assignment: Vec<usize>,
    pub service_cost: f64,
    pub opening_cost: f64,
}

impl Solution {
    pub fn total(&self) -> f64 {
        self.service_cost + self.opening_cost
    }
}

/// Evaluate the exact cost of opening `open`: every client is assigned to its
/// nearest open center (ties to the lowest candidate index; nearest is decided
/// on exact integer squared distances), service costs are dist^p summed with
/// compensation, and opening weights are added.
pub fn eval_cost(inst: &Instance, open: &[usize]) -> Result<Solution> {
    if open.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    let mut open: Vec<usize> = open.to_vec();
    open.sort_unstable();
    open.dedup();
    for &i in &open {
        if i >= inst.candidates.len() {
            return Err(Error::CandidateOutOfRange {
                index: i,
                len: inst.candidates.len(),
            });
        }
    }
    let mut service = Kahan::default();
    let mut assignment = Vec::with_capacity(inst.clients.len());
    for a in &inst.clients {
        let mut best_d2 = i128::MAX;
        let mut best = open[0];
        for &c in &open {
            let d2 = a.dist2(&inst.candidates[c]);
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        assignment.push(best);
        service.add(pow_p(best_d2, inst.exponent_p));
    }
    let mut opening = Kahan::default();
    for &c in &open {
        opening.add(inst.weights[c]);
    }
    Ok(Solution {
        open,
        assignment,
        service_cost: service.value(),
        opening_cost: opening.value(),
    })
}

/// Round every positive weight up to the next rung of the geometric ladder
/// `(1+eps)^i * eps * reference_cost / n` with `i >= 0`; weights at or below
/// the base rung are rounded up to the base, zero weights stay zero.
///
/// For any fixed open set S this grows the total cost by at most a factor
/// (1+eps) plus an additive `eps * reference_cost / n` per opened center of
/// originally sub-base weight.
pub fn round_weights(inst: &Instance, reference_cost: f64) -> Instance {
    debug_assert!(
        reference_cost > 0.0,
        "round_weights needs a positive reference cost"
    );
    if reference_cost <= 0.0 {
        return inst.clone();
    }
    let eps = inst.epsilon;
    let base = eps * reference_cost / inst.n() as f64;
    let ratio = 1.0 + eps;
    let mut out = inst.clone();
    for w in &mut out.weights {
        if *w <= 0.0 {
            continue;
        }
        if *w <= base {
            *w = base;
            continue;
        }
        let mut i = ((*w / base).ln() / ratio.ln()).ceil().max(0.0) as i32;
        // Guard the float log against landing one rung off.
        while base * ratio.powi(i) < *w {
            i += 1;
        }
        while i > 0 && base * ratio.powi(i - 1) >= *w {
            i -= 1;
        }
        *w = base * ratio.powi(i);
    }
    out
}

/// Record of how raw real-valued geometry was mapped onto the grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapRecord {
    /// Grid units per original unit.
    pub scale: f64,
    /// Per-axis offset subtracted before scaling.
    pub offset: Vec<f64>,
    pub grid_side: u64,
}

/// Snap raw real-valued points onto an integer grid of side
/// `next_pow2(n / eps^2)`, preserving pairwise distances up to the grid
/// resolution: for every pair, |scaled_dist - scale * orig_dist| <= sqrt(d).
pub fn snap_to_grid(raw: &[Vec<f64>], epsilon: f64) -> Result<(Vec<Point>, SnapRecord)> {
    if raw.is_empty() {
        return Err(Error::Parse("snap_to_grid: no points".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let dim = raw[0].len();
    for p in raw {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                got: p.len(),
                want: dim,
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse("snap_to_grid: non-finite coordinate".into()));
        }
    }
    let mut min = raw[0].clone();
    let mut max = raw[0].clone();
    for p in raw {
        for j in 0..dim {
            min[j] = min[j].min(p[j]);
            max[j] = max[j].max(p[j]);
        }
    }
    let extent = (0..dim).map(|j| max[j] - min[j]).fold(0.0f64, f64::max);
    if extent == 0.0 {
        // Degenerate bounding box: everything lands on the origin of a
        // side-1 grid.
        let points = raw.iter().map(|_| Point::new(vec![0; dim])).collect();
        let record = SnapRecord {
            scale: 1.0,
            offset: min,
            grid_side: 1,
        };
        return Ok((points, record));
    }
    let target = (raw.len() as f64) / (epsilon * epsilon);
    let grid_side = (target.ceil().max(2.0) as u64).next_power_of_two();
    let scale = (grid_side - 1) as f64 / extent;
    let points = raw
        .iter()
        .map(|p| {
            Point::new(
                (0..dim)
                    .map(|j| {
                        let x = ((p[j] - min[j]) * scale).round();
                        (x as i64).clamp(0, grid_side as i64 - 1)
                    })
                    .collect(),
            )
        })
        .collect();
    Ok((
        points,
        SnapRecord {
            scale,
            offset: min,
            grid_side,
        },
    ))
}

/// Deterministic candidate surrogate: every client point, plus for each
/// client a grid of offsets at geometrically growing radii 2^j
/// (j = 0..log2 L) with per-ring resolution eps * 2^j, clamped to the grid.
pub fn generate_candidates(clients: &[Point], epsilon: f64, dim: usize) -> Result<Vec<Point>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    for p in clients {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                got: p.dim(),
                want: dim,
            });
        }
    }
    let grid_side = canonical_grid_side(clients.iter()) as i64;
    let jmax = (grid_side as u64).trailing_zeros(); // grid_side is a power of two
    let mut set: BTreeSet<Vec<i64>> = clients.iter().map(|p| p.coords.clone()).collect();
    let mut offsets: Vec<i64> = Vec::new();
    for client in clients {
        for j in 0..=jmax {
            let radius = 1i64 << j;
            let step = ((epsilon * radius as f64).round() as i64).max(1);
            let m = radius / step; // ring extends to +- m*step ~ +- radius
            offsets.clear();
            for t in -m..=m {
                offsets.push(t * step);
            }
            push_ring(&mut set, client, &offsets, dim, grid_side);
        }
    }
    Ok(set.into_iter().map(Point::new).collect())
}

fn push_ring(
    set: &mut BTreeSet<Vec<i64>>,
    client: &Point,
    offsets: &[i64],
    dim: usize,
    grid_side: i64,
) {
    // Cartesian product of per-axis offsets.
    let mut idx = vec![0usize; dim];
    loop {
        let coords: Vec<i64> = (0..dim)
            .map(|j| (client.coords[j] + offsets[idx[j]]).clamp(0, grid_side - 1))
            .collect();
        set.insert(coords);
        let mut j = 0;
        loop {
            if j == dim {
                return;
            }
            idx[j] += 1;
            if idx[j] < offsets.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[i64]) -> Point {
        Point::new(coords.to_vec())
    }

    fn unweighted(points: &[&[i64]]) -> Vec<(Point, f64)> {
        points.iter().map(|c| (pt(c), 0.0)).collect()
    }

    #[test]
    fn single_client_on_its_candidate_costs_nothing() {
        let inst = Instance::new(2, vec![pt(&[3, 4])], unweighted(&[&[3, 4]]), 1, 0.25).unwrap();
        let sol = eval_cost(&inst, &[0]).unwrap();
        assert_eq!(sol.total(), 0.0);
        assert_eq!(sol.assignment, vec![0]);
    }

    #[test]
    fn service_plus_opening_add_up() {
        // One client at distance 3 from the only candidate, weight 1.5, p = 2.
        let inst = Instance::new(
            2,
            vec![pt(&[0, 0])],
            vec![(pt(&[3, 0]), 1.5)],
            1,
            0.25,
        )
        .unwrap();
        let sol = eval_cost(&inst, &[0]).unwrap();
        assert_eq!(sol.service_cost, 9.0);
        assert_eq!(sol.opening_cost, 1.5);
        assert_eq!(sol.total(), 10.5);
    }

    #[test]
    fn ties_go_to_the_lowest_candidate_index() {
        let inst = Instance::new(
            1,
            vec![pt(&[5])],
            unweighted(&[&[4], &[6]]),
            2,
            0.25,
        )
        .unwrap();
        let sol = eval_cost(&inst, &[1, 0]).unwrap();
        assert_eq!(sol.assignment, vec![0]);
    }

    #[test]
    fn exponent_one_uses_plain_distances() {
        let inst = Instance::new(2, vec![pt(&[0, 0])], unweighted(&[&[3, 4]]), 1, 0.25)
            .unwrap()
            .with_exponent(1);
        let sol = eval_cost(&inst, &[0]).unwrap();
        assert_eq!(sol.service_cost, 5.0);
    }

    #[test]
    fn compensated_sum_is_exact_on_a_million_unit_terms() {
        // 10^6 clients at distance 1 plus one at distance 10^3: the exact
        // p = 2 total is 10^6 * 1 + 10^6 = 2 * 10^6.
        let mut clients = vec![pt(&[1, 0]); 1_000_000];
        clients.push(pt(&[1000, 0]));
        let inst = Instance::new(2, clients, unweighted(&[&[0, 0]]), 1, 0.25).unwrap();
        let sol = eval_cost(&inst, &[0]).unwrap();
        assert_eq!(sol.service_cost, 2_000_000.0);
    }

    #[test]
    fn eval_cost_rejects_bad_open_sets() {
        let inst = Instance::new(1, vec![pt(&[0])], unweighted(&[&[0]]), 1, 0.25).unwrap();
        assert!(matches!(eval_cost(&inst, &[]), Err(Error::EmptyOpenSet)));
        assert!(matches!(
            eval_cost(&inst, &[3]),
            Err(Error::CandidateOutOfRange { .. })
        ));
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(
            Instance::new(1, vec![], vec![], 1, 0.25),
            Err(Error::EmptyCandidates)
        ));
        assert!(matches!(
            Instance::new(1, vec![], unweighted(&[&[0]]), 2, 0.25),
            Err(Error::KTooLarge { .. })
        ));
        assert!(matches!(
            Instance::new(1, vec![], unweighted(&[&[0]]), 1, 0.0),
            Err(Error::BadEpsilon(_))
        ));
        assert!(matches!(
            Instance::new(1, vec![pt(&[-1])], unweighted(&[&[0]]), 1, 0.25),
            Err(Error::NegativeCoordinate(-1))
        ));
        assert!(matches!(
            Instance::new(1, vec![], vec![(pt(&[0]), -1.0)], 1, 0.25),
            Err(Error::BadWeight(_))
        ));
    }

    #[test]
    fn grid_side_is_canonical() {
        let inst = Instance::new(
            2,
            vec![pt(&[100, 3])],
            unweighted(&[&[0, 0]]),
            1,
            0.25,
        )
        .unwrap();
        assert_eq!(inst.grid_side, 128);
        let tiny = Instance::new(1, vec![pt(&[0])], unweighted(&[&[0]]), 1, 0.25).unwrap();
        assert_eq!(tiny.grid_side, 1);
    }

    // --- weight rounding ---------------------------------------------------

    /// 2 clients + 8 candidates makes n = 10, so with eps = 0.5 and
    /// reference 100 the ladder base is 0.5 * 100 / 10 = 5.
    fn ladder_instance(weights: &[f64]) -> Instance {
        assert_eq!(weights.len(), 8);
        let candidates = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (pt(&[i as i64, 0]), w))
            .collect();
        Instance::new(2, vec![pt(&[0, 1]), pt(&[1, 1])], candidates, 1, 0.5).unwrap()
    }

    #[test]
    fn weight_rounding_matches_hand_computed_rungs() {
        let inst = ladder_instance(&[7.0, 0.0, 5.0, 5.1, 4.0, 0.01, 7.5, 100.0]);
        let rounded = round_weights(&inst, 100.0);
        // base 5, rungs 5, 7.5, 11.25, ...
        assert_eq!(rounded.weights[0], 7.5); // 5 < 7 <= 7.5
        assert_eq!(rounded.weights[1], 0.0); // zero stays zero
        assert_eq!(rounded.weights[2], 5.0); // already a rung
        assert_eq!(rounded.weights[3], 7.5);
        assert_eq!(rounded.weights[4], 5.0); // below base rung 0? no: 4 <= 5 -> base
        assert_eq!(rounded.weights[5], 5.0); // sub-base floors at base
        assert_eq!(rounded.weights[6], 7.5); // exactly on a rung
        // 100/5 = 20, ladder: 1.5^7 = 17.08 < 20 <= 1.5^8 = 25.63
        assert!((rounded.weights[7] - 5.0 * 1.5f64.powi(8)).abs() < 1e-9);
    }

    #[test]
    fn weight_rounding_only_rounds_up_and_stays_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let weights: Vec<f64> = (0..8).map(|_| rng.random_range(0.0001..50.0)).collect();
        let inst = ladder_instance(&weights);
        let rounded = round_weights(&inst, 100.0);
        for (w, w2) in inst.weights.iter().zip(&rounded.weights) {
            assert!(w2 >= w, "rounded {w2} below original {w}");
            assert!(
                *w2 <= (1.5 * w).max(5.0) + 1e-12,
                "rounded {w2} above max(1.5*{w}, base)"
            );
        }
        // Fixed-solution cost bound: total'(S) <= (1+eps) total(S) + |S| * base.
        for open in [vec![0], vec![1, 2], vec![0, 3, 5, 7]] {
            let before = eval_cost(&inst, &open).unwrap().total();
            let after = eval_cost(&rounded, &open).unwrap().total();
            assert!(after >= before - 1e-12);
            assert!(after <= 1.5 * before + open.len() as f64 * 5.0 + 1e-9);
        }
    }

    // --- snapping ------------------------------------------------------------

    #[test]
    fn snap_degenerate_and_tiny_inputs() {
        let (pts, rec) = snap_to_grid(&[vec![2.5, -1.0]], 0.5).unwrap();
        assert_eq!(pts, vec![pt(&[0, 0])]);
        assert_eq!(rec.grid_side, 1);

        let (pts, rec) = snap_to_grid(&[vec![0.0, 0.0], vec![1.0, 1.0]], 0.5).unwrap();
        // n / eps^2 = 8, so the grid is [0,8)^2 and the extent maps to 7.
        assert_eq!(rec.grid_side, 8);
        assert_eq!(pts, vec![pt(&[0, 0]), pt(&[7, 7])]);
        assert_ne!(pts[0], pts[1]);
    }

    #[test]
    fn snap_preserves_pairwise_distances_to_grid_resolution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let raw: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.random_range(-3.0..5.0), rng.random_range(10.0..11.0)])
            .collect();
        let (pts, rec) = snap_to_grid(&raw, 0.5).unwrap();
        assert_eq!(rec.grid_side, 128); // next_pow2(20 / 0.25)
        for i in 0..raw.len() {
            for j in (i + 1)..raw.len() {
                let orig = ((raw[i][0] - raw[j][0]).powi(2) + (raw[i][1] - raw[j][1]).powi(2))
                    .sqrt();
                let scaled = (pts[i].dist2(&pts[j]) as f64).sqrt();
                assert!(
                    (scaled - rec.scale * orig).abs() <= 2f64.sqrt() + 1e-9,
                    "pair ({i},{j}): scaled {scaled}, expected ~{}",
                    rec.scale * orig
                );
            }
        }
    }

    // --- candidate surrogate --------------------------------------------------

    #[test]
    fn surrogate_contains_the_clients() {
        let clients = vec![pt(&[0, 0]), pt(&[40, 9])];
        let cands = generate_candidates(&clients, 0.5, 2).unwrap();
        for c in &clients {
            assert!(cands.contains(c));
        }
        // Deterministic: same call, same result.
        assert_eq!(cands, generate_candidates(&clients, 0.5, 2).unwrap());
    }

    #[test]
    fn surrogate_admits_a_near_optimal_one_means_center() {
        // Three collinear clients, k = 1, p = 2. The continuous optimum is the
        // centroid with cost sum (x - mean)^2; the best surrogate candidate
        // must be within a (1 + eps) factor at eps = 0.25.
        let xs = [0i64, 96, 256];
        let clients: Vec<Point> = xs.iter().map(|&x| pt(&[x, 0])).collect();
        let mean = xs.iter().sum::<i64>() as f64 / 3.0;
        let continuous: f64 = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum();

        let cands = generate_candidates(&clients, 0.25, 2).unwrap();
        let weighted = cands.iter().map(|c| (c.clone(), 0.0)).collect();
        let inst = Instance::new(2, clients, weighted, 1, 0.25).unwrap();
        let best = (0..inst.candidates.len())
            .map(|i| eval_cost(&inst, &[i]).unwrap().total())
            .fold(f64::INFINITY, f64::min);
        assert!(
            best <= 1.25 * continuous,
            "best candidate cost {best} vs continuous {continuous}"
        );
        assert!(best >= continuous - 1e-9);
    }
}
