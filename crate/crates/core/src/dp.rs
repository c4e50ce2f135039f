//! Dissection-guided dynamic program: find the best bounded-size swap.
//!
//! Given a current solution and a randomly shifted dissection, the DP
//! searches over "sketches": descriptions of at most `delta` center changes
//! (slots), each slot carrying a direction bit (remove an open center / add
//! a closed one), a weight-ladder key, and a rounded location. Locations are
//! rounded relative to a region of the dissection tree: a point inside the
//! region snaps to a `rho_grid`-nodes-per-axis internal grid, a point
//! outside snaps to a signed geometric ladder of per-axis offsets from the
//! region's center. Tables of sketch entries are built bottom-up over the
//! tree; entries with equal rounded sketches collapse to the cheapest
//! representative, which is what bounds table sizes by rounding resolution
//! instead of by instance size.
//!
//! Two implementation choices matter when reading this module:
//!
//! * Every slot carries a *witness*: the index of a concrete candidate that
//!   realizes the slot's rounded key. All stored service costs are computed
//!   from exact witness positions; rounded keys are used only to collapse
//!   duplicates and to match entries across levels. The root re-evaluates
//!   every surviving sketch with [`eval_cost`], so the returned solution's
//!   cost is exact regardless of how coarse the rounding is.
//! * Matching a child slot to a parent key is an exact lookup in a
//!   per-(region, child) map built by re-rounding every swappable candidate
//!   at both granularities. Along the chain of regions that carries the best
//!   available swap, each slot's key is the swapped center's own group key
//!   at that level, so that chain is never lost to re-rounding drift.

use crate::dissection::{Dissection, MoatFlags, RegionId};
use crate::error::Error;
use crate::instance::{eval_cost, pow_p, Instance, Point, Solution};
use crate::Result;
use smallvec::{smallvec, SmallVec};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Parameter presets for the DP's rounding machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpProfile {
    /// Resolution constants taken literally from the approximation analysis;
    /// far finer than useful in practice, kept for validating the rounding
    /// guarantees on tiny inputs.
    PaperFaithful,
    /// Engineering defaults: coarse ladders and small grids. The root's
    /// exact re-evaluation keeps returned costs exact either way; coarser
    /// rounding only collapses more aggressively.
    Desk,
}

/// Tuning knobs for [`find_improvement`].
#[derive(Clone, Debug)]
pub struct DpConfig {
    /// Default swap budget carried for builders (CLI, driver). Note that
    /// [`find_improvement`] takes the budget it should use as an explicit
    /// argument and ignores this field.
    pub delta: usize,
    /// Nodes per axis of a region's internal rounding grid.
    pub rho_grid: u32,
    /// Multiplicative step of the outside-offset ladder. Must be > 1.
    pub ladder_base: f64,
    /// The ladder floor of a region is `epsilon^exponent * side / log2(n)`;
    /// this is the exponent. Per-axis offsets below half the floor round to
    /// the zero rung.
    pub ladder_floor_exponent: f64,
    /// Multiplicative step of the opening-weight ladder. Must be > 1.
    pub weight_ladder_base: f64,
    /// Which preset produced this config.
    pub profile: DpProfile,
}

impl DpConfig {
    /// Engineering profile: 16 grid nodes per axis, ladder base `1 + eps`,
    /// ladder floor `eps * side / log2 n`, weight ladder base `1 + eps`.
    pub fn desk(inst: &Instance, delta: usize) -> Self {
        DpConfig {
            delta,
            rho_grid: 16,
            ladder_base: 1.0 + inst.epsilon,
            ladder_floor_exponent: 1.0,
            weight_ladder_base: 1.0 + inst.epsilon,
            profile: DpProfile::Desk,
        }
    }

    /// Analysis-grade profile: grid `ceil(2 * log2 n / eps^14)` nodes per
    /// axis (clamped to `u32::MAX`), ladder base `1 + eps / log2 n`, ladder
    /// floor `eps^14 * side / log2 n`. Only realized keys are ever stored,
    /// so the enormous nominal grid is harmless on the tiny instances this
    /// profile is meant for.
    pub fn paper_faithful(inst: &Instance, delta: usize) -> Self {
        let log_n = inst.log2_n();
        let eps = inst.epsilon;
        let rho = (2.0 * log_n / eps.powi(14)).ceil().min(u32::MAX as f64) as u32;
        DpConfig {
            delta,
            rho_grid: rho.max(1),
            ladder_base: 1.0 + eps / log_n,
            ladder_floor_exponent: 14.0,
            weight_ladder_base: 1.0 + eps,
            profile: DpProfile::PaperFaithful,
        }
    }
}

/// One axis of an outside-of-region location: either the zero rung (the
/// offset is below half the region's ladder floor) or a signed geometric
/// rung index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxisRung {
    Zero,
    Rung { negative: bool, index: u32 },
}

/// A location rounded relative to a region: a node of the region's internal
/// grid for points inside it, per-axis ladder rungs for points outside it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RoundedCoord {
    Inside { region: RegionId, nodes: Vec<u32> },
    Outside { region: RegionId, rungs: Vec<AxisRung> },
}

/// One slot of a sketch: a direction bit, a weight-ladder key, and a rounded
/// location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchSlot {
    /// `false` = close an open center, `true` = open a closed candidate.
    pub added: bool,
    pub weight_key: i64,
    pub coord: RoundedCoord,
}

/// A rounded description of a bounded-size swap.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SwapSketch {
    pub slots: Vec<SketchSlot>,
}

/// A sketch positioned at a region, with per-slot resolution state: slot `i`
/// is either pinned to a concrete candidate index or still unresolved.
#[derive(Clone, Debug)]
pub struct DpEntry {
    pub region: RegionId,
    pub sketch: SwapSketch,
    pub resolved: Vec<Option<usize>>,
    pub cost: f64,
}

/// Size counters from one [`find_improvement`] run.
#[derive(Clone, Copy, Debug, Default)]
pub struct DpStats {
    /// Regions whose table was actually built (content-free subtrees are
    /// skipped).
    pub regions_processed: usize,
    /// Largest finalized region table.
    pub max_table_entries: usize,
    /// Sum of finalized region table sizes.
    pub total_table_entries: usize,
    /// Sketches enumerated at leaves, before collapsing.
    pub leaf_sketches: u64,
    /// Entries in the root table.
    pub root_entries: usize,
    /// Exact cost evaluations performed on root survivors.
    pub root_evaluations: usize,
}

// ---------------------------------------------------------------------------
// Public rounding operations
//
// These use the analysis constants (ladder base `1 + eps/log n`, floor
// `eps^14 * side / log n`) so their guarantees can be checked directly; the
// engine below uses the same formulas with the profile's knobs instead.
// ---------------------------------------------------------------------------

/// Round a point that lies outside `region` to per-axis ladder rungs.
///
/// Applicability: the point must be outside the region's box in the shifted
/// frame, at Euclidean distance at least `eps * side / log_n` from it
/// (distance measured in the shifted frame, where the box is contiguous).
/// The rung vector itself is measured in original coordinates from the
/// region's anchor (the original-space image of its box center), so all
/// cost-relevant geometry stays in the original frame.
pub fn round_outside(
    diss: &Dissection,
    region: RegionId,
    point: &Point,
    epsilon: f64,
    log_n: f64,
) -> Result<RoundedCoord> {
    let q = diss.q_coords(point);
    if diss.q_in_region(region, &q) {
        return Err(Error::NotOutsideRegion {
            point: point.coords.clone(),
        });
    }
    let r = &diss.regions[region];
    let side = r.side as f64;
    let mut d2 = 0.0f64;
    for (j, &qc) in q.iter().enumerate().take(diss.dim) {
        let qj = qc as f64;
        let lo = r.corner[j] as f64;
        let hi = (r.corner[j] + r.side) as f64;
        let d = (lo - qj).max(qj - hi).max(0.0);
        d2 += d * d;
    }
    let dist = d2.sqrt();
    let threshold = epsilon * side / log_n;
    if dist < threshold {
        return Err(Error::TooCloseToRegion { dist, threshold });
    }
    let anchor = diss.region_anchor(region);
    let floor = epsilon.powi(14) * side / log_n;
    let inv_ln_base = 1.0 / (1.0 + epsilon / log_n).ln();
    let rungs = (0..diss.dim)
        .map(|j| {
            match axis_rung(point.coords[j] as f64 - anchor[j], floor, inv_ln_base) {
                AKey::Zero => AxisRung::Zero,
                AKey::Out { neg, idx } => AxisRung::Rung {
                    negative: neg,
                    index: idx,
                },
                AKey::In(_) => unreachable!("axis_rung never yields a grid node"),
            }
        })
        .collect();
    Ok(RoundedCoord::Outside { region, rungs })
}

/// Round a point that lies inside `region` to a node of the region's
/// internal grid (`rho_grid` nodes per axis, cell centers).
pub fn round_inside(
    diss: &Dissection,
    region: RegionId,
    point: &Point,
    rho_grid: u32,
) -> Result<RoundedCoord> {
    assert!(rho_grid >= 1, "the internal grid needs at least one node");
    let q = diss.q_coords(point);
    if !diss.q_in_region(region, &q) {
        return Err(Error::NotInsideRegion {
            point: point.coords.clone(),
        });
    }
    let r = &diss.regions[region];
    let spacing = r.side as f64 / rho_grid as f64;
    let nodes = (0..diss.dim)
        .map(|j| {
            let t = (((q[j] - r.corner[j]) as f64) / spacing).floor() as i64;
            t.clamp(0, rho_grid as i64 - 1) as u32
        })
        .collect();
    Ok(RoundedCoord::Inside { region, nodes })
}

/// Map a rounded location back to original-frame coordinates: the grid node
/// center for inside locations, anchor plus signed rung values for outside
/// ones. Regions whose box wraps around the shifted frame's seam are treated
/// as solid around their anchor, so positions within one region are always
/// mutually consistent; comparisons across regions on opposite sides of the
/// seam are not meaningful.
pub fn reconstruct(
    diss: &Dissection,
    coord: &RoundedCoord,
    epsilon: f64,
    log_n: f64,
    rho_grid: u32,
) -> Vec<f64> {
    match coord {
        RoundedCoord::Inside { region, nodes } => {
            let r = &diss.regions[*region];
            let anchor = diss.region_anchor(*region);
            let side = r.side as f64;
            let spacing = side / rho_grid as f64;
            nodes
                .iter()
                .enumerate()
                .map(|(j, &t)| anchor[j] - side / 2.0 + (t as f64 + 0.5) * spacing)
                .collect()
        }
        RoundedCoord::Outside { region, rungs } => {
            let r = &diss.regions[*region];
            let anchor = diss.region_anchor(*region);
            let side = r.side as f64;
            let floor = epsilon.powi(14) * side / log_n;
            let base = 1.0 + epsilon / log_n;
            rungs
                .iter()
                .enumerate()
                .map(|(j, rung)| {
                    anchor[j]
                        + match *rung {
                            AxisRung::Zero => 0.0,
                            AxisRung::Rung { negative, index } => {
                                let v = floor * base.powi(index as i32);
                                if negative {
                                    -v
                                } else {
                                    v
                                }
                            }
                        }
                })
                .collect()
        }
    }
}

fn coord_region(c: &RoundedCoord) -> RegionId {
    match c {
        RoundedCoord::Inside { region, .. } => *region,
        RoundedCoord::Outside { region, .. } => *region,
    }
}

/// Check that the child entries jointly refine the parent entry.
///
/// Slot-for-slot (slot `i` of every entry describes the same center):
/// direction bits and weight keys must agree exactly; each child's
/// reconstructed location must re-round at the parent's granularity to the
/// parent's key, with a `(1 ± eps/log_n)` per-axis tolerance on ladder
/// offsets (the finer ladder's value must sit within one multiplicative step
/// of the coarser rung) and nearest-node snapping for grid locations; and at
/// most one child may resolve each slot, in which case the parent must carry
/// exactly that resolution. Geometry near the shifted frame's wrap seam is
/// judged conservatively (see [`reconstruct`]).
pub fn compatible(
    diss: &Dissection,
    parent: &DpEntry,
    children: &[DpEntry],
    epsilon: f64,
    log_n: f64,
    rho_grid: u32,
) -> bool {
    let m = parent.sketch.slots.len();
    if parent.resolved.len() != m {
        return false;
    }
    for c in children {
        if c.sketch.slots.len() != m || c.resolved.len() != m {
            return false;
        }
    }
    let x = epsilon / log_n;
    let pr = &diss.regions[parent.region];
    let p_anchor = diss.region_anchor(parent.region);
    let p_side = pr.side as f64;
    let p_floor = epsilon.powi(14) * p_side / log_n;
    let p_spacing = p_side / rho_grid as f64;
    for i in 0..m {
        let ps = &parent.sketch.slots[i];
        if coord_region(&ps.coord) != parent.region {
            return false;
        }
        for c in children {
            let cs = &c.sketch.slots[i];
            if coord_region(&cs.coord) != c.region {
                return false;
            }
            if cs.added != ps.added || cs.weight_key != ps.weight_key {
                return false;
            }
            let cp = reconstruct(diss, &cs.coord, epsilon, log_n, rho_grid);
            match &ps.coord {
                RoundedCoord::Outside { rungs, .. } => {
                    for j in 0..diss.dim {
                        let vc = cp[j] - p_anchor[j];
                        let vp = match rungs[j] {
                            AxisRung::Zero => 0.0,
                            AxisRung::Rung { negative, index } => {
                                let v = p_floor * (1.0 + x).powi(index as i32);
                                if negative {
                                    -v
                                } else {
                                    v
                                }
                            }
                        };
                        if vp == 0.0 {
                            if vc.abs() > p_floor * (1.0 + x) {
                                return false;
                            }
                        } else {
                            let ratio = vc / vp;
                            if !(1.0 - x..=1.0 + x).contains(&ratio) {
                                return false;
                            }
                        }
                    }
                }
                RoundedCoord::Inside { nodes, .. } => {
                    for j in 0..diss.dim {
                        let t = ((cp[j] - (p_anchor[j] - p_side / 2.0)) / p_spacing - 0.5)
                            .round()
                            .clamp(0.0, rho_grid as f64 - 1.0) as u32;
                        if t != nodes[j] {
                            return false;
                        }
                    }
                }
            }
        }
        let mut resolver: Option<usize> = None;
        for c in children {
            if let Some(id) = c.resolved[i] {
                if resolver.is_some() {
                    return false; // a center anchors in at most one subtree
                }
                resolver = Some(id);
            }
        }
        if parent.resolved[i] != resolver {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// The table engine
// ---------------------------------------------------------------------------

/// One axis of an internal location key. `In` is a node of the region's
/// internal grid (point inside the region); `Zero`/`Out` are ladder rungs
/// (point outside). A key is all-`In` or all-ladder, never mixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum AKey {
    In(u32),
    Zero,
    Out { neg: bool, idx: u32 },
}

type CoordKey = SmallVec<[AKey; 2]>;
/// (direction, weight key, location key): the collapse identity of a slot.
type SlotKey = (bool, i64, CoordKey);
/// Sorted slot keys: the collapse identity of a whole sketch.
type SketchKey = SmallVec<[SlotKey; 4]>;

#[derive(Clone, Copy, Debug)]
struct SlotState {
    added: bool,
    wkey: i64,
    /// Candidate realizing the slot: the concrete center once resolved, the
    /// key group's representative while not.
    witness: u32,
    resolved: bool,
}

#[derive(Clone, Debug)]
struct TableEntry {
    /// Aligned with the slots of the entry's sketch key.
    slots: SmallVec<[SlotState; 4]>,
    /// Exact total service cost of all clients charged so far.
    cost: f64,
}

/// Finalized per-region table: one entry per sketch key.
type Table = BTreeMap<SketchKey, TableEntry>;
/// In-progress table: per sketch key, one entry per resolution mask.
type VarList = SmallVec<[TableEntry; 2]>;
type State = BTreeMap<SketchKey, VarList>;

/// Upper bound on parent-key combinations explored per registered child
/// entry. The true chain is always an exact single-option lookup, so the cap
/// only prunes speculative alternatives.
const REGISTER_COMBO_CAP: usize = 32;

struct Ctx<'a> {
    inst: &'a Instance,
    diss: &'a Dissection,
    moat: &'a MoatFlags,
    delta: usize,
    rho_grid: u32,
    open_mask: Vec<bool>,
    wkeys: Vec<i64>,
    cand_q: Vec<Vec<u64>>,
    cand_pos: Vec<Vec<f64>>,
    /// Per client: the `delta + 1` nearest currently-open centers with exact
    /// service costs, nearest first. At most `delta` of them can be excluded
    /// by any sketch, so the first non-excluded one always exists whenever
    /// the swap leaves any of them open.
    charge: Vec<SmallVec<[(u32, f64); 8]>>,
    /// Swappable (non-moat) open candidates, ascending.
    swap0: Vec<u32>,
    /// Swappable (non-moat) closed candidates, ascending.
    swap1: Vec<u32>,
    inv_ln_base: f64,
    /// floor(region) = floor_coeff * side(region).
    floor_coeff: f64,
}

struct Geom {
    rid: RegionId,
    corner: Vec<u64>,
    side: u64,
    anchor: Vec<f64>,
    floor: f64,
}

fn geom(ctx: &Ctx, rid: RegionId) -> Geom {
    let r = &ctx.diss.regions[rid];
    Geom {
        rid,
        corner: r.corner.clone(),
        side: r.side,
        anchor: ctx.diss.region_anchor(rid),
        floor: ctx.floor_coeff * r.side as f64,
    }
}

fn in_box(q: &[u64], corner: &[u64], side: u64) -> bool {
    q.iter().zip(corner).all(|(&qj, &cj)| qj >= cj && qj < cj + side)
}

fn axis_rung(v: f64, floor: f64, inv_ln_base: f64) -> AKey {
    let m = v.abs();
    if m < 0.5 * floor {
        return AKey::Zero;
    }
    let idx = ((m / floor).ln() * inv_ln_base).round().max(0.0) as u32;
    AKey::Out { neg: v < 0.0, idx }
}

fn coord_key(ctx: &Ctx, g: &Geom, cand: u32) -> CoordKey {
    let q = &ctx.cand_q[cand as usize];
    if in_box(q, &g.corner, g.side) {
        let spacing = g.side as f64 / ctx.rho_grid as f64;
        q.iter()
            .zip(&g.corner)
            .map(|(&qj, &cj)| {
                let t = (((qj - cj) as f64) / spacing).floor() as i64;
                AKey::In(t.clamp(0, ctx.rho_grid as i64 - 1) as u32)
            })
            .collect()
    } else {
        ctx.cand_pos[cand as usize]
            .iter()
            .zip(&g.anchor)
            .map(|(&p, &a)| axis_rung(p - a, g.floor, ctx.inv_ln_base))
            .collect()
    }
}

fn is_inside_key(k: &CoordKey) -> bool {
    matches!(k[0], AKey::In(_))
}

#[derive(Clone, Copy, Debug)]
struct KeyGroup {
    witness: u32,
    count: u32,
}

struct KeySets {
    d0: BTreeMap<(CoordKey, i64), KeyGroup>,
    d1: BTreeMap<(CoordKey, i64), KeyGroup>,
    /// Per-candidate keys aligned with `ctx.swap0` / `ctx.swap1`.
    key0: Vec<CoordKey>,
    key1: Vec<CoordKey>,
}

/// Group every swappable candidate by its (location key, weight key) with
/// respect to the region. Group representatives are the lowest candidate
/// index, which makes everything downstream deterministic.
fn keysets(ctx: &Ctx, g: &Geom) -> KeySets {
    let build = |list: &[u32]| {
        let mut map: BTreeMap<(CoordKey, i64), KeyGroup> = BTreeMap::new();
        let mut keys = Vec::with_capacity(list.len());
        for &c in list {
            let k = coord_key(ctx, g, c);
            keys.push(k.clone());
            map.entry((k, ctx.wkeys[c as usize]))
                .and_modify(|grp| grp.count += 1)
                .or_insert(KeyGroup { witness: c, count: 1 });
        }
        (map, keys)
    };
    let (d0, key0) = build(&ctx.swap0);
    let (d1, key1) = build(&ctx.swap1);
    KeySets { d0, d1, key0, key1 }
}

/// A subtree with no clients and no swappable candidates constrains nothing
/// and charges nothing; skipping it entirely is an exact shortcut.
fn skip_region(ctx: &Ctx, rid: RegionId) -> bool {
    let r = &ctx.diss.regions[rid];
    r.clients.is_empty() && r.candidates.iter().all(|&c| ctx.moat.is_moat(c))
}

fn better_entry(a: &TableEntry, b: &TableEntry) -> bool {
    if a.cost != b.cost {
        return a.cost < b.cost;
    }
    let wa = a.slots.iter().map(|s| s.witness);
    let wb = b.slots.iter().map(|s| s.witness);
    wa.cmp(wb) == std::cmp::Ordering::Less
}

fn resolution_mask(e: &TableEntry) -> u32 {
    let mut m = 0u32;
    for (i, s) in e.slots.iter().enumerate() {
        if s.resolved {
            m |= 1 << i;
        }
    }
    m
}

/// Keep at most one entry per resolution mask: the cheapest one.
fn push_variant(list: &mut VarList, e: TableEntry) {
    let mask = resolution_mask(&e);
    for x in list.iter_mut() {
        if resolution_mask(x) == mask {
            if better_entry(&e, x) {
                *x = e;
            }
            return;
        }
    }
    list.push(e);
}

fn sort_pairs(pairs: &mut [(SlotKey, SlotState)]) {
    pairs.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.resolved.cmp(&b.1.resolved).reverse())
            .then(a.1.witness.cmp(&b.1.witness))
    });
}

// --- leaf tables -----------------------------------------------------------

struct SlotOption {
    key: SlotKey,
    state: SlotState,
    max_mult: u32,
}

/// Build the per-direction slot options available at a leaf: every swappable
/// candidate inside the leaf individually (anchored: the slot is resolved to
/// it), plus one option per outside key group (unresolved), usable as many
/// times as the group has members.
fn leaf_options(ctx: &Ctx, g: &Geom, ks: &KeySets) -> (Vec<SlotOption>, Vec<SlotOption>) {
    let region = &ctx.diss.regions[g.rid];
    let mut opt0 = Vec::new();
    let mut opt1 = Vec::new();
    for &c in &region.candidates {
        if ctx.moat.is_moat(c) {
            continue;
        }
        let added = !ctx.open_mask[c];
        let key = coord_key(ctx, g, c as u32);
        debug_assert!(is_inside_key(&key));
        let wkey = ctx.wkeys[c];
        let opt = SlotOption {
            key: (added, wkey, key),
            state: SlotState {
                added,
                wkey,
                witness: c as u32,
                resolved: true,
            },
            max_mult: 1,
        };
        if added {
            opt1.push(opt);
        } else {
            opt0.push(opt);
        }
    }
    for (dir, set, opts) in [(false, &ks.d0, &mut opt0), (true, &ks.d1, &mut opt1)] {
        for ((ck, wk), grp) in set.iter() {
            if is_inside_key(ck) {
                continue; // members are in this leaf and anchored individually
            }
            opts.push(SlotOption {
                key: (dir, *wk, ck.clone()),
                state: SlotState {
                    added: dir,
                    wkey: *wk,
                    witness: grp.witness,
                    resolved: false,
                },
                max_mult: grp.count.min(ctx.delta as u32),
            });
        }
    }
    for opts in [&mut opt0, &mut opt1] {
        opts.sort_by(|a, b| a.key.cmp(&b.key).then(a.state.witness.cmp(&b.state.witness)));
    }
    (opt0, opt1)
}

/// Location keys (w.r.t. one leaf) of every candidate in that leaf's charge
/// lists, so exclusion tests don't re-round per sketch.
fn exclusion_keys(ctx: &Ctx, g: &Geom, clients: &[usize]) -> HashMap<u32, CoordKey> {
    let mut map = HashMap::new();
    for &a in clients {
        for &(cand, _) in &ctx.charge[a] {
            map.entry(cand).or_insert_with(|| coord_key(ctx, g, cand));
        }
    }
    map
}

struct LeafBuilder<'a> {
    ctx: &'a Ctx<'a>,
    clients: &'a [usize],
    opt0: Vec<SlotOption>,
    opt1: Vec<SlotOption>,
    exclusion_keys: HashMap<u32, CoordKey>,
    cur: Vec<(SlotKey, SlotState)>,
    table: Table,
    sketches: u64,
}

impl<'a> LeafBuilder<'a> {
    fn run(mut self, stats: &mut DpStats) -> Table {
        self.rec0(0);
        stats.leaf_sketches += self.sketches;
        self.table
    }

    /// Extend the current multiset of removal slots; at every prefix, branch
    /// into addition slots.
    fn rec0(&mut self, i: usize) {
        self.rec1(0, self.cur.len());
        if self.cur.len() >= self.ctx.delta {
            return;
        }
        for j in i..self.opt0.len() {
            let max_add = (self.opt0[j].max_mult as usize).min(self.ctx.delta - self.cur.len());
            for take in 1..=max_add {
                for _ in 0..take {
                    self.cur.push((self.opt0[j].key.clone(), self.opt0[j].state));
                }
                self.rec0(j + 1);
                for _ in 0..take {
                    self.cur.pop();
                }
            }
        }
    }

    /// Extend with addition slots, never letting additions outnumber
    /// removals and never exceeding the total budget.
    fn rec1(&mut self, i: usize, n0: usize) {
        self.emit();
        let total = self.cur.len();
        let n1 = total - n0;
        if total >= self.ctx.delta || n1 >= n0 {
            return;
        }
        for j in i..self.opt1.len() {
            let max_add = (self.opt1[j].max_mult as usize)
                .min(self.ctx.delta - total)
                .min(n0 - n1);
            for take in 1..=max_add {
                for _ in 0..take {
                    self.cur.push((self.opt1[j].key.clone(), self.opt1[j].state));
                }
                self.rec1(j + 1, n0);
                for _ in 0..take {
                    self.cur.pop();
                }
            }
        }
    }

    fn emit(&mut self) {
        self.sketches += 1;
        let mut pairs: SmallVec<[(SlotKey, SlotState); 4]> = self.cur.iter().cloned().collect();
        sort_pairs(&mut pairs);
        let cost = self.charge_clients(&pairs);
        if !cost.is_finite() {
            return; // the sketch leaves some client with no center at all
        }
        let key: SketchKey = pairs.iter().map(|(k, _)| k.clone()).collect();
        let entry = TableEntry {
            slots: pairs.into_iter().map(|(_, s)| s).collect(),
            cost,
        };
        match self.table.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(entry);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if better_entry(&entry, o.get()) {
                    *o.get_mut() = entry;
                }
            }
        }
    }

    /// Exact service cost of this leaf's clients under the sketch: each
    /// client pays the nearest kept center from its charge list (skipping
    /// centers the sketch removes) or the nearest added witness, whichever
    /// is cheaper.
    fn charge_clients(&self, pairs: &[(SlotKey, SlotState)]) -> f64 {
        let p = self.ctx.inst.exponent_p;
        let mut total = 0.0;
        for &a in self.clients {
            let mut best = f64::INFINITY;
            'kept: for &(cand, service) in &self.ctx.charge[a] {
                for (key, st) in pairs {
                    if !st.added && self.excludes(key, st, cand) {
                        continue 'kept;
                    }
                }
                best = service;
                break 'kept;
            }
            for (_, st) in pairs {
                if st.added {
                    let d = self.ctx.inst.clients[a]
                        .dist_p(&self.ctx.inst.candidates[st.witness as usize], p);
                    if d < best {
                        best = d;
                    }
                }
            }
            if !best.is_finite() {
                return f64::INFINITY;
            }
            total += best;
        }
        total
    }

    /// Does a removal slot exclude this open center? Resolved slots exclude
    /// exactly their witness; unresolved slots exclude every swappable
    /// center matching their key group.
    fn excludes(&self, key: &SlotKey, st: &SlotState, cand: u32) -> bool {
        if st.resolved {
            return st.witness == cand;
        }
        if self.ctx.moat.is_moat(cand as usize) {
            return false;
        }
        if self.ctx.wkeys[cand as usize] != st.wkey {
            return false;
        }
        match self.exclusion_keys.get(&cand) {
            Some(k) => *k == key.2,
            None => false,
        }
    }
}

fn leaf_table(ctx: &Ctx, g: &Geom, stats: &mut DpStats) -> Table {
    let ks = keysets(ctx, g);
    let (opt0, opt1) = leaf_options(ctx, g, &ks);
    let region = &ctx.diss.regions[g.rid];
    LeafBuilder {
        ctx,
        clients: &region.clients,
        opt0,
        opt1,
        exclusion_keys: exclusion_keys(ctx, g, &region.clients),
        cur: Vec::new(),
        table: Table::new(),
        sketches: 0,
    }
    .run(stats)
}

// --- lifting child tables into a parent ------------------------------------

/// For one (parent, child) pair: map a child-granularity slot key to the
/// parent slot keys it can stand for, with the parent group representative
/// attached. Built by re-rounding every swappable candidate outside the
/// child at both granularities, so along the true chain the lookup is an
/// exact hit on the center's own keys.
type DownMap = HashMap<(bool, i64, CoordKey), SmallVec<[(SlotKey, u32); 2]>>;

fn down_map(ctx: &Ctx, ks: &KeySets, child: &Geom) -> DownMap {
    let mut map: DownMap = HashMap::new();
    for (dir, list, keys, set) in [
        (false, &ctx.swap0, &ks.key0, &ks.d0),
        (true, &ctx.swap1, &ks.key1, &ks.d1),
    ] {
        for (pos, &c) in list.iter().enumerate() {
            if in_box(&ctx.cand_q[c as usize], &child.corner, child.side) {
                continue; // a center inside the child is anchored there, never remote
            }
            let ck = coord_key(ctx, child, c);
            let wk = ctx.wkeys[c as usize];
            let pk = &keys[pos];
            let rep = set[&(pk.clone(), wk)].witness;
            let slot: (SlotKey, u32) = ((dir, wk, pk.clone()), rep);
            let v = map.entry((dir, wk, ck)).or_default();
            if !v.contains(&slot) {
                v.push(slot);
            }
        }
    }
    for v in map.values_mut() {
        v.sort();
    }
    map
}

/// Re-key a finalized child table in the parent's key space. Resolved slots
/// re-round exactly from their witness; unresolved slots take every parent
/// key their child key can stand for (capped). Output keeps one entry per
/// (sketch key, resolution mask).
/// Per-slot re-keying choices while lifting a child entry into its parent.
type SlotOptions = SmallVec<[SmallVec<[(SlotKey, u32); 2]>; 4]>;

fn register(ctx: &Ctx, parent_g: &Geom, down: &DownMap, child_table: &Table) -> State {
    let mut out: State = BTreeMap::new();
    'entries: for (key, entry) in child_table {
        let m = entry.slots.len();
        let mut opts: SlotOptions = smallvec![];
        for i in 0..m {
            let st = &entry.slots[i];
            if st.resolved {
                let pk = coord_key(ctx, parent_g, st.witness);
                debug_assert!(is_inside_key(&pk), "anchored witnesses are inside the parent");
                opts.push(smallvec![((st.added, st.wkey, pk), st.witness)]);
            } else {
                match down.get(&key[i]) {
                    Some(list) if !list.is_empty() => opts.push(list.clone()),
                    _ => continue 'entries, // key matches no candidate outside the child
                }
            }
        }
        let mut idx: SmallVec<[usize; 4]> = smallvec![0; m];
        let mut combos = 0usize;
        loop {
            combos += 1;
            let mut pairs: SmallVec<[(SlotKey, SlotState); 4]> = smallvec![];
            for i in 0..m {
                let (k, w) = &opts[i][idx[i]];
                let st = &entry.slots[i];
                pairs.push((
                    k.clone(),
                    SlotState {
                        added: st.added,
                        wkey: st.wkey,
                        witness: *w,
                        resolved: st.resolved,
                    },
                ));
            }
            sort_pairs(&mut pairs);
            let skey: SketchKey = pairs.iter().map(|(k, _)| k.clone()).collect();
            let new_entry = TableEntry {
                slots: pairs.into_iter().map(|(_, s)| s).collect(),
                cost: entry.cost,
            };
            push_variant(out.entry(skey).or_default(), new_entry);
            if combos >= REGISTER_COMBO_CAP {
                break;
            }
            let mut i = 0;
            while i < m {
                idx[i] += 1;
                if idx[i] < opts[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == m {
                break;
            }
        }
    }
    out
}

/// Intersect the running state with one more child's registered table.
/// Entries merge per sketch key; client sets of different children are
/// disjoint, so costs add.
fn unify(a: State, b: State) -> State {
    let mut out = State::new();
    for (k, av) in a {
        if let Some(bv) = b.get(&k) {
            let mut merged = VarList::new();
            for x in &av {
                for y in bv {
                    if let Some(m) = merge_entries(&k, x, y) {
                        push_variant(&mut merged, m);
                    }
                }
            }
            if !merged.is_empty() {
                out.insert(k, merged);
            }
        }
    }
    out
}

/// Merge two same-key entries by pairing their slots within equal-key
/// blocks. A pairing is valid when no slot is resolved on both sides (a
/// center anchors in exactly one subtree) and all resolved witnesses stay
/// distinct. Within a block the pairing is forced up to permutation, so it
/// is constructed directly: resolved slots of either side absorb unresolved
/// slots of the other.
fn merge_entries(key: &SketchKey, a: &TableEntry, b: &TableEntry) -> Option<TableEntry> {
    let m = key.len();
    for sa in &a.slots {
        if sa.resolved {
            for sb in &b.slots {
                if sb.resolved && sb.witness == sa.witness {
                    return None;
                }
            }
        }
    }
    let mut slots: SmallVec<[SlotState; 4]> = smallvec![];
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && key[j] == key[i] {
            j += 1;
        }
        let size = j - i;
        let ar: SmallVec<[usize; 4]> = (i..j).filter(|&t| a.slots[t].resolved).collect();
        let br: SmallVec<[usize; 4]> = (i..j).filter(|&t| b.slots[t].resolved).collect();
        if ar.len() + br.len() > size {
            return None; // more anchored centers than slots of this key
        }
        let mut block: SmallVec<[SlotState; 4]> = smallvec![];
        for &t in &ar {
            block.push(a.slots[t]);
        }
        for &t in &br {
            block.push(b.slots[t]);
        }
        let fill = size - ar.len() - br.len();
        if fill > 0 {
            let t = (i..j)
                .find(|&t| !a.slots[t].resolved)
                .expect("unresolved filler exists when fill > 0");
            for _ in 0..fill {
                block.push(a.slots[t]);
            }
        }
        block.sort_by(|x, y| {
            x.resolved
                .cmp(&y.resolved)
                .reverse()
                .then(x.witness.cmp(&y.witness))
        });
        slots.extend(block);
        i = j;
    }
    Some(TableEntry {
        slots,
        cost: a.cost + b.cost,
    })
}

/// Close out a region: a slot whose key group lives inside the region but
/// that no child resolved is a contradiction, so such variants drop; the
/// survivors collapse to one entry per sketch key.
fn finalize_region(state: State) -> Table {
    let mut out = Table::new();
    for (k, vars) in state {
        let mut best: Option<TableEntry> = None;
        'vars: for v in vars {
            for (i, st) in v.slots.iter().enumerate() {
                if !st.resolved && is_inside_key(&k[i].2) {
                    continue 'vars;
                }
            }
            best = Some(match best {
                None => v,
                Some(b) => {
                    if better_entry(&v, &b) {
                        v
                    } else {
                        b
                    }
                }
            });
        }
        if let Some(b) = best {
            out.insert(k, b);
        }
    }
    out
}

fn region_table(ctx: &Ctx, rid: RegionId, stats: &mut DpStats) -> Table {
    let g = geom(ctx, rid);
    let region = &ctx.diss.regions[rid];
    let table = match &region.children {
        None => leaf_table(ctx, &g, stats),
        Some(children) => {
            let ks = keysets(ctx, &g);
            let mut state: Option<State> = None;
            for &ch in children {
                if skip_region(ctx, ch) {
                    continue;
                }
                let child_table = region_table(ctx, ch, stats);
                let child_g = geom(ctx, ch);
                let down = down_map(ctx, &ks, &child_g);
                let reg = register(ctx, &g, &down, &child_table);
                state = Some(match state {
                    None => reg,
                    Some(s) => unify(s, reg),
                });
            }
            match state {
                // All children skipped would make the region itself
                // skippable, and callers check that first; treating the
                // region as a leaf is a safe fallback either way.
                None => leaf_table(ctx, &g, stats),
                Some(s) => finalize_region(s),
            }
        }
    };
    stats.regions_processed += 1;
    stats.max_table_entries = stats.max_table_entries.max(table.len());
    stats.total_table_entries += table.len();
    table
}

// --- entry points -----------------------------------------------------------

fn weight_keys(inst: &Instance, wbase: f64) -> Vec<i64> {
    let wmin = inst
        .weights
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let inv = 1.0 / wbase.ln();
    inst.weights
        .iter()
        .map(|&w| {
            if w <= 0.0 {
                0
            } else {
                1 + ((w / wmin).ln() * inv).round() as i64
            }
        })
        .collect()
}

fn build_ctx<'a>(
    inst: &'a Instance,
    current: &Solution,
    diss: &'a Dissection,
    moat: &'a MoatFlags,
    delta: usize,
    config: &DpConfig,
) -> Ctx<'a> {
    let nc = inst.candidates.len();
    let mut open_mask = vec![false; nc];
    for &c in &current.open {
        open_mask[c] = true;
    }
    let p = inst.exponent_p;
    let charge: Vec<SmallVec<[(u32, f64); 8]>> = inst
        .clients
        .iter()
        .map(|a| {
            let mut ds: Vec<(i128, usize)> = current
                .open
                .iter()
                .map(|&c| (a.dist2(&inst.candidates[c]), c))
                .collect();
            ds.sort_unstable();
            ds.into_iter()
                .take(delta + 1)
                .map(|(d2, c)| (c as u32, pow_p(d2, p)))
                .collect()
        })
        .collect();
    let mut swap0 = Vec::new();
    let mut swap1 = Vec::new();
    for (c, &is_open) in open_mask.iter().enumerate().take(nc) {
        if !moat.is_moat(c) {
            if is_open {
                swap0.push(c as u32);
            } else {
                swap1.push(c as u32);
            }
        }
    }
    Ctx {
        inst,
        diss,
        moat,
        delta,
        rho_grid: config.rho_grid,
        open_mask,
        wkeys: weight_keys(inst, config.weight_ladder_base),
        cand_q: inst.candidates.iter().map(|p| diss.q_coords(p)).collect(),
        cand_pos: inst
            .candidates
            .iter()
            .map(|p| p.coords.iter().map(|&c| c as f64).collect())
            .collect(),
        charge,
        swap0,
        swap1,
        inv_ln_base: 1.0 / config.ladder_base.ln(),
        floor_coeff: inst.epsilon.powf(config.ladder_floor_exponent) / inst.log2_n(),
    }
}

/// Like [`find_improvement`], additionally reporting table-size counters.
pub fn find_improvement_with_stats(
    inst: &Instance,
    current: &Solution,
    diss: &Dissection,
    moat: &MoatFlags,
    delta: usize,
    config: &DpConfig,
) -> Result<(Solution, DpStats)> {
    assert_eq!(
        moat.levels.len(),
        inst.candidates.len(),
        "moat flags must classify the instance's candidate set"
    );
    let mut stats = DpStats::default();
    if delta == 0 {
        return Ok((current.clone(), stats));
    }
    let ctx = build_ctx(inst, current, diss, moat, delta, config);
    if skip_region(&ctx, 0) {
        return Ok((current.clone(), stats));
    }
    let root_table = region_table(&ctx, 0, &mut stats);
    stats.root_entries = root_table.len();
    let open_set: BTreeSet<usize> = current.open.iter().copied().collect();
    let mut best = current.clone();
    for entry in root_table.values() {
        if entry.slots.is_empty() {
            continue; // the empty swap: the current solution itself
        }
        debug_assert!(
            entry.slots.iter().all(|s| s.resolved),
            "root entries are fully resolved"
        );
        let mut open2 = open_set.clone();
        let mut valid = true;
        for st in &entry.slots {
            let c = st.witness as usize;
            if st.added {
                valid &= open2.insert(c);
            } else {
                valid &= open2.remove(&c);
            }
        }
        debug_assert!(valid, "a root sketch touches a candidate twice");
        if !valid || open2.is_empty() {
            continue;
        }
        assert!(
            open2.len() <= inst.k,
            "additions never outnumber removals, so k cannot be exceeded"
        );
        let open_vec: Vec<usize> = open2.into_iter().collect();
        let sol = eval_cost(inst, &open_vec)?;
        stats.root_evaluations += 1;
        if sol.total() < best.total() {
            best = sol;
        }
    }
    for &c in &best.open {
        if !open_set.contains(&c) {
            assert!(!moat.is_moat(c), "the DP opened a moat-protected center");
        }
    }
    let best_set: BTreeSet<usize> = best.open.iter().copied().collect();
    for &c in &current.open {
        if !best_set.contains(&c) {
            assert!(!moat.is_moat(c), "the DP closed a moat-protected center");
        }
    }
    Ok((best, stats))
}

/// Search all swaps of at most `delta` centers that avoid moat-protected
/// candidates (removals only touch open non-moat centers, additions only
/// closed non-moat candidates, additions never outnumber removals) and
/// return the best strictly improving one, or a clone of `current` if no
/// enumerated swap improves on it. The returned solution's cost fields come
/// from [`eval_cost`] and are exact.
pub fn find_improvement(
    inst: &Instance,
    current: &Solution,
    diss: &Dissection,
    moat: &MoatFlags,
    delta: usize,
    config: &DpConfig,
) -> Result<Solution> {
    find_improvement_with_stats(inst, current, diss, moat, delta, config).map(|(s, _)| s)
}
