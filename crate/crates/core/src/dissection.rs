//! Randomly shifted quadtree dissections and moat classification.
//!
//! The grid `[0, L)^d` (L a power of two) is cut by axis-aligned hyperplanes
//! shifted by a random integer vector, torus-wrapped modulo L. Points are
//! mapped into shifted ("q") space `q = (p - shift) mod L`, where regions are
//! plain aligned boxes; a region may therefore be geometrically split across
//! the original box. Subdivision stops at side 1 or at most one candidate
//! center inside.
//!
//! A dissection line's level is the level at which subdivision created it:
//! the root boundary is the single level-0 line per axis, and splitting a
//! level-(i-1) region creates level-i lines at odd multiples of `L / 2^i`.
//! A point is a moat point iff for some level i its distance (per axis, on
//! the torus) to a level-i line of the built tree is strictly below
//! `gamma * L / 2^i`.

use crate::instance::{Instance, Point, Solution};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub type RegionId = usize;

#[derive(Clone, Debug)]
pub struct Region {
    pub level: u32,
    /// Lower corner in shifted (q) space.
    pub corner: Vec<u64>,
    pub side: u64,
    /// `None` for leaves, otherwise exactly 2^d children partitioning this
    /// region.
    pub children: Option<Vec<RegionId>>,
    /// Client indices whose q-coordinates fall in this region.
    pub clients: Vec<usize>,
    /// Candidate indices whose q-coordinates fall in this region.
    pub candidates: Vec<usize>,
}

impl Region {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Dissection {
    pub dim: usize,
    pub grid_side: u64,
    pub shift: Vec<u64>,
    pub max_level: u32,
    /// Region arena; index 0 is the root.
    pub regions: Vec<Region>,
    /// `lines[level][axis]`: sorted q-space coordinates of the hyperplanes
    /// created at that level (level 0 is the root boundary at 0).
    pub lines: Vec<Vec<Vec<u64>>>,
}

/// Build a dissection of the instance's grid with a seeded uniform shift.
pub fn build_dissection(inst: &Instance, seed: u64) -> Dissection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = inst.grid_side;
    let shift: Vec<u64> = (0..inst.dim).map(|_| rng.random_range(0..l)).collect();
    build_dissection_with_shift(inst, shift)
}

/// Deterministic core of [`build_dissection`]; exposed so tests can pin the
/// shift.
pub fn build_dissection_with_shift(inst: &Instance, shift: Vec<u64>) -> Dissection {
    let l = inst.grid_side;
    assert!(l.is_power_of_two());
    assert_eq!(shift.len(), inst.dim);
    let max_level = l.trailing_zeros();
    let dim = inst.dim;

    let q_of = |p: &Point| -> Vec<u64> {
        p.coords
            .iter()
            .zip(&shift)
            .map(|(&c, &s)| (c as u64).wrapping_sub(s).wrapping_add(l) % l)
            .collect()
    };

    let client_q: Vec<Vec<u64>> = inst.clients.iter().map(&q_of).collect();
    let candidate_q: Vec<Vec<u64>> = inst.candidates.iter().map(&q_of).collect();

    let mut regions = vec![Region {
        level: 0,
        corner: vec![0; dim],
        side: l,
        children: None,
        clients: (0..inst.clients.len()).collect(),
        candidates: (0..inst.candidates.len()).collect(),
    }];
    let mut line_sets: Vec<Vec<BTreeSet<u64>>> = (0..=max_level)
        .map(|_| (0..dim).map(|_| BTreeSet::new()).collect())
        .collect();
    for axis_lines in line_sets[0].iter_mut() {
        axis_lines.insert(0);
    }

    let mut stack: Vec<RegionId> = vec![0];
    while let Some(id) = stack.pop() {
        let (level, corner, side) = {
            let r = &regions[id];
            (r.level, r.corner.clone(), r.side)
        };
        if side < 2 || regions[id].candidates.len() < 2 {
            continue; // leaf
        }
        let half = side / 2;
        for axis in 0..dim {
            line_sets[(level + 1) as usize][axis].insert(corner[axis] + half);
        }
        let n_children = 1usize << dim;
        let mut child_ids = Vec::with_capacity(n_children);
        for b in 0..n_children {
            let child_corner: Vec<u64> = (0..dim)
                .map(|j| corner[j] + if b >> j & 1 == 1 { half } else { 0 })
                .collect();
            child_ids.push(regions.len());
            regions.push(Region {
                level: level + 1,
                corner: child_corner,
                side: half,
                children: None,
                clients: Vec::new(),
                candidates: Vec::new(),
            });
        }
        let child_of = |q: &[u64]| -> usize {
            let mut b = 0usize;
            for j in 0..dim {
                if q[j] - corner[j] >= half {
                    b |= 1 << j;
                }
            }
            b
        };
        for i in 0..regions[id].clients.len() {
            let c = regions[id].clients[i];
            let b = child_of(&client_q[c]);
            regions[child_ids[b]].clients.push(c);
        }
        for i in 0..regions[id].candidates.len() {
            let c = regions[id].candidates[i];
            let b = child_of(&candidate_q[c]);
            regions[child_ids[b]].candidates.push(c);
        }
        stack.extend(child_ids.iter().rev());
        regions[id].children = Some(child_ids);
    }

    let lines = line_sets
        .into_iter()
        .map(|per_axis| {
            per_axis
                .into_iter()
                .map(|set| set.into_iter().collect())
                .collect()
        })
        .collect();

    Dissection {
        dim,
        grid_side: l,
        shift,
        max_level,
        regions,
        lines,
    }
}

impl Dissection {
    /// Map an original point into shifted space.
    pub fn q_coords(&self, p: &Point) -> Vec<u64> {
        p.coords
            .iter()
            .zip(&self.shift)
            .map(|(&c, &s)| (c as u64).wrapping_sub(s).wrapping_add(self.grid_side) % self.grid_side)
            .collect()
    }

    /// The leaf whose box contains the given q-coordinates.
    pub fn leaf_of(&self, q: &[u64]) -> RegionId {
        let mut id = 0;
        loop {
            let r = &self.regions[id];
            match &r.children {
                None => return id,
                Some(children) => {
                    let half = r.side / 2;
                    let mut b = 0usize;
                    for (j, &qj) in q.iter().enumerate().take(self.dim) {
                        if qj - r.corner[j] >= half {
                            b |= 1 << j;
                        }
                    }
                    id = children[b];
                }
            }
        }
    }

    /// Original-space anchor for a region: the image of its q-space center
    /// under the inverse shift (used as the origin for relative rounding).
    pub fn region_anchor(&self, id: RegionId) -> Vec<f64> {
        let r = &self.regions[id];
        let l = self.grid_side;
        (0..self.dim)
            .map(|j| {
                let base = (r.corner[j] + self.shift[j]) % l;
                let c = base as f64 + r.side as f64 / 2.0;
                if c >= l as f64 {
                    c - l as f64
                } else {
                    c
                }
            })
            .collect()
    }

    /// Is q inside the region's box?
    pub fn q_in_region(&self, id: RegionId, q: &[u64]) -> bool {
        let r = &self.regions[id];
        (0..self.dim).all(|j| q[j] >= r.corner[j] && q[j] < r.corner[j] + r.side)
    }

    /// Human-readable structure dump (stable, for golden tests).
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "L={} shift={:?} levels={}",
            self.grid_side, self.shift, self.max_level
        )
        .unwrap();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let r = &self.regions[id];
            let indent = "  ".repeat(r.level as usize);
            writeln!(
                out,
                "{indent}level={} corner={:?} side={} clients={} candidates={}{}",
                r.level,
                r.corner,
                r.side,
                r.clients.len(),
                r.candidates.len(),
                if r.is_leaf() { " leaf" } else { "" }
            )
            .unwrap();
            if let Some(children) = &r.children {
                stack.extend(children.iter().rev());
            }
        }
        out
    }
}

/// Per-point moat classification: `levels[i]` is the lowest dissection level
/// whose lines the point crowds (None = not a moat point).
#[derive(Clone, Debug)]
pub struct MoatFlags {
    pub gamma: f64,
    pub levels: Vec<Option<u32>>,
}

impl MoatFlags {
    pub fn is_moat(&self, idx: usize) -> bool {
        self.levels[idx].is_some()
    }

    pub fn count(&self) -> usize {
        self.levels.iter().filter(|l| l.is_some()).count()
    }
}

/// Classify each point against every level's physical lines: a point is an
/// (i, gamma)-moat point iff some axis-distance (torus) to a level-i line is
/// strictly below `gamma * L / 2^i`.
pub fn classify_moat(diss: &Dissection, points: &[Point], gamma: f64) -> MoatFlags {
    let l = diss.grid_side;
    let levels = points
        .iter()
        .map(|p| {
            let q = diss.q_coords(p);
            for level in 0..=diss.max_level {
                let threshold = gamma * (l >> level) as f64;
                if threshold <= 0.0 {
                    continue;
                }
                for (axis, &qa) in q.iter().enumerate().take(diss.dim) {
                    let coords = &diss.lines[level as usize][axis];
                    if coords.is_empty() {
                        continue;
                    }
                    if (torus_gap(coords, qa, l) as f64) < threshold {
                        return Some(level);
                    }
                }
            }
            None
        })
        .collect();
    MoatFlags { gamma, levels }
}

/// Moat subset of a solution's open centers.
pub fn moat_centers_of(
    diss: &Dissection,
    inst: &Instance,
    sol: &Solution,
    gamma: f64,
) -> BTreeSet<usize> {
    let pts: Vec<Point> = sol
        .open
        .iter()
        .map(|&i| inst.candidates[i].clone())
        .collect();
    let flags = classify_moat(diss, &pts, gamma);
    sol.open
        .iter()
        .copied()
        .zip(flags.levels.iter())
        .filter(|(_, lv)| lv.is_some())
        .map(|(i, _)| i)
        .collect()
}

/// Minimum torus distance from q to any coordinate in the sorted list.
fn torus_gap(sorted: &[u64], q: u64, l: u64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let idx = sorted.partition_point(|&c| c < q);
    let n = sorted.len();
    let mut best = u64::MAX;
    for c in [sorted[idx % n], sorted[(idx + n - 1) % n]] {
        let d = q.abs_diff(c);
        best = best.min(d.min(l - d));
    }
    best
}
