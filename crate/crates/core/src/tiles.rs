//! Tiles in the space-frequency plane, tri-tiles, 1-trees and tri-tile
//! systems, with validators for the structural conditions a model sum needs.
//!
//! Order convention: `s ≤ t` iff `I_s ⊆ I_t` and `ω_t ⊆ ω_s`. A 1-tree with
//! top `t` is either the single tile matching `t`, or a set of tri-tiles with
//! `s ≤ t` (against the hull `ω_s`) whose first frequency component misses
//! `ω_t`. Under this reading the first components of a tree sit lacunary
//! around `ω_t`, which is what the scale-separation identity needs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::intervals::{counting_l1, counting_linf, is_grid, Interval};

/// A rectangle `I × ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    #[serde(rename = "I")]
    pub space: Interval,
    #[serde(rename = "omega")]
    pub freq: Interval,
}

impl Tile {
    pub fn new(space: Interval, freq: Interval) -> Self {
        Tile { space, freq }
    }

    pub fn area(&self) -> f64 {
        self.space.length * self.freq.length
    }

    pub fn intersects(&self, other: &Tile) -> bool {
        self.space.intersects(&other.space) && self.freq.intersects(&other.freq)
    }
}

/// One spatial interval with three frequency intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriTile {
    #[serde(rename = "I")]
    pub space: Interval,
    pub omega: [Interval; 3],
}

impl TriTile {
    pub fn new(space: Interval, omega: [Interval; 3]) -> Self {
        TriTile { space, omega }
    }

    /// Convex hull `ω_s` of the three frequency intervals.
    pub fn hull(&self) -> Interval {
        self.omega[0].hull(&self.omega[1]).hull(&self.omega[2])
    }

    pub fn component(&self, i: usize) -> Tile {
        Tile::new(self.space, self.omega[i])
    }

    pub fn hull_tile(&self) -> Tile {
        Tile::new(self.space, self.hull())
    }

    pub fn len(&self) -> f64 {
        self.space.length
    }
}

/// `s ≤ t` under the adopted convention: `I_s ⊆ I_t` and `ω_t ⊆ ω_s`.
pub fn tile_order(s: &Tile, t: &Tile) -> bool {
    s.space.is_subset_of(&t.space) && t.freq.is_subset_of(&s.freq)
}

/// Whether `tree` is a 1-tree with top `top`.
pub fn is_one_tree(tree: &[TriTile], top: &Tile) -> bool {
    if tree.is_empty() {
        return false;
    }
    if tree.len() == 1 && tree[0].space == top.space && tree[0].hull() == top.freq {
        return true;
    }
    tree.iter().all(|s| one_tree_member(s, top))
}

fn one_tree_member(s: &TriTile, top: &Tile) -> bool {
    (s.space == top.space && s.hull() == top.freq)
        || (tile_order(&s.hull_tile(), top) && !s.omega[0].intersects(&top.freq))
}

/// The affine map `a(ξ) = slope · ξ + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    #[serde(rename = "m_a")]
    pub slope: f64,
    #[serde(rename = "b")]
    pub intercept: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Affine { slope: 1.0, intercept: 0.0 }
    }
}

impl Affine {
    pub fn apply(&self, xi: f64) -> f64 {
        self.slope * xi + self.intercept
    }

    /// Image of an interval (as a half-open interval of the same orientation-free span).
    pub fn image(&self, iv: &Interval) -> Interval {
        let a = self.apply(iv.left);
        let b = self.apply(iv.right());
        Interval { left: a.min(b), length: (b - a).abs() }
    }
}

/// Constants derived from the rectangles of a system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    /// Proximity constant of `dist(ω_i, ω_j) ≤ K |ω_i|`.
    pub proximity: f64,
    /// `K := sup_s |I_s||ω_s|`.
    pub area_sup: f64,
    /// `K̃ := (1/4) inf_s |I_s||ω_s|`.
    pub area_tilde: f64,
    /// `β := inf_s |ω_{s,1}| / |ω_s|`.
    pub beta: f64,
}

/// Tri-tiles grouped into 1-trees under tops, plus the affine frequency map.
#[derive(Debug, Clone, PartialEq)]
pub struct TileSystem {
    pub tiles: Vec<TriTile>,
    pub tops: Vec<Tile>,
    pub tree_of: Vec<usize>,
    pub affine: Affine,
    pub proximity: f64,
}

#[derive(Serialize, Deserialize)]
struct TileSystemFile {
    tiles: Vec<TriTile>,
    tops: Vec<Tile>,
    tree_of: Vec<usize>,
    affine: Affine,
    constants: SystemConstants,
}

impl Serialize for TileSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TileSystemFile {
            tiles: self.tiles.clone(),
            tops: self.tops.clone(),
            tree_of: self.tree_of.clone(),
            affine: self.affine,
            constants: self.constants(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TileSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = TileSystemFile::deserialize(d)?;
        TileSystem::new(f.tiles, f.tops, f.tree_of, f.affine, f.constants.proximity)
            .map_err(serde::de::Error::custom)
    }
}

impl TileSystem {
    pub fn new(
        tiles: Vec<TriTile>,
        tops: Vec<Tile>,
        tree_of: Vec<usize>,
        affine: Affine,
        proximity: f64,
    ) -> Result<Self> {
        if tree_of.len() != tiles.len() {
            return Err(LabError::invalid("tree_of", "one top index per tile required"));
        }
        if let Some(&bad) = tree_of.iter().find(|&&t| t >= tops.len()) {
            return Err(LabError::invalid("tree_of", format!("top index {bad} out of range")));
        }
        if affine.slope == 0.0 {
            return Err(LabError::invalid("affine", "slope must be nonzero"));
        }
        Ok(TileSystem { tiles, tops, tree_of, affine, proximity })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.tiles.len()).collect()
    }

    pub fn constants(&self) -> SystemConstants {
        let areas = self.tiles.iter().map(|s| s.space.length * s.hull().length);
        let (lo, hi) = areas.fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
        let beta = self
            .tiles
            .iter()
            .map(|s| s.omega[0].length / s.hull().length)
            .fold(f64::INFINITY, f64::min);
        SystemConstants {
            proximity: self.proximity,
            area_sup: if self.tiles.is_empty() { 0.0 } else { hi },
            area_tilde: if self.tiles.is_empty() { 0.0 } else { 0.25 * lo },
            beta: if self.tiles.is_empty() { 1.0 } else { beta },
        }
    }

    /// `λ_t = a(c(ω_t))`.
    pub fn basepoint(&self, top: usize) -> f64 {
        self.affine.apply(self.tops[top].freq.center())
    }

    /// Members grouped by top, in ascending top order.
    pub fn trees(&self, members: &[usize]) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &s in members {
            out.entry(self.tree_of[s]).or_default().push(s);
        }
        out
    }

    /// Spatial intervals of the tops carrying at least one member.
    pub fn top_intervals(&self, members: &[usize]) -> Vec<Interval> {
        self.trees(members).keys().map(|&t| self.tops[t].space).collect()
    }

    /// `‖N_S‖_∞` over the tops of `members`.
    pub fn counting_linf(&self, members: &[usize]) -> usize {
        counting_linf(&self.top_intervals(members))
    }

    /// `‖N_S‖₁` over the tops of `members`.
    pub fn counting_l1(&self, members: &[usize]) -> f64 {
        counting_l1(&self.top_intervals(members))
    }

    pub fn spaces(&self, members: &[usize]) -> Vec<Interval> {
        members.iter().map(|&s| self.tiles[s].space).collect()
    }

    /// Applies a common translation and dilation to every spatial interval, with the
    /// reciprocal dilation on frequencies.
    pub fn transformed(&self, shift: f64, dilation: f64) -> TileSystem {
        let sp = |iv: &Interval| iv.scale(dilation).translate(shift);
        let fr = |iv: &Interval| iv.scale(1.0 / dilation);
        TileSystem {
            tiles: self
                .tiles
                .iter()
                .map(|s| TriTile::new(sp(&s.space), [fr(&s.omega[0]), fr(&s.omega[1]), fr(&s.omega[2])]))
                .collect(),
            tops: self.tops.iter().map(|t| Tile::new(sp(&t.space), fr(&t.freq))).collect(),
            tree_of: self.tree_of.clone(),
            affine: self.affine,
            proximity: self.proximity,
        }
    }
}

fn distinct(items: impl IntoIterator<Item = Interval>) -> Vec<Interval> {
    let mut v: Vec<Interval> = items.into_iter().collect();
    v.sort_by(crate::intervals::canonical_cmp);
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: String,
    pub pass: bool,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub conditions: Vec<ConditionResult>,
    /// `+1` when `ω₁` is the highest component, `-1` for the reflected order.
    pub orientation: i8,
}

impl ValidationReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

fn cond(name: &str, witnesses: Vec<String>) -> ConditionResult {
    ConditionResult { name: name.to_string(), pass: witnesses.is_empty(), witnesses }
}

const MAX_WITNESSES: usize = 8;

/// Checks the grid, ordering, compatibility, proximity, area, tree and
/// tree-disjointness conditions of a tri-tile system.
pub fn validate_tri_tile_system(sys: &TileSystem) -> ValidationReport {
    let mut conditions = Vec::new();

    let spaces = distinct(sys.tiles.iter().map(|s| s.space));
    let g = is_grid(&spaces);
    conditions.push(cond(
        "space_grid",
        g.bad_lengths
            .iter()
            .map(|&i| format!("length of {:?}", spaces[i]))
            .chain(g.overlapping_pairs.iter().map(|&(i, j)| format!("{:?} vs {:?}", spaces[i], spaces[j])))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    let freqs = distinct(sys.tiles.iter().flat_map(|s| s.omega));
    let g = is_grid(&freqs);
    conditions.push(cond(
        "freq_grid",
        g.bad_lengths
            .iter()
            .map(|&i| format!("length of {:?}", freqs[i]))
            .chain(g.overlapping_pairs.iter().map(|&(i, j)| format!("{:?} vs {:?}", freqs[i], freqs[j])))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    // ordering of the three components, in one orientation for the whole system
    let dir = |s: &TriTile| -> i8 {
        let (a, b, c) = (s.omega[0].right(), s.omega[1].right(), s.omega[2].right());
        if a > b && b > c {
            1
        } else if a < b && b < c {
            -1
        } else {
            0
        }
    };
    let orientation = sys.tiles.first().map(dir).unwrap_or(1);
    conditions.push(cond(
        "ordering",
        sys.tiles
            .iter()
            .enumerate()
            .filter(|(_, s)| dir(s) == 0 || dir(s) != orientation)
            .map(|(i, s)| format!("tile {i}: sups {:?}", s.omega.map(|w| w.right())))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    let mut w = Vec::new();
    'outer: for (i, s) in sys.tiles.iter().enumerate() {
        for wi in &s.omega {
            for big in &freqs {
                if wi.is_subset_of(big) && wi != big && !s.omega.iter().all(|wj| wj.is_subset_of(big)) {
                    w.push(format!("tile {i}: {wi:?} ⊊ {big:?} but a sibling escapes"));
                    if w.len() >= MAX_WITNESSES {
                        break 'outer;
                    }
                }
            }
        }
    }
    conditions.push(cond("grid_compat", w));

    conditions.push(cond(
        "proximity",
        sys.tiles
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                (0..3).flat_map(move |a| (0..3).map(move |b| (i, s, a, b)))
            })
            .filter(|&(_, s, a, b)| a != b && s.omega[a].dist(&s.omega[b]) > sys.proximity * s.omega[a].length)
            .map(|(i, _, a, b)| format!("tile {i}: components {} and {}", a + 1, b + 1))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    let mut w = Vec::new();
    for comp in 0..3 {
        let areas: Vec<f64> = sys.tiles.iter().map(|s| s.space.length * s.omega[comp].length).collect();
        let lo = areas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = areas.iter().copied().fold(0.0, f64::max);
        if !areas.is_empty() && hi > std::f64::consts::SQRT_2 * lo {
            w.push(format!("component {}: area ratio {}", comp + 1, hi / lo));
        }
    }
    conditions.push(cond("area", w));

    let members = sys.all();
    conditions.push(cond(
        "trees",
        sys.trees(&members)
            .iter()
            .filter(|(&t, ss)| {
                let tree: Vec<TriTile> = ss.iter().map(|&s| sys.tiles[s]).collect();
                !is_one_tree(&tree, &sys.tops[t])
            })
            .map(|(&t, _)| format!("top {t}"))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    conditions.push(cond(
        "tree_disjoint",
        tree_overlaps(sys, &members)
            .into_iter()
            .map(|(a, b)| format!("trees {a} and {b} overlap"))
            .take(MAX_WITNESSES)
            .collect(),
    ));

    let c = sys.constants();
    conditions.push(cond(
        "beta",
        if c.beta > 0.0 && c.beta <= 1.0 { vec![] } else { vec![format!("beta = {}", c.beta)] },
    ));

    ValidationReport { pass: conditions.iter().all(|c| c.pass), conditions, orientation }
}

/// Pairs of trees whose plane regions `ω_t × I_t ∪ ⋃ ω_s × I_s` intersect.
pub fn tree_overlaps(sys: &TileSystem, members: &[usize]) -> Vec<(usize, usize)> {
    let trees = sys.trees(members);
    let regions: Vec<(usize, Vec<Tile>)> = trees
        .iter()
        .map(|(&t, ss)| {
            let mut r = vec![sys.tops[t]];
            r.extend(ss.iter().map(|&s| sys.tiles[s].hull_tile()));
            (t, r)
        })
        .collect();
    let mut out = Vec::new();
    for (i, (ta, ra)) in regions.iter().enumerate() {
        for (tb, rb) in &regions[i + 1..] {
            if ra.iter().any(|a| rb.iter().any(|b| a.intersects(b))) {
                out.push((*ta, *tb));
            }
        }
    }
    out
}

/// Duplicate tri-tiles (same rectangles), reported as index pairs.
pub fn duplicate_tiles(sys: &TileSystem, members: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            if sys.tiles[a] == sys.tiles[b] {
                out.push((a, b));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub uniform: bool,
    /// `None` when no bars were supplied.
    pub separated: Option<bool>,
    pub normal: Option<bool>,
    pub witnesses: Vec<String>,
}

/// Uniformity of a family: a common spatial point for all tops, and top
/// frequencies pairwise at distance `≥ β max |ω_s|`.
pub fn is_uniform(sys: &TileSystem, members: &[usize], witnesses: &mut Vec<String>) -> bool {
    if members.is_empty() {
        return true;
    }
    let beta = sys.constants().beta;
    let tops: Vec<usize> = sys.trees(members).keys().copied().collect();
    let mut common = sys.tops[tops[0]].space;
    let mut ok = true;
    for &t in &tops[1..] {
        match common.intersection(&sys.tops[t].space) {
            Some(c) => common = c,
            None => {
                witnesses.push(format!("top {t} shares no point with earlier tops"));
                ok = false;
                break;
            }
        }
    }
    let max_hull = members.iter().map(|&s| sys.tiles[s].hull().length).fold(0.0, f64::max);
    for (i, &a) in tops.iter().enumerate() {
        for &b in &tops[i + 1..] {
            let d = sys.tops[a].freq.dist(&sys.tops[b].freq);
            if d < beta * max_hull {
                witnesses.push(format!("tops {a},{b}: dist {d} < β·max|ω_s| = {}", beta * max_hull));
                ok = false;
            }
        }
    }
    ok
}

fn dilates_disjoint(bars: &[Interval], a: f64, witnesses: &mut Vec<String>) -> bool {
    let dil: Vec<Interval> = bars.iter().map(|b| b.dilate(a)).collect();
    let mut ok = true;
    for i in 0..dil.len() {
        for j in i + 1..dil.len() {
            if dil[i].intersects(&dil[j]) {
                witnesses.push(format!("A-dilates of bars {i} and {j} intersect"));
                ok = false;
            }
        }
    }
    ok
}

/// Members of `members` whose spatial interval lies in `bar`.
pub fn members_in(sys: &TileSystem, members: &[usize], bar: &Interval) -> Vec<usize> {
    members.iter().copied().filter(|&s| sys.tiles[s].space.is_subset_of(bar)).collect()
}

pub fn is_separated(sys: &TileSystem, members: &[usize], bars: &[Interval], a: f64, witnesses: &mut Vec<String>) -> bool {
    let mut ok = dilates_disjoint(bars, a, witnesses);
    for &s in members {
        if !bars.iter().any(|b| sys.tiles[s].space.is_subset_of(b)) {
            witnesses.push(format!("tile {s} lies in no bar"));
            ok = false;
        }
    }
    for (v, bar) in bars.iter().enumerate() {
        let sv = members_in(sys, members, bar);
        let mut w = Vec::new();
        if !is_uniform(sys, &sv, &mut w) {
            witnesses.extend(w.into_iter().map(|x| format!("bar {v}: {x}")));
            ok = false;
        }
    }
    ok
}

pub fn is_normal(sys: &TileSystem, members: &[usize], bars: &[Interval], a: f64, witnesses: &mut Vec<String>) -> bool {
    let mut ok = dilates_disjoint(bars, a, witnesses);
    for &s in members {
        let top = &sys.tops[sys.tree_of[s]].space;
        let is = &sys.tiles[s].space;
        if !bars.iter().any(|b| b.is_subset_of(top) && is.is_subset_of(b)) {
            witnesses.push(format!("tile {s}: no bar between I_s and I_t"));
            ok = false;
        }
    }
    ok
}

pub fn classify_family(sys: &TileSystem, members: &[usize], bars: Option<&[Interval]>, a: f64) -> Classification {
    let mut witnesses = Vec::new();
    let uniform = is_uniform(sys, members, &mut witnesses);
    let (separated, normal) = match bars {
        Some(b) => (
            Some(is_separated(sys, members, b, a, &mut witnesses)),
            Some(is_normal(sys, members, b, a, &mut witnesses)),
        ),
        None => (None, None),
    };
    Classification { uniform, separated, normal, witnesses }
}
