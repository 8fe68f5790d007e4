//! Half-open real intervals, grids of near-dyadic intervals, counting
//! functions and the closed-form maximal function of an indicator.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// The half-open interval `[left, left + length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub left: f64,
    pub length: f64,
}

impl Interval {
    pub fn new(left: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() || !left.is_finite() {
            return Err(LabError::invalid(
                "length",
                format!("interval needs finite left and positive length, got [{left}, +{length})"),
            ));
        }
        Ok(Interval { left, length })
    }

    /// Interval from its endpoints `[a, b)`.
    pub fn from_bounds(a: f64, b: f64) -> Result<Self> {
        Interval::new(a, b - a)
    }

    pub fn right(&self) -> f64 {
        self.left + self.length
    }

    pub fn center(&self) -> f64 {
        self.left + 0.5 * self.length
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right()
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.left <= self.left && self.right() <= other.right()
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.left < other.right() && other.left < self.right()
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let a = self.left.max(other.left);
        let b = self.right().min(other.right());
        (a < b).then(|| Interval { left: a, length: b - a })
    }

    /// Distance from a point to the interval (zero inside and at the right endpoint).
    pub fn dist_to_point(&self, x: f64) -> f64 {
        if x < self.left {
            self.left - x
        } else if x > self.right() {
            x - self.right()
        } else {
            0.0
        }
    }

    /// Gap between two intervals; zero when they touch or overlap.
    pub fn dist(&self, other: &Interval) -> f64 {
        if self.right() <= other.left {
            other.left - self.right()
        } else if other.right() <= self.left {
            self.left - other.right()
        } else {
            0.0
        }
    }

    /// Concentric dilate: same center, `factor` times the length.
    pub fn dilate(&self, factor: f64) -> Interval {
        let length = self.length * factor;
        Interval { left: self.center() - 0.5 * length, length }
    }

    pub fn translate(&self, shift: f64) -> Interval {
        Interval { left: self.left + shift, length: self.length }
    }

    pub fn scale(&self, factor: f64) -> Interval {
        Interval { left: self.left * factor, length: self.length * factor }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        let a = self.left.min(other.left);
        let b = self.right().max(other.right());
        Interval { left: a, length: b - a }
    }

    /// The integer `k` with `2^k <= |I| <= (4/3) 2^k`, if any.
    pub fn grid_level(&self) -> Option<i32> {
        let k0 = self.length.log2().floor() as i32;
        // both neighbours are tried so that rounding in log2 cannot misclassify
        [k0 - 1, k0, k0 + 1].into_iter().find(|&k| {
            let base = (k as f64).exp2();
            base <= self.length && 3.0 * self.length <= 4.0 * base
        })
    }

    /// `floor(log2 |I|)`, the dyadic scale an interval belongs to.
    pub fn scale_level(&self) -> i32 {
        let k = self.length.log2().floor() as i32;
        if (k as f64).exp2() > self.length {
            k - 1
        } else if ((k + 1) as f64).exp2() <= self.length {
            k + 1
        } else {
            k
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.left, self.length].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [left, length] = <[f64; 2]>::deserialize(d)?;
        Interval::new(left, length).map_err(serde::de::Error::custom)
    }
}

/// Sort key used wherever a canonical input order is needed.
pub fn canonical_cmp(a: &Interval, b: &Interval) -> std::cmp::Ordering {
    a.left.total_cmp(&b.left).then(a.length.total_cmp(&b.length))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GridReport {
    pub is_grid: bool,
    /// Indices whose length lies in no band `[2^k, (4/3) 2^k]`.
    pub bad_lengths: Vec<usize>,
    /// Pairs that overlap without one containing the other.
    pub overlapping_pairs: Vec<(usize, usize)>,
}

impl GridReport {
    /// The nesting half of the grid property alone.
    pub fn nesting_ok(&self) -> bool {
        self.overlapping_pairs.is_empty()
    }
}

/// Pairs `(i, j)`, `i < j`, whose intersection is neither empty nor one of them.
pub fn partial_overlaps(items: &[Interval]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| canonical_cmp(&items[a], &items[b]));
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let a = items[i];
        for &j in &order[pos + 1..] {
            let b = items[j];
            if b.left >= a.right() {
                break;
            }
            if !(a.is_subset_of(&b) || b.is_subset_of(&a)) {
                out.push((i.min(j), i.max(j)));
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn is_grid(items: &[Interval]) -> GridReport {
    let bad_lengths: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, iv)| iv.grid_level().is_none())
        .map(|(i, _)| i)
        .collect();
    let overlapping_pairs = partial_overlaps(items);
    GridReport {
        is_grid: bad_lengths.is_empty() && overlapping_pairs.is_empty(),
        bad_lengths,
        overlapping_pairs,
    }
}

/// Endpoint events, closing events first at equal coordinates (half-open intervals).
fn events(items: &[Interval]) -> Vec<(f64, i64)> {
    let mut ev: Vec<(f64, i64)> = items
        .iter()
        .flat_map(|iv| [(iv.left, 1), (iv.right(), -1)])
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ev
}

/// Number of intervals containing `x`.
pub fn counting_function(items: &[Interval], x: f64) -> usize {
    items.iter().filter(|iv| iv.contains(x)).count()
}

/// `‖N‖₁ = Σ |I|`.
pub fn counting_l1(items: &[Interval]) -> f64 {
    items.iter().map(|iv| iv.length).sum()
}

/// `‖N‖_∞`, the maximal overlap, by endpoint sweep.
pub fn counting_linf(items: &[Interval]) -> usize {
    let mut depth = 0i64;
    let mut best = 0i64;
    for (_, d) in events(items) {
        depth += d;
        best = best.max(depth);
    }
    best as usize
}

/// `∫ N(x) dx` by sweeping the piecewise constant counting function.
pub fn counting_integral(items: &[Interval]) -> f64 {
    let ev = events(items);
    let mut depth = 0i64;
    let mut total = 0.0;
    for w in ev.windows(2) {
        depth += w[0].1;
        total += depth as f64 * (w[1].0 - w[0].0);
    }
    total
}

/// Uncentered Hardy–Littlewood maximal function of `1_I` at `x`.
pub fn hl_maximal_indicator(iv: &Interval, x: f64) -> f64 {
    if iv.contains(x) {
        1.0
    } else {
        iv.length / (iv.length + iv.dist_to_point(x))
    }
}

/// `Σ_I (M 1_I)^2 (x)`.
pub fn sum_maximal_squares(items: &[Interval], x: f64) -> f64 {
    items
        .iter()
        .map(|iv| {
            let m = hl_maximal_indicator(iv, x);
            m * m
        })
        .sum()
}

/// Finite union of intervals stored as sorted, pairwise disjoint, non-touching pieces.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntervalUnion {
    pieces: Vec<Interval>,
}

impl IntervalUnion {
    pub fn new(items: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: Vec<Interval> = items.into_iter().collect();
        v.sort_by(canonical_cmp);
        let mut pieces: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            match pieces.last_mut() {
                Some(last) if iv.left <= last.right() => {
                    let r = last.right().max(iv.right());
                    last.length = r - last.left;
                }
                _ => pieces.push(iv),
            }
        }
        IntervalUnion { pieces }
    }

    pub fn empty() -> Self {
        IntervalUnion { pieces: Vec::new() }
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        IntervalUnion::new(self.pieces.iter().chain(other.pieces.iter()).copied())
    }

    pub fn contains_point(&self, x: f64) -> bool {
        let idx = self.pieces.partition_point(|p| p.left <= x);
        idx > 0 && self.pieces[idx - 1].contains(x)
    }

    /// `iv ⊆ self`; pieces never touch, so containment means one piece holds `iv`.
    pub fn contains_interval(&self, iv: &Interval) -> bool {
        let idx = self.pieces.partition_point(|p| p.left <= iv.left);
        idx > 0 && iv.is_subset_of(&self.pieces[idx - 1])
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// `|⋃ I|` by endpoint sweep.
pub fn union_measure(items: &[Interval]) -> f64 {
    IntervalUnion::new(items.iter().copied()).measure()
}
