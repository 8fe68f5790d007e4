//! Constructive grid lemmas: enlarging intervals into a bounded number of
//! grids, and splitting a grid into a sharp part with bounded overlap of
//! maximal functions and a flat part of small measure.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::intervals::{
    canonical_cmp, counting_l1, counting_linf, hl_maximal_indicator, is_grid, partial_overlaps, Interval,
    IntervalUnion,
};
use crate::par;

const LOG2_FOUR_THIRDS: f64 = 0.415_037_499_278_843_8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnlargementResult {
    /// `(I, I_A)` in canonical order of the input.
    pub pairs: Vec<(Interval, Interval)>,
    /// Indices into `pairs`, one list per grid.
    pub classes: Vec<Vec<usize>>,
    pub class_count: usize,
    /// Number of special-case subcollections used by the construction.
    pub subcollections: usize,
    /// Whether every member of a class also has a near-dyadic length.
    pub length_band_ok: Vec<bool>,
}

/// Index pair violating the hypothesis: comparable lengths (ratio in `[3/4, 1]`)
/// that intersect without being equal.
pub fn enlargement_hypothesis_violation(items: &[Interval]) -> Option<(usize, usize)> {
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let (a, b) = (&items[i], &items[j]);
            if a == b {
                continue;
            }
            let (lo, hi) = if a.length <= b.length { (a, b) } else { (b, a) };
            if 4.0 * lo.length >= 3.0 * hi.length && a.intersects(b) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Splits `items` into subcollections in which equal-band intervals are
/// `8A`-separated and smaller intervals are at most `2^{-A-3}` as long.
fn special_subcollections(items: &[Interval], a: f64) -> Vec<Vec<usize>> {
    let residues = (2.41 * (a + 3.0)).ceil() as i64 + 1;
    let level = |iv: &Interval| (iv.length.log2() / LOG2_FOUR_THIRDS).floor() as i64;
    let mut by_level: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for (i, iv) in items.iter().enumerate() {
        by_level.entry(level(iv)).or_default().push(i);
    }
    // (residue, colour) -> members
    let mut groups: std::collections::BTreeMap<(i64, usize), Vec<usize>> = Default::default();
    for (lvl, mut members) in by_level {
        members.sort_by(|&x, &y| canonical_cmp(&items[x], &items[y]));
        let mut colours: Vec<Vec<usize>> = Vec::new();
        for m in members {
            let fits = |c: &Vec<usize>| {
                c.iter().all(|&o| {
                    let sep = 8.0 * a * items[o].length.max(items[m].length);
                    items[o].dist(&items[m]) >= sep
                })
            };
            match colours.iter().position(fits) {
                Some(c) => colours[c].push(m),
                None => colours.push(vec![m]),
            }
        }
        for (c, ms) in colours.into_iter().enumerate() {
            groups.entry((lvl.rem_euclid(residues), c)).or_default().extend(ms);
        }
    }
    groups.into_values().collect()
}

/// Builds `I_A` for one special-case subcollection: the union of `A I'` over the
/// component of `I` among members no longer than `I`, edges `AI ∩ AI' ≠ ∅`.
fn enlarge_special(items: &[Interval], members: &[usize], a: f64) -> Vec<(usize, Interval)> {
    let dil: Vec<Interval> = members.iter().map(|&m| items[m].dilate(a)).collect();
    let k = members.len();
    let adj: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i && dil[i].intersects(&dil[j])).collect())
        .collect();
    par::map_range(k, |i| {
        let cap = items[members[i]].length;
        let mut seen = vec![false; k];
        let mut stack = vec![i];
        seen[i] = true;
        let mut hull = dil[i];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] && items[members[v]].length <= cap {
                    seen[v] = true;
                    hull = hull.hull(&dil[v]);
                    stack.push(v);
                }
            }
        }
        (members[i], hull)
    })
}

/// Enlarges every interval by a factor `A` (up to `1 + 2^{-A}`) so that the
/// enlargements split into few grids.
pub fn enlarge_to_grids(input: &[Interval], a: f64) -> Result<EnlargementResult> {
    if !(a >= 2.0) {
        return Err(LabError::invalid("A", "must be at least 2"));
    }
    let mut items = input.to_vec();
    items.sort_by(canonical_cmp);
    if let Some((i, j)) = enlargement_hypothesis_violation(&items) {
        return Err(LabError::HypothesisViolation(i, j));
    }
    let mut distinct = items.clone();
    distinct.dedup();
    let subs = special_subcollections(&distinct, a);
    let mut enlarged = vec![distinct[0]; distinct.len()];
    for sub in &subs {
        for (m, ia) in enlarge_special(&distinct, sub, a) {
            enlarged[m] = ia;
        }
    }
    let pairs: Vec<(Interval, Interval)> = items
        .iter()
        .map(|iv| {
            let d = distinct.binary_search_by(|p| canonical_cmp(p, iv)).expect("present");
            (*iv, enlarged[d])
        })
        .collect();

    // first-fit merge of the enlargements into grids, longest first
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&x, &y| {
        pairs[y].1.length.total_cmp(&pairs[x].1.length).then(canonical_cmp(&pairs[x].1, &pairs[y].1))
    });
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let ia = pairs[i].1;
        let compatible = |c: &Vec<usize>| {
            c.iter().all(|&o| {
                let ob = pairs[o].1;
                !ia.intersects(&ob) || ia.is_subset_of(&ob) || ob.is_subset_of(&ia)
            })
        };
        match classes.iter().position(compatible) {
            Some(c) => classes[c].push(i),
            None => classes.push(vec![i]),
        }
    }
    for c in &mut classes {
        c.sort_unstable();
    }
    let length_band_ok = classes
        .iter()
        .map(|c| c.iter().all(|&i| pairs[i].1.grid_level().is_some()))
        .collect();
    Ok(EnlargementResult {
        class_count: classes.len(),
        pairs,
        classes,
        subcollections: subs.len(),
        length_band_ok,
    })
}

impl EnlargementResult {
    /// `A·I ⊆ I_A ⊆ (1 + 2^{-A})·A·I` for every pair.
    pub fn containment_ok(&self, a: f64) -> bool {
        let outer = (1.0 + (-a).exp2()) * a;
        self.pairs.iter().all(|(iv, ia)| iv.dilate(a).is_subset_of(ia) && ia.is_subset_of(&iv.dilate(outer)))
    }

    pub fn classes_nest(&self) -> bool {
        self.classes.iter().all(|c| {
            let members: Vec<Interval> = c.iter().map(|&i| self.pairs[i].1).collect();
            partial_overlaps(&members).is_empty()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationResult {
    pub sharp: Vec<Interval>,
    pub flat: Vec<Interval>,
    pub e1: IntervalUnion,
    pub e2: IntervalUnion,
    pub flat_measure: f64,
    /// Number of subgrids satisfying the scale-gap condition.
    pub subgrids: usize,
    /// Level-set thresholds actually used, one per subgrid.
    pub thresholds: Vec<f64>,
}

/// Number of residue classes of dyadic levels needed so that strictly nested
/// intervals in a class differ in length by at least `D^{2n}`.
pub fn thinning_period(n: u32, d: f64) -> usize {
    (2.0 * n as f64 * d.log2() + LOG2_FOUR_THIRDS).ceil().max(1.0) as usize
}

/// Partition of a grid into subgrids where `I ⊊ I'` forces `|I| ≤ D^{-2n}|I'|`.
pub fn thin_grid(items: &[Interval], n: u32, d: f64) -> Vec<Vec<usize>> {
    let period = thinning_period(n, d) as i32;
    let levels: Vec<i32> = items.iter().map(|iv| iv.grid_level().unwrap_or_else(|| iv.scale_level())).collect();
    let mut keyed: std::collections::BTreeMap<(i32, usize), Vec<usize>> = Default::default();
    for (i, iv) in items.iter().enumerate() {
        let depth = items
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && levels[j] == levels[i] && iv.is_subset_of(o) && iv != o)
            .count();
        keyed.entry((levels[i].rem_euclid(period), depth)).or_default().push(i);
    }
    keyed.into_values().collect()
}

/// `Σ_I (M 1_I)^2` as a closure-friendly helper over a slice.
fn square_sum(items: &[Interval], x: f64) -> f64 {
    items
        .iter()
        .map(|iv| {
            let m = hl_maximal_indicator(iv, x);
            m * m
        })
        .sum()
}

/// Boundary set `E_1` of one subgrid.
pub fn boundary_set(items: &[Interval], n: u32, d: f64) -> IntervalUnion {
    let scale = d.powi(-(n as i32));
    let mut hits = Vec::new();
    for iv in items {
        let delta = scale * iv.length;
        for end in [iv.left, iv.right()] {
            for o in items {
                if o.left >= end - delta && o.right() <= end + delta {
                    hits.push(*o);
                }
            }
        }
    }
    IntervalUnion::new(hits)
}

/// `{x : Σ_I (M 1_I)^2(x) > tau}`. The sum is continuous and convex between
/// consecutive endpoints, so each segment contributes at most two pieces.
pub fn superlevel_set(items: &[Interval], tau: f64) -> IntervalUnion {
    if items.is_empty() {
        return IntervalUnion::empty();
    }
    let mut pts: Vec<f64> = items.iter().flat_map(|iv| [iv.left, iv.right()]).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let s = |x: f64| square_sum(items, x);
    let span = pts[pts.len() - 1] - pts[0];
    let reach = items.iter().map(|iv| iv.length).fold(0.0, f64::max) * (items.len() as f64).sqrt() / tau.sqrt().max(1e-12)
        + span;
    let mut segments: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    segments.push((pts[0] - reach, pts[0]));
    segments.push((pts[pts.len() - 1], pts[pts.len() - 1] + reach));

    let mut pieces = Vec::new();
    for (p, q) in segments {
        let (sp, sq) = (s(p), s(q));
        if sp <= tau && sq <= tau {
            continue;
        }
        // minimiser of a convex function on [p, q]
        let (mut lo, mut hi) = (p, q);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if s(m1) <= s(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
            if hi - lo <= f64::EPSILON * (hi.abs() + lo.abs()) {
                break;
            }
        }
        let xm = 0.5 * (lo + hi);
        if s(xm) > tau {
            pieces.push((p, q));
            continue;
        }
        let crossing = |mut inside: f64, mut outside: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if mid == inside || mid == outside {
                    break;
                }
                if s(mid) > tau {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        if sp > tau {
            pieces.push((p, crossing(p, xm)));
        }
        if sq > tau {
            pieces.push((crossing(q, xm), q));
        }
    }
    IntervalUnion::new(pieces.into_iter().filter(|(a, b)| b > a).map(|(a, b)| Interval { left: a, length: b - a }))
}

/// Boundary and level-set split of a single collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionSplit {
    /// Whether each member lies in `E_1 ∪ E_2`.
    pub flat: Vec<bool>,
    pub e1: IntervalUnion,
    pub e2: IntervalUnion,
    pub threshold: f64,
}

/// Flags the members inside `E_1 ∪ E_2`, with no grid or thinning step. The
/// level-set threshold starts at `base_threshold · D²` and is raised until
/// `|E_2| ≤ D^{-n} ‖N‖₁`.
pub fn split_collection(members: &[Interval], n: u32, d: f64, base_threshold: f64) -> CollectionSplit {
    let e1 = boundary_set(members, n, d);
    let budget = d.powi(-(n as i32)) * counting_l1(members);
    let mut tau = base_threshold * d * d;
    let mut e2 = superlevel_set(members, tau);
    if e2.measure() > budget {
        let mut hi = members.len() as f64 + 1.0;
        let mut lo = tau;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if superlevel_set(members, mid).measure() > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        tau = hi;
        e2 = superlevel_set(members, tau);
    }
    let both = e1.union(&e2);
    let flat = members.iter().map(|iv| both.contains_interval(iv)).collect();
    CollectionSplit { flat, e1, e2, threshold: tau }
}

/// `sup_x Σ_I (M 1_I)^2(x)`. The sum is convex between endpoints and decays
/// outside their hull, so the sup is attained at an endpoint.
pub fn square_sum_sup(items: &[Interval]) -> f64 {
    let pts: Vec<f64> = items.iter().flat_map(|iv| [iv.left, iv.right()]).collect();
    par::map_slice(&pts, |&x| square_sum(items, x)).into_iter().fold(0.0, f64::max)
}

/// Splits a grid into sharp and flat parts; `base_threshold` is the constant
/// in front of `D^2` for the level set (raised per subgrid if needed to keep
/// the level set within `D^{-n}‖N‖₁`).
pub fn separate_grid(input: &[Interval], n: u32, d: f64, base_threshold: f64) -> Result<SeparationResult> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    let mut items = input.to_vec();
    items.sort_by(canonical_cmp);
    let report = is_grid(&items);
    if !report.is_grid {
        return Err(LabError::Precondition(format!(
            "not a grid: {} bad lengths, {} partial overlaps",
            report.bad_lengths.len(),
            report.overlapping_pairs.len()
        )));
    }
    let sup = counting_linf(&items) as f64;
    if !(d > sup) {
        return Err(LabError::Precondition(format!("D = {d} must exceed ‖N‖∞ = {sup}")));
    }
    let subgrids = thin_grid(&items, n, d);
    let results = par::map_slice(&subgrids, |sub| {
        let members: Vec<Interval> = sub.iter().map(|&i| items[i]).collect();
        let split = split_collection(&members, n, d, base_threshold);
        (sub.clone(), split.flat, split.e1, split.e2, split.threshold)
    });
    let mut is_flat = vec![false; items.len()];
    let mut e1 = IntervalUnion::empty();
    let mut e2 = IntervalUnion::empty();
    let mut thresholds = Vec::new();
    for (sub, flat, a, b, tau) in results {
        for (k, &i) in sub.iter().enumerate() {
            is_flat[i] = flat[k];
        }
        e1 = e1.union(&a);
        e2 = e2.union(&b);
        thresholds.push(tau);
    }
    let (mut sharp, mut flat) = (Vec::new(), Vec::new());
    for (iv, f) in items.iter().zip(&is_flat) {
        if *f {
            flat.push(*iv);
        } else {
            sharp.push(*iv);
        }
    }
    let flat_measure = IntervalUnion::new(flat.iter().copied()).measure();
    Ok(SeparationResult { sharp, flat, e1, e2, flat_measure, subgrids: subgrids.len(), thresholds })
}

impl SeparationResult {
    /// `5 D^{-n} ‖N‖₁`.
    pub fn flat_bound(&self, n: u32, d: f64) -> f64 {
        let all: Vec<Interval> = self.sharp.iter().chain(&self.flat).copied().collect();
        5.0 * d.powi(-(n as i32)) * counting_l1(&all)
    }

    /// Largest `Σ_{sharp} (M 1_I)^2` over all endpoints and the extra points.
    pub fn sharp_square_sup(&self, extra: &[f64]) -> f64 {
        let pts: Vec<f64> = self.sharp.iter().flat_map(|iv| [iv.left, iv.right()]).chain(extra.iter().copied()).collect();
        par::map_slice(&pts, |&x| square_sum(&self.sharp, x)).into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, l: f64) -> Interval {
        Interval::new(a, l).unwrap()
    }

    #[test]
    fn far_apart_pair_is_one_grid() {
        let r = enlarge_to_grids(&[iv(0.0, 1.0), iv(100.0, 1.0)], 2.0).unwrap();
        assert_eq!(r.class_count, 1);
        assert_eq!(r.pairs[0].1, iv(-0.5, 2.0));
        assert_eq!(r.pairs[1].1, iv(99.5, 2.0));
        assert!(r.containment_ok(2.0));
    }

    #[test]
    fn singleton() {
        let r = enlarge_to_grids(&[iv(3.0, 1.0)], 4.0).unwrap();
        assert_eq!(r.class_count, 1);
        assert_eq!(r.pairs[0].1, iv(3.0, 1.0).dilate(4.0));
    }

    #[test]
    fn small_nested_interval_is_absorbed() {
        let a = 2.0;
        let small = (-a - 3.0f64).exp2();
        let big = iv(0.0, 1.0);
        let tiny = iv(0.5, small);
        let r = enlarge_to_grids(&[big, tiny], a).unwrap();
        let big_a = r.pairs.iter().find(|p| p.0 == big).unwrap().1;
        let tiny_a = r.pairs.iter().find(|p| p.0 == tiny).unwrap().1;
        assert!(tiny_a.is_subset_of(&big_a));
        assert!(r.containment_ok(a));
        assert!(r.classes_nest());
    }

    #[test]
    fn hypothesis_violation_reported() {
        let e = enlarge_to_grids(&[iv(0.0, 1.0), iv(0.5, 0.9)], 2.0).unwrap_err();
        assert!(matches!(e, LabError::HypothesisViolation(0, 1)));
    }

    #[test]
    fn thinning_period_for_ten() {
        assert_eq!(thinning_period(2, 10.0), 14);
    }

    #[test]
    fn separate_single_interval() {
        let r = separate_grid(&[iv(0.0, 1.0)], 2, 10.0, 1.0).unwrap();
        assert!(r.flat.is_empty());
        assert_eq!(r.sharp, vec![iv(0.0, 1.0)]);
    }

    #[test]
    fn separate_deep_nest() {
        let c: Vec<Interval> = (0..9).map(|j| iv(0.0, 4f64.powi(-j))).collect();
        let r = separate_grid(&c, 2, 10.0, 1.0).unwrap();
        let mut flat = r.flat.clone();
        flat.sort_by(canonical_cmp);
        assert_eq!(flat, vec![iv(0.0, 4f64.powi(-8)), iv(0.0, 4f64.powi(-7))]);
        assert!(r.flat_measure <= r.flat_bound(2, 10.0));
        assert_eq!(r.flat_measure, 4f64.powi(-7));
    }

    #[test]
    fn separate_rejects_small_d() {
        let c: Vec<Interval> = (0..9).map(|j| iv(0.0, 4f64.powi(-j))).collect();
        assert!(matches!(separate_grid(&c, 2, 4.0, 1.0), Err(LabError::Precondition(_))));
    }

    #[test]
    fn superlevel_matches_brute_force() {
        let c = [iv(0.0, 1.0), iv(0.25, 0.25), iv(3.0, 0.5), iv(3.0, 0.125)];
        let tau = 1.3;
        let set = superlevel_set(&c, tau);
        let h = 1e-4;
        let brute: f64 = (0..200_000)
            .map(|k| -8.0 + (k as f64 + 0.5) * h)
            .filter(|&x| square_sum(&c, x) > tau)
            .count() as f64
            * h;
        assert!((set.measure() - brute).abs() < 1e-3, "{} vs {}", set.measure(), brute);
    }
}
