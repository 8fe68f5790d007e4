//! Families whose trees overlap at most `A₀` times, peeled by maximal enlargements.

use crate::error::{LabError, Result};
use crate::grids::{enlarge_to_grids, square_sum_sup};
use crate::intervals::{canonical_cmp, counting_linf, Interval};

use super::stitch::stitch;
use super::{distinct, psi, BoundCheck, Context, SplitReport};

/// Peels `members` into layers of maximal enlarged intervals and stitches the
/// layers. Rejects when a tree covers some point more than `a0` times.
pub fn split_shallow(ctx: &Context, members: &[usize], a0: usize) -> Result<SplitReport> {
    const STAGE: &str = "shallow";
    let sys = &ctx.fam.system;
    let p = ctx.params;
    let mut rep = SplitReport::new(STAGE);
    for (t, ss) in sys.trees(members) {
        let c = counting_linf(&sys.spaces(&ss));
        if c > a0 {
            return Err(LabError::rejected(STAGE, format!("tree_depth: tree {t} covers a point {c} > A0 = {a0} times")));
        }
    }
    rep.component("A0", a0 as f64);
    if members.is_empty() {
        rep.partition(sys, Vec::new(), Vec::new());
        return Ok(rep.finish());
    }

    let spaces = distinct(sys.spaces(members));
    let en = enlarge_to_grids(&spaces, p.a).map_err(|e| LabError::rejected(STAGE, e.to_string()))?;
    let slot = |iv: &Interval| en.pairs.binary_search_by(|(a, _)| canonical_cmp(a, iv)).expect("enlarged");
    let top_dilates: Vec<Interval> = sys.top_intervals(members).iter().map(|t| t.dilate(2.0 * p.a)).collect();
    let j_budget = a0 * counting_linf(&top_dilates);

    let mut j_max = 0usize;
    let mut stage_rows = Vec::new();
    let mut support_witnesses = Vec::new();
    let mut j_witnesses = Vec::new();
    for (c, class) in en.classes.iter().enumerate() {
        let in_class: Vec<usize> = members.iter().copied().filter(|&s| class.contains(&slot(&sys.tiles[s].space))).collect();
        let mut left: Vec<Interval> = distinct(class.iter().map(|&i| en.pairs[i].1));
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut bars: Vec<Vec<Interval>> = Vec::new();
        while !left.is_empty() {
            let maximal: Vec<Interval> =
                left.iter().copied().filter(|a| !left.iter().any(|b| b != a && a.is_subset_of(b))).collect();
            left.retain(|a| !maximal.contains(a));
            let block: Vec<usize> = in_class.iter().copied().filter(|&s| maximal.contains(&en.pairs[slot(&sys.tiles[s].space)].1)).collect();
            for (i, &s) in block.iter().enumerate() {
                let (is, ia) = en.pairs[slot(&sys.tiles[s].space)];
                for &s2 in &block[i + 1..] {
                    let (is2, ia2) = en.pairs[slot(&sys.tiles[s2].space)];
                    if ia.intersects(&ia2) && is != is2 {
                        support_witnesses.push(format!("class {c} layer {}: tiles {s} and {s2}", blocks.len()));
                    }
                }
            }
            blocks.push(block);
            bars.push(maximal);
        }
        if blocks.len() > j_budget {
            j_witnesses.push(format!("class {c}: J = {} > {j_budget}", blocks.len()));
        }
        j_max = j_max.max(blocks.len());
        for b in &blocks {
            let sq = square_sum_sup(&sys.spaces(b));
            let err = p.a.powi(-(p.mu as i32)) * sq;
            stage_rows.extend(ctx.tmax_and_square(b).into_iter().map(|(l, q)| (l, err + ctx.k0 * q)));
        }
        rep.children.push(stitch(ctx, &blocks, &bars)?);
    }
    rep.check("same_support", support_witnesses);
    rep.check("J", j_witnesses);

    let classes = en.class_count as f64;
    let sq = square_sum_sup(&sys.spaces(members));
    let error = p.a.powi(-(p.mu as i32)) * (a0 * a0) as f64 * sq * sq;
    let log_factor = psi(1, (j_budget.max(1)) as f64);
    rep.bounds.push(BoundCheck::fit(
        "shallow",
        ctx.tmax_and_square(members).into_iter().map(|(l, q)| (l, classes * (error + ctx.k0 * log_factor * q))),
        &p.constants,
    ));
    rep.bounds.push(BoundCheck::fit("shallow_stage", stage_rows, &p.constants));
    rep.component("J", j_max as f64);
    rep.component("classes", classes);
    rep.component("K0", ctx.k0);
    rep.component("square_sup", sq);
    rep.partition(sys, members.to_vec(), Vec::new());
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::super::synth::{lacunary_tree, system_of, test_context};
    use super::*;

    fn iv(a: f64, l: f64) -> Interval {
        Interval::new(a, l).unwrap()
    }

    #[test]
    fn single_tile() {
        let sys = system_of(vec![lacunary_tree(iv(0.0, 8.0), 0.0, &[3], |_, _| true)]);
        test_context(sys, 2.0, |ctx| {
            let r = split_shallow(ctx, &[0], 1).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            assert_eq!(r.components["J"], 1.0);
        });
    }

    #[test]
    fn disjoint_equal_scales_are_one_layer() {
        let sys = system_of(vec![
            lacunary_tree(iv(-16.0, 8.0), 0.0, &[3], |_, _| true),
            lacunary_tree(iv(0.0, 8.0), 0.0, &[3], |_, _| true),
            lacunary_tree(iv(16.0, 8.0), 0.0, &[3], |_, _| true),
        ]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = split_shallow(ctx, &all, 1).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            assert_eq!(r.components["J"], 1.0);
            // equal scales make the truncation all or nothing
            for pr in ctx.probes {
                let lin = ctx.fam.linear(&all, pr);
                let max = ctx.fam.tmax(&all, pr);
                for (a, b) in lin.values.iter().zip(&max) {
                    assert!((a.norm() - b).abs() <= 1e-12 * (1.0 + b));
                }
            }
        });
    }

    #[test]
    fn two_nested_scales_peel_twice() {
        let sys = system_of(vec![lacunary_tree(iv(0.0, 8.0), 0.0, &[3, 0], |_, _| true)]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = split_shallow(ctx, &all, 2).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            assert_eq!(r.components["J"], 2.0);
            assert!(matches!(split_shallow(ctx, &all, 1), Err(LabError::StageRejected { .. })));
        });
    }
}
