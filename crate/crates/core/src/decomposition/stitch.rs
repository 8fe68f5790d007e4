//! Stitching blocks with nested bars and ordered scales into one maximal bound.

use crate::error::{LabError, Result};
use crate::grids::square_sum_sup;
use crate::intervals::Interval;

use super::{blocked_identity, BlockPick, BoundCheck, Context, SplitReport};

/// Bar of `s` in `bars`, the first containing `I_s`.
fn bar_of(space: &Interval, bars: &[Interval]) -> Option<usize> {
    bars.iter().position(|b| space.is_subset_of(b))
}

/// Combines blocks `S_1, …, S_J` with bar families `Ī_{j,v}`.
///
/// Rejects unless the bars of each block are disjoint, every tile lies in a bar
/// of its block, later bars nest in earlier ones and earlier blocks carry the
/// longer tiles inside each earlier bar. Whether `A·I_s` fits its bar is
/// reported as a flag. The blocked truncation identity is checked at every
/// sample with `g_s = ⟨f,φ_{s,1}⟩φ_{s,1} 1_{bar(s)}`.
pub fn stitch(ctx: &Context, blocks: &[Vec<usize>], bars: &[Vec<Interval>]) -> Result<SplitReport> {
    const STAGE: &str = "stitch";
    let sys = &ctx.fam.system;
    let p = ctx.params;
    if blocks.len() != bars.len() {
        return Err(LabError::invalid("bars", "one bar family per block required"));
    }
    let mut rep = SplitReport::new(STAGE);
    let members: Vec<usize> = blocks.iter().flatten().copied().collect();
    let mut block = vec![usize::MAX; sys.len()];
    for (j, b) in blocks.iter().enumerate() {
        for &s in b {
            if block[s] != usize::MAX {
                return Err(LabError::rejected(STAGE, format!("tile {s} in blocks {} and {j}", block[s])));
            }
            block[s] = j;
        }
    }
    for (j, bj) in bars.iter().enumerate() {
        for (v, a) in bj.iter().enumerate() {
            if let Some(w) = bj[v + 1..].iter().position(|b| a.intersects(b)) {
                return Err(LabError::rejected(STAGE, format!("bars_disjoint: block {j}: bars {v} and {} meet", v + 1 + w)));
            }
        }
    }
    let mut bar_interval = vec![None; sys.len()];
    let mut loose = Vec::new();
    for (j, b) in blocks.iter().enumerate() {
        for &s in b {
            let sp = sys.tiles[s].space;
            match bar_of(&sp, &bars[j]) {
                Some(v) => {
                    bar_interval[s] = Some(bars[j][v]);
                    if !sp.dilate(p.a).is_subset_of(&bars[j][v]) {
                        loose.push(s);
                    }
                }
                None => return Err(LabError::rejected(STAGE, format!("tile {s} of block {j} lies in no bar"))),
            }
        }
    }
    if !loose.is_empty() {
        rep.flags.push(format!("bar_containment: A·I_s exceeds its bar for {} tiles, first {}", loose.len(), loose[0]));
    }
    for j in 0..bars.len() {
        for jj in j + 1..bars.len() {
            if let Some(b) = bars[jj].iter().find(|b| !bars[j].iter().any(|a| b.is_subset_of(a))) {
                return Err(LabError::rejected(STAGE, format!("bar_nesting: bar {b:?} of block {jj} not inside a bar of block {j}")));
            }
        }
    }
    for j in 0..blocks.len() {
        for bar in &bars[j] {
            let inside = |b: &Vec<usize>| b.iter().copied().filter(|&s| sys.tiles[s].space.is_subset_of(bar)).collect::<Vec<_>>();
            let Some(shortest) = inside(&blocks[j]).into_iter().map(|s| sys.tiles[s].space.length).reduce(f64::min) else {
                continue;
            };
            for jj in j + 1..blocks.len() {
                if let Some(s) = inside(&blocks[jj]).into_iter().find(|&s| sys.tiles[s].space.length > shortest) {
                    return Err(LabError::rejected(
                        STAGE,
                        format!("scale_order: tile {s} of block {jj} longer than block {j} tiles in {bar:?}"),
                    ));
                }
            }
        }
    }

    let lengths: Vec<f64> = sys.tiles.iter().map(|s| s.space.length).collect();
    rep.identities.push(blocked_identity(
        "blocked_truncation",
        ctx.fam.grid,
        &members,
        &lengths,
        &block,
        |s, x| bar_interval[s].is_some_and(|b| b.contains(x)),
        BlockPick::OfSmallest,
    ));

    let j_count = blocks.len().max(1) as f64;
    let all_bars: Vec<Interval> = bars.iter().flatten().copied().collect();
    let bar_squares = square_sum_sup(&all_bars);
    let n_inf = sys.counting_linf(&members) as f64;
    let error = p.a.powi(-(p.mu as i32)) * n_inf * bar_squares;
    let per_block: Vec<Vec<(f64, f64)>> = blocks.iter().map(|b| ctx.tmax_and_square(b)).collect();
    let whole = ctx.tmax_and_square(&members);
    let mut b_max = 0.0f64;
    let samples: Vec<(f64, f64)> = whole
        .iter()
        .enumerate()
        .map(|(i, &(lhs, sq))| {
            let b = per_block.iter().map(|rows| rows[i].0).fold(0.0, f64::max);
            b_max = b_max.max(b);
            (lhs, b * j_count.sqrt() + error + ctx.k0 * j_count.ln() * sq)
        })
        .collect();
    rep.bounds.push(BoundCheck::fit("stitch", samples, &p.constants));
    rep.component("J", j_count);
    rep.component("B", b_max);
    rep.component("E", 0.0);
    rep.component("K0", ctx.k0);
    rep.component("bar_square_sup", bar_squares);
    rep.component("N_inf", n_inf);
    rep.partition(sys, members, Vec::new());
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::super::synth::{lacunary_tree, test_context};
    use super::*;
    use crate::tiles::TileSystem;

    fn iv(a: f64, l: f64) -> Interval {
        Interval::new(a, l).unwrap()
    }

    fn two_level() -> TileSystem {
        let (tiles, top) = lacunary_tree(iv(0.0, 8.0), 0.0, &[3, 0], |_, _| true);
        let n = tiles.len();
        TileSystem::new(tiles, vec![top], vec![0; n], Default::default(), 2.0).unwrap()
    }

    #[test]
    fn single_block() {
        test_context(two_level(), 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = stitch(ctx, &[all], &[vec![iv(-8.0, 24.0)]]).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            assert_eq!(r.components["J"], 1.0);
            assert!(r.identities[0].evaluations > 0);
        });
    }

    #[test]
    fn two_blocks_ordered_scales() {
        test_context(two_level(), 2.0, |ctx| {
            let sys = &ctx.fam.system;
            let (big, small): (Vec<usize>, Vec<usize>) = sys.all().into_iter().partition(|&s| sys.tiles[s].space.length == 8.0);
            let bars0 = vec![iv(-8.0, 24.0)];
            let bars1: Vec<Interval> = vec![iv(0.0, 8.0)];
            let r = stitch(ctx, &[big.clone(), small.clone()], &[bars0.clone(), bars1.clone()]).unwrap();
            assert_eq!(r.identities[0].failures, 0);
            assert!(r.pass);
            // reversed order violates the scale order
            let e = stitch(ctx, &[small, big], &[bars0, vec![iv(-8.0, 24.0)]]);
            assert!(matches!(e, Err(LabError::StageRejected { .. })));
        });
    }

    #[test]
    fn unnested_bars_rejected() {
        test_context(two_level(), 2.0, |ctx| {
            let sys = &ctx.fam.system;
            let (big, small): (Vec<usize>, Vec<usize>) = sys.all().into_iter().partition(|&s| sys.tiles[s].space.length == 8.0);
            let e = stitch(ctx, &[big, small], &[vec![iv(0.0, 8.0)], vec![iv(-1.0, 16.0)]]).unwrap_err();
            assert!(e.to_string().contains("bar_nesting"), "{e}");
        });
    }
}
