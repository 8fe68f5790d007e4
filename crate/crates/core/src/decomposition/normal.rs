//! Normal families: blocks ordered by the smallest scale of each tree under a bar.

use crate::error::{LabError, Result};
use crate::grids::square_sum_sup;
use crate::intervals::Interval;
use crate::par;
use crate::tiles::{classify_family, members_in, tree_overlaps};

use super::separated::{split_bars, split_separated};
use super::stitch::stitch;
use super::{minus, psi, BoundCheck, Context, SplitReport};

/// Block index of every tile under `bar`: with `δ_1 > δ_2 > …` the distinct
/// smallest lengths of the trees meeting the bar, block `j` holds the tiles
/// with `δ_j ≤ |I_s| < δ_{j-1}` (`δ_0 = ∞`).
pub fn bar_blocks(lengths: &[f64], tree_of: &[usize], tiles: &[usize]) -> Vec<(usize, usize)> {
    let mut deltas: Vec<f64> = Vec::new();
    let mut trees: Vec<usize> = tiles.iter().map(|&s| tree_of[s]).collect();
    trees.sort_unstable();
    trees.dedup();
    for t in trees {
        let d = tiles.iter().filter(|&&s| tree_of[s] == t).map(|&s| lengths[s]).fold(f64::INFINITY, f64::min);
        deltas.push(d);
    }
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    tiles
        .iter()
        .map(|&s| {
            let j = deltas.iter().position(|&d| lengths[s] >= d).expect("every tile is at least its tree minimum");
            (s, j)
        })
        .collect()
}

pub fn split_normal(ctx: &Context, members: &[usize], bars: &[Interval]) -> Result<SplitReport> {
    const STAGE: &str = "normal";
    let sys = &ctx.fam.system;
    let p = ctx.params;
    let mut rep = SplitReport::new(STAGE);
    let class = classify_family(sys, members, Some(bars), p.a);
    if class.normal != Some(true) {
        return Err(LabError::rejected(STAGE, class.witnesses.first().cloned().unwrap_or_default()));
    }
    if let Some((a, b)) = tree_overlaps(sys, members).first() {
        return Err(LabError::rejected(STAGE, format!("trees {a} and {b} overlap")));
    }
    let n_inf = sys.counting_linf(members) as f64;
    let d = p.d_for(sys, members);
    if d < p.a + n_inf {
        return Err(LabError::rejected(STAGE, format!("D = {d} < A + ‖N‖∞ = {}", p.a + n_inf)));
    }
    let (v_sharp, v_flat) = split_bars(bars, p.mu, d, p.base_threshold);
    let overlap = square_sum_sup(&v_sharp);
    rep.check("bar_overlap", if overlap <= d.powi(3) { vec![] } else { vec![format!("Σ(M1_Ī)² reaches {overlap} > D³")] });
    let mut flat: Vec<usize> = members.iter().copied().filter(|&s| v_flat.iter().any(|b| sys.tiles[s].space.is_subset_of(b))).collect();
    let rest = minus(members, &flat);

    let lengths: Vec<f64> = sys.tiles.iter().map(|s| s.space.length).collect();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for bar in &v_sharp {
        for (s, j) in bar_blocks(&lengths, &sys.tree_of, &members_in(sys, &rest, bar)) {
            if blocks.len() <= j {
                blocks.resize(j + 1, Vec::new());
            }
            blocks[j].push(s);
        }
    }
    for (j, b) in blocks.iter_mut().enumerate() {
        b.sort_unstable();
        let c = classify_family(sys, b, Some(&v_sharp), p.a);
        if c.separated != Some(true) {
            return Err(LabError::rejected(STAGE, format!("block {j} not separated: {}", c.witnesses.first().cloned().unwrap_or_default())));
        }
    }
    let parts: Vec<Result<SplitReport>> = par::map_slice(&blocks, |b| split_separated(ctx, b, &v_sharp));
    let mut sharp_blocks = Vec::new();
    for part in parts {
        let part = part?;
        flat.extend(part.flat.iter().copied());
        sharp_blocks.push(part.sharp.clone());
        rep.children.push(part);
    }
    let bar_lists = vec![v_sharp.clone(); sharp_blocks.len()];
    rep.children.push(stitch(ctx, &sharp_blocks, &bar_lists)?);

    let sharp = minus(members, &flat);
    let form = p.a.powi(-(p.mu as i32)) * d.powi(8);
    let psi3 = psi(3, p.a * d);
    let whole_sq: Vec<f64> = ctx.tmax_and_square(members).into_iter().map(|(_, q)| q).collect();
    rep.bounds.push(BoundCheck::fit(
        "normal",
        ctx.tmax_and_square(&sharp).into_iter().zip(&whole_sq).map(|((l, _), q)| (l, form + ctx.k0 * psi3 * q)),
        &p.constants,
    ));
    rep.partition(sys, sharp, flat);
    let flat_form = d.powi(-(p.mu as i32)) * sys.counting_l1(members);
    rep.bounds.push(BoundCheck::fit("normal_flat", [(rep.flat_measure, flat_form)], &p.constants));
    rep.component("J", blocks.len() as f64);
    rep.component("V_sharp", v_sharp.len() as f64);
    rep.component("D", d);
    rep.component("K0", ctx.k0);
    Ok(rep.finish())
}
