//! Separated families: uniform pieces under bars with disjoint `A`-dilates.

use crate::error::{LabError, Result};
use crate::grids::{split_collection, square_sum_sup};
use crate::intervals::{hl_maximal_indicator, Interval};
use crate::par;
use crate::tiles::{classify_family, members_in};

use super::uniform::split_uniform;
use super::{dyadic_maximal, minus, psi, BoundCheck, Context, SplitReport};

/// Bars split into `(V♯, V♭)` with the level-set threshold actually used.
pub(crate) fn split_bars(bars: &[Interval], mu: u32, d: f64, base_threshold: f64) -> (Vec<Interval>, Vec<Interval>) {
    if bars.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let cs = split_collection(bars, mu, d, base_threshold);
    let (mut sharp, mut flat) = (Vec::new(), Vec::new());
    for (b, f) in bars.iter().zip(cs.flat) {
        if f {
            flat.push(*b);
        } else {
            sharp.push(*b);
        }
    }
    (sharp, flat)
}

pub fn split_separated(ctx: &Context, members: &[usize], bars: &[Interval]) -> Result<SplitReport> {
    const STAGE: &str = "separated";
    let sys = &ctx.fam.system;
    let p = ctx.params;
    let mut rep = SplitReport::new(STAGE);
    let class = classify_family(sys, members, Some(bars), p.a);
    if class.separated != Some(true) {
        return Err(LabError::rejected(STAGE, class.witnesses.first().cloned().unwrap_or_default()));
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

    let children: Vec<Result<SplitReport>> = par::map_slice(&v_sharp, |bar| split_uniform(ctx, &members_in(sys, members, bar)));
    for c in children {
        let c = c?;
        flat.extend(c.flat.iter().copied());
        rep.children.push(c);
    }
    let sharp = minus(members, &flat);

    // off-support tail of each bar's sharp tiles against A^{-μ}‖N‖∞ (M1_Ī)² Mf, in L² outside AĪ
    let grid = ctx.fam.grid;
    let decay = p.a.powi(-(p.mu as i32)) * n_inf;
    let mut tail = Vec::new();
    for pr in ctx.probes {
        let abs_f: Vec<f64> = pr.f.values.iter().map(|z| z.norm()).collect();
        let mf = dyadic_maximal(&abs_f);
        for (bar, child) in v_sharp.iter().zip(&rep.children) {
            if child.sharp.is_empty() {
                continue;
            }
            let outer = bar.dilate(p.a);
            let rows = par::map_range(grid.n, |k| {
                let x = grid.x(k);
                if outer.contains(x) {
                    return (0.0, 0.0);
                }
                let sum: f64 = child.sharp.iter().map(|&s| pr.inner[s].norm() * ctx.fam.packets[s].values[k].norm()).sum();
                let m = hl_maximal_indicator(bar, x);
                (sum, decay * m * m * mf[k])
            });
            let (l, r): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            tail.push((ctx.fam.l2(&l), ctx.fam.l2(&r)));
        }
    }
    rep.bounds.push(BoundCheck::fit("separated_tail", tail, &p.constants));

    let form = p.a.powi(-(p.mu as i32)) * d.powi(6);
    let psi3 = psi(3, p.a * d);
    let whole_sq: Vec<f64> = ctx.tmax_and_square(members).into_iter().map(|(_, q)| q).collect();
    rep.bounds.insert(
        0,
        BoundCheck::fit(
            "separated",
            ctx.tmax_and_square(&sharp).into_iter().zip(&whole_sq).map(|((l, _), q)| (l, form + ctx.k0 * psi3 * q)),
            &p.constants,
        ),
    );
    rep.partition(sys, sharp, flat);
    let bar_total: f64 = bars.iter().map(|b| b.length).sum();
    let flat_form = d.powi(-(p.mu as i32)) * (sys.counting_l1(members) + bar_total);
    rep.bounds.push(BoundCheck::fit("separated_flat", [(rep.flat_measure, flat_form)], &p.constants));
    rep.component("V_sharp", v_sharp.len() as f64);
    rep.component("V_flat", v_flat.len() as f64);
    rep.component("bar_square_sup", overlap);
    rep.component("D", d);
    rep.component("K0", ctx.k0);
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
    fn one_bar_matches_uniform() {
        let sys = system_of(vec![lacunary_tree(iv(0.0, 8.0), 0.0, &[3, 0], |_, _| true)]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = split_separated(ctx, &all, &[iv(0.0, 8.0)]).unwrap();
            let u = split_uniform(ctx, &all).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            assert_eq!(r.children.len(), 1);
            assert_eq!(r.sharp, u.sharp);
            assert_eq!(r.flat, u.flat);
        });
    }

    #[test]
    fn far_bars_add_flat_parts() {
        let sys = system_of(vec![
            lacunary_tree(iv(-24.0, 8.0), 0.0, &[3, 0, -3], |_, _| true),
            lacunary_tree(iv(16.0, 8.0), 0.0, &[3, 0, -3], |_, _| true),
        ]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = split_separated(ctx, &all, &[iv(-24.0, 8.0), iv(16.0, 8.0)]).unwrap();
            let sum: f64 = r.children.iter().map(|c| c.flat_measure).sum();
            assert_eq!(r.flat_measure, sum);
            assert_eq!(r.sharp.len() + r.flat.len(), all.len());
        });
    }

    #[test]
    fn overlapping_dilates_rejected() {
        let sys = system_of(vec![
            lacunary_tree(iv(0.0, 8.0), 0.0, &[3], |_, _| true),
            lacunary_tree(iv(8.0, 8.0), 0.0, &[3], |_, _| true),
        ]);
        test_context(sys, 2.0, |ctx| {
            let e = split_separated(ctx, &[0, 1], &[iv(0.0, 8.0), iv(8.0, 8.0)]);
            assert!(matches!(e, Err(LabError::StageRejected { .. })));
        });
    }
}
