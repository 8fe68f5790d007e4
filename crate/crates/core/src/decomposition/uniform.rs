//! Uniform families: bottom removal, basepoint separation and the restriction identity.

use crate::error::{LabError, Result};
use crate::grids::separate_grid;
use crate::intervals::counting_linf;
use crate::operators::scale_separation_errors;
use crate::signal::SampledFunction;
use crate::tiles::is_uniform;

use super::shallow::split_shallow;
use super::{distinct, minus, psi, BoundCheck, Context, SplitReport};

/// Largest deviation allowed in the restriction identity, per scale.
pub const RESTRICTION_TOLERANCE: f64 = 1e-6;

/// Smallest integer `γ` with `2^γ > 2 K |m_a|`.
pub fn gamma_for(area_sup: f64, slope: f64) -> i32 {
    (2.0 * area_sup * slope.abs()).log2().floor() as i32 + 1
}

pub fn split_uniform(ctx: &Context, members: &[usize]) -> Result<SplitReport> {
    const STAGE: &str = "uniform";
    let sys = &ctx.fam.system;
    let p = ctx.params;
    let mut rep = SplitReport::new(STAGE);
    if members.is_empty() {
        rep.partition(sys, Vec::new(), Vec::new());
        return Ok(rep.finish());
    }
    let mut w = Vec::new();
    if !is_uniform(sys, members, &mut w) {
        return Err(LabError::rejected(STAGE, w.swap_remove(0)));
    }
    let n_inf = sys.counting_linf(members) as f64;
    let d = p.d_for(sys, members);
    if d < p.a + n_inf {
        return Err(LabError::rejected(STAGE, format!("D = {d} < A + ‖N‖∞ = {}", p.a + n_inf)));
    }
    let c = sys.constants();
    let m_a = sys.affine.slope.abs();
    let gamma = gamma_for(c.area_sup, m_a);
    let len = |s: usize| sys.tiles[s].space.length;
    let inf_len = members.iter().map(|&s| len(s)).fold(f64::INFINITY, f64::min);
    let cutoff = gamma_exp2(gamma) / (c.beta * m_a * c.area_tilde) * inf_len;
    let (bottom, upper): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&s| len(s) < cutoff);
    rep.component("gamma", gamma as f64);
    rep.component("bottom_cutoff", cutoff);
    rep.component("D", d);

    // bottom: grid split, then the shallow estimate
    let a0 = (cutoff / inf_len).log2().ceil().max(1.0) as usize;
    let mut flat = Vec::new();
    let mut bottom_sharp = Vec::new();
    if !bottom.is_empty() {
        let spaces = distinct(sys.spaces(&bottom));
        let d_grid = d.max(counting_linf(&spaces) as f64 + 1.0);
        let sep = separate_grid(&spaces, p.mu, d_grid, p.base_threshold).map_err(|e| LabError::rejected(STAGE, e.to_string()))?;
        for &s in &bottom {
            if sep.flat.contains(&sys.tiles[s].space) {
                flat.push(s);
            } else {
                bottom_sharp.push(s);
            }
        }
        rep.children.push(split_shallow(ctx, &bottom_sharp, a0)?);
    }

    // upper part: separation chain between the remaining tops
    let tops: Vec<usize> = sys.trees(&upper).keys().copied().collect();
    let lambdas: Vec<f64> = tops.iter().map(|&t| sys.basepoint(t)).collect();
    let sup_omega = members.iter().map(|&s| sys.tiles[s].hull().length).fold(0.0, f64::max);
    let upper_inf = upper.iter().map(|&s| len(s)).fold(f64::INFINITY, f64::min);
    let mut chain = Vec::new();
    for (i, &t) in tops.iter().enumerate() {
        for (j, &u) in tops.iter().enumerate().skip(i + 1) {
            let steps = [
                (lambdas[i] - lambdas[j]).abs(),
                m_a * sys.tops[t].freq.dist(&sys.tops[u].freq),
                c.beta * m_a * sup_omega,
                c.area_tilde * m_a * c.beta / inf_len,
                gamma_exp2(gamma) / upper_inf,
            ];
            if let Some(k) = steps.windows(2).position(|x| x[0] < x[1] * (1.0 - 1e-12)) {
                chain.push(format!("tops {t},{u}: step {} fails ({} < {})", k + 1, steps[k], steps[k + 1]));
            }
        }
    }
    rep.check("separation_chain", chain);

    if !upper.is_empty() {
        let packets: Vec<&SampledFunction> = upper.iter().map(|&s| &ctx.fam.packets[s]).collect();
        let lengths: Vec<f64> = upper.iter().map(|&s| len(s)).collect();
        let signs: Vec<f64> = upper.iter().map(|&s| ctx.fam.signs[s]).collect();
        let mut ks: Vec<i32> = upper.iter().map(|&s| sys.tiles[s].space.scale_level()).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.push(ks.last().copied().unwrap_or(0) + 3);
        let mut worst = 0.0f64;
        let mut witness = Vec::new();
        for (i, pr) in ctx.probes.iter().enumerate() {
            for (k, err) in scale_separation_errors(&packets, &lengths, &signs, &pr.f, &lambdas, gamma, &ks)? {
                let err = err / pr.norm.max(f64::MIN_POSITIVE);
                worst = worst.max(err);
                if err > RESTRICTION_TOLERANCE && witness.len() < 8 {
                    witness.push(format!("probe {i}, k = {k}: error {err:e}"));
                }
            }
        }
        rep.identities.push(super::IdentityCheck {
            name: "restriction".into(),
            evaluations: ctx.probes.len() * ks.len(),
            failures: witness.len(),
            witness: witness.first().cloned(),
        });
        rep.component("restriction_error", worst);
    }

    let sharp: Vec<usize> = minus(members, &flat);
    let decay = p.a.powi(-(p.mu as i32)) * d.powi(6);
    let psi3 = psi(3, p.a * d);
    let whole_sq: Vec<f64> = ctx.tmax_and_square(members).into_iter().map(|(_, q)| q).collect();
    rep.bounds.push(BoundCheck::fit(
        "uniform",
        ctx.tmax_and_square(&sharp).into_iter().zip(&whole_sq).map(|((l, _), q)| (l, decay + ctx.k0 * psi3 * q)),
        &p.constants,
    ));
    let log3 = psi(3, n_inf);
    rep.bounds.push(BoundCheck::fit(
        "uniform_restriction",
        ctx.probes.iter().map(|pr| {
            let n = pr.norm.max(f64::MIN_POSITIVE);
            (ctx.fam.tmax_norm(&upper, pr) / n, log3 * ctx.fam.linear(&upper, pr).lp_norm(2.0).expect("finite") / n)
        }),
        &p.constants,
    ));
    rep.partition(sys, sharp, flat);
    let flat_form = d.powi(-(p.mu as i32)) * sys.counting_l1(members);
    rep.bounds.push(BoundCheck::fit("uniform_flat", [(rep.flat_measure, flat_form)], &p.constants));
    rep.component("A0", a0 as f64);
    rep.component("K0", ctx.k0);
    rep.component("psi3", psi3);
    Ok(rep.finish())
}

fn gamma_exp2(gamma: i32) -> f64 {
    (gamma as f64).exp2()
}

#[cfg(test)]
mod tests {
    use super::super::synth::{lacunary_tree, system_of, test_context};
    use super::super::SplitParams;
    use super::*;
    use crate::intervals::Interval;

    fn iv(a: f64, l: f64) -> Interval {
        Interval::new(a, l).unwrap()
    }

    #[test]
    fn gamma_for_lacunary_constants() {
        // K = 3 with the identity map: 2^γ > 6
        assert_eq!(gamma_for(3.0, 1.0), 3);
        assert_eq!(gamma_for(4.0, 1.0), 4);
    }

    #[test]
    fn single_tree_three_scales() {
        let sys = system_of(vec![lacunary_tree(iv(0.0, 8.0), 0.0, &[3, 0, -3], |_, _| true)]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let r = split_uniform(ctx, &all).unwrap();
            assert!(r.pass, "{:?}", r.failures());
            // cutoff 32 · inf = 4: only the top scale stays above the bottom
            assert_eq!(r.components["bottom_cutoff"], 4.0);
            assert!(r.components["restriction_error"] < RESTRICTION_TOLERANCE);
            assert_eq!(r.sharp.len() + r.flat.len(), all.len());
        });
    }

    #[test]
    fn tops_at_exact_uniform_distance() {
        // max |ω_s| = 24 and β = 1/3: top frequencies exactly 8 apart
        let sys = system_of(vec![
            lacunary_tree(iv(0.0, 8.0), 0.0, &[3, 0, -3], |_, _| true),
            lacunary_tree(iv(0.0, 8.0), 8.125, &[3, 0, -3], |_, _| true),
        ]);
        test_context(sys, 2.0, |ctx| {
            let all = ctx.fam.system.all();
            let sys = &ctx.fam.system;
            assert_eq!(sys.tops[0].freq.dist(&sys.tops[1].freq), sys.constants().beta * 24.0);
            let r = split_uniform(ctx, &all).unwrap();
            let chain = r.checks.iter().find(|c| c.name == "separation_chain").unwrap();
            assert!(chain.pass, "{:?}", chain.witnesses);
            assert!(r.components["restriction_error"] < RESTRICTION_TOLERANCE);
        });
    }

    #[test]
    fn small_d_rejected() {
        let sys = system_of(vec![lacunary_tree(iv(0.0, 8.0), 0.0, &[3], |_, _| true)]);
        test_context(sys, 2.0, |ctx| {
            let params = SplitParams { d: Some(1.5), ..ctx.params.clone() };
            let c = Context { params: &params, ..*ctx };
            assert!(matches!(split_uniform(&c, &[0]), Err(LabError::StageRejected { .. })));
        });
    }

    #[test]
    fn non_uniform_rejected() {
        let sys = system_of(vec![
            lacunary_tree(iv(0.0, 8.0), 0.0, &[3], |_, _| true),
            lacunary_tree(iv(16.0, 8.0), 32.0, &[3], |_, _| true),
        ]);
        test_context(sys, 2.0, |ctx| {
            assert!(matches!(split_uniform(ctx, &[0, 1]), Err(LabError::StageRejected { .. })));
        });
    }
}
