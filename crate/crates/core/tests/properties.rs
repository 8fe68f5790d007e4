use num_complex::Complex64;
use proptest::prelude::*;

use tflab::decomposition::synth::{corpus_family, probes};
use tflab::grids::{enlarge_to_grids, separate_grid};
use tflab::intervals::{
    canonical_cmp, counting_integral, counting_l1, hl_maximal_indicator, is_grid, Interval, IntervalUnion,
};
use tflab::model_sum::{counterexample_resolution, counterexample_system, eval_model_sum, EvalMode, ModelSumSpec};
use tflab::packets::{make_wave_packet, BaseBump};
use tflab::signal::{fourier_transform, hl_maximal, inverse_fourier_transform, lp_norm_of, Grid, SampledFunction};
use tflab::tiles::{tile_order, Affine, Tile};

fn dyadic() -> impl Strategy<Value = Interval> {
    (-3i32..=3, 0i64..1024).prop_map(|(level, slot)| {
        let length = (level as f64).exp2();
        let slots = (128.0 / length) as i64;
        Interval { left: -64.0 + (slot % slots) as f64 * length, length }
    })
}

/// Dyadic-endpoint intervals of arbitrary (not necessarily dyadic) lengths.
fn loose() -> impl Strategy<Value = Interval> {
    (-256i64..256, 1i64..64).prop_map(|(a, l)| Interval { left: a as f64 / 8.0, length: l as f64 / 8.0 })
}

fn dyadic_tile() -> impl Strategy<Value = Tile> {
    (dyadic(), -8i64..8).prop_map(|(space, k)| {
        let w = 1.0 / space.length;
        Tile::new(space, Interval { left: k as f64 * w, length: w })
    })
}

fn small_grid() -> Grid {
    Grid::window(-8.0, 8.0, 16).unwrap()
}

fn signal(grid: Grid) -> impl Strategy<Value = SampledFunction> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), grid.n)
        .prop_map(move |v| SampledFunction::new(grid, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tile_order_is_a_partial_order(ts in prop::collection::vec(dyadic_tile(), 1..12)) {
        for a in &ts {
            prop_assert!(tile_order(a, a));
            for b in &ts {
                if tile_order(a, b) && tile_order(b, a) {
                    prop_assert_eq!(a, b);
                }
                for c in &ts {
                    if tile_order(a, b) && tile_order(b, c) {
                        prop_assert!(tile_order(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn grid_verdict_is_translation_and_dilation_invariant(
        items in prop::collection::vec(loose(), 1..16),
        shift in -64i64..64,
        power in -3i32..=3,
    ) {
        let base = is_grid(&items);
        let t = shift as f64 / 8.0;
        let moved: Vec<Interval> = items.iter().map(|iv| iv.translate(t)).collect();
        let scaled: Vec<Interval> = items.iter().map(|iv| iv.scale((power as f64).exp2())).collect();
        prop_assert_eq!(&is_grid(&moved), &base);
        prop_assert_eq!(&is_grid(&scaled), &base);
    }

    #[test]
    fn counting_l1_is_the_integral_of_the_counting_function(items in prop::collection::vec(loose(), 0..24)) {
        prop_assert_eq!(counting_l1(&items), counting_integral(&items));
    }

    #[test]
    fn indicator_maximal_decreases_away_from_the_interval(iv in loose(), d in 0.01f64..50.0, e in 0.01f64..50.0) {
        prop_assert_eq!(hl_maximal_indicator(&iv, iv.center()), 1.0);
        let (near, far) = if d < e { (d, e) } else { (e, d) };
        prop_assume!(far - near > 1e-9);
        prop_assert!(hl_maximal_indicator(&iv, iv.right() + far) < hl_maximal_indicator(&iv, iv.right() + near));
        prop_assert!(hl_maximal_indicator(&iv, iv.left - far) < hl_maximal_indicator(&iv, iv.left - near));
    }

    #[test]
    fn enlargement_contains_nests_and_ignores_order(
        mut items in prop::collection::vec(dyadic(), 1..32),
        a_pick in 0usize..3,
        rot in 0usize..32,
    ) {
        items.sort_by(canonical_cmp);
        items.dedup();
        let a = [2.0, 4.0, 8.0][a_pick];
        let r = enlarge_to_grids(&items, a).unwrap();
        prop_assert!(r.containment_ok(a));
        prop_assert!(r.classes_nest());
        prop_assert!(r.class_count <= (4.0 * a * a) as usize);
        let k = rot % items.len();
        items.rotate_left(k);
        items.reverse();
        prop_assert_eq!(enlarge_to_grids(&items, a).unwrap(), r);
    }

    #[test]
    fn separation_partitions_the_grid(mut items in prop::collection::vec(dyadic(), 1..48), n in 2u32..=3) {
        items.sort_by(canonical_cmp);
        items.dedup();
        let d = 2.0 * tflab::intervals::counting_linf(&items) as f64;
        let s = separate_grid(&items, n, d, 1.0).unwrap();
        let mut back: Vec<Interval> = s.sharp.iter().chain(&s.flat).copied().collect();
        back.sort_by(canonical_cmp);
        prop_assert_eq!(&back, &items);
        prop_assert!(s.flat_measure <= s.flat_bound(n, d));
    }

    #[test]
    fn union_measure_is_monotone(a in prop::collection::vec(loose(), 0..12), b in prop::collection::vec(loose(), 0..12)) {
        let small = IntervalUnion::new(a.clone());
        let big = IntervalUnion::new(a.into_iter().chain(b));
        prop_assert!(small.measure() <= big.measure());
    }

    #[test]
    fn fourier_round_trip(f in signal(small_grid())) {
        let back = inverse_fourier_transform(&fourier_transform(&f), f.grid).unwrap();
        let err = f.values.iter().zip(&back.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "sup error {err}");
    }

    #[test]
    fn maximal_function_is_sublinear(f in signal(small_grid()), g in signal(small_grid())) {
        let (mf, mg, ms) = (hl_maximal(&f), hl_maximal(&g), hl_maximal(&f.add(&g).unwrap()));
        for k in 0..ms.len() {
            prop_assert!(ms[k] <= mf[k] + mg[k] + 1e-12);
        }
    }

    #[test]
    fn lp_triangle_inequality(f in signal(small_grid()), g in signal(small_grid()), t in 1.0f64..6.0) {
        let s = f.add(&g).unwrap();
        prop_assert!(s.lp_norm(t).unwrap() <= f.lp_norm(t).unwrap() + g.lp_norm(t).unwrap() + 1e-12);
        let bigger: Vec<f64> = f.abs().iter().map(|v| v * 1.5).collect();
        prop_assert!(lp_norm_of(&f.abs(), f.grid.h, t).unwrap() <= lp_norm_of(&bigger, f.grid.h, t).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn packets_are_modulation_covariant(level in -1i32..=1, slot in -4i64..4, k in -3i64..3, lam in -4i64..4) {
        let grid = Grid::window(-16.0, 16.0, 64).unwrap();
        let len = (level as f64).exp2();
        let w = 1.0 / len;
        let rho = Tile::new(Interval { left: slot as f64 * len, length: len }, Interval { left: k as f64 * w, length: w });
        let lambda = lam as f64;
        let shifted = Tile::new(rho.space, rho.freq.translate(lambda));
        let bump = BaseBump::default();
        let a = make_wave_packet(&rho, &bump, grid, &Affine::default()).unwrap().f.modulate(lambda);
        let b = make_wave_packet(&shifted, &bump, grid, &Affine::default()).unwrap().f;
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "sup error {err}");
    }

    #[test]
    fn sign_flip_negates_plain_and_keeps_max(seed in any::<u64>()) {
        let n = 4;
        let grid = Grid::window(-8.0, 8.0, counterexample_resolution(n)).unwrap();
        let bump = BaseBump::default();
        let signs = tflab::rng::signs(&mut tflab::rng::stream(seed, 0, 0), n);
        let flipped: Vec<f64> = signs.iter().map(|e| -e).collect();
        let spec = ModelSumSpec::build(counterexample_system(n), &bump, grid, signs).unwrap();
        let neg = ModelSumSpec::build(counterexample_system(n), &bump, grid, flipped).unwrap();
        let f1 = SampledFunction::from_real(grid, |x| (-x * x / 4.0).exp());
        let f2 = SampledFunction::from_fn(grid, |x| Complex64::from_polar((-x * x / 8.0).exp(), 2.0 * x));
        let (p, q) = (eval_model_sum(&spec, &f1, &f2, &EvalMode::Plain).unwrap(), eval_model_sum(&neg, &f1, &f2, &EvalMode::Plain).unwrap());
        for (a, b) in p.values.iter().zip(&q.values) {
            prop_assert_eq!(*a, -*b);
        }
        let (m, mn) = (eval_model_sum(&spec, &f1, &f2, &EvalMode::Max).unwrap(), eval_model_sum(&neg, &f1, &f2, &EvalMode::Max).unwrap());
        prop_assert_eq!(m.values, mn.values);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Removing tiles into the flat part never increases the square
    /// function of the remainder; the maximal truncated sum is
    /// unchanged by a global sign flip.
    #[test]
    fn split_norms_are_monotone_and_sign_blind(index in 0usize..10, mask in any::<u64>()) {
        let fam = corpus_family(index, 1).unwrap();
        let ps = probes(&fam, 2, 1, 7).unwrap();
        let all = fam.system.all();
        let kept: Vec<usize> = all.iter().copied().filter(|&s| mask >> (s % 64) & 1 == 1).collect();
        let mut flipped = fam.clone();
        flipped.signs.iter_mut().for_each(|e| *e = -*e);
        for p in &ps {
            prop_assert!(fam.square(&kept, p) <= fam.square(&all, p));
            prop_assert_eq!(fam.tmax(&all, p), flipped.tmax(&all, p));
        }
    }
}
