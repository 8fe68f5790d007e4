//! Model sums over tri-tile systems in plain, maximal and stopping-time form,
//! and the single-scale counterexample with its sign-averaged scaling scan.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::intervals::Interval;
use crate::packets::{make_wave_packets, orthogonalize, truncate_by_stopping_time, BaseBump, StoppingTime};
use crate::par;
use crate::rng;
use crate::signal::{lp_norm_of, Grid, SampledFunction};
use crate::tiles::{validate_tri_tile_system, Affine, Tile, TileSystem, TriTile};

/// Dyadic level `k` with `2^k ≤ |I| < 2^{k+1}`-ish: the grid level when it exists.
pub fn dyadic_level(len: f64) -> i32 {
    let iv = Interval { left: 0.0, length: len };
    iv.grid_level().unwrap_or_else(|| iv.scale_level())
}

/// `Σ_s c_s g_s` at every sample, summed in index order.
pub fn linear_combination(grid: Grid, coeffs: &[Complex64], funcs: &[&SampledFunction]) -> SampledFunction {
    let values = par::map_range(grid.n, |k| {
        coeffs.iter().zip(funcs).fold(Complex64::new(0.0, 0.0), |acc, (c, g)| acc + c * g.values[k])
    });
    SampledFunction { grid, values }
}

/// `sup_k |Σ_{|I_s| ≥ 2^k} c_s g_s|` at every sample. Only the levels present
/// (plus the empty sum above them) matter.
pub fn truncated_sup(grid: Grid, coeffs: &[Complex64], funcs: &[&SampledFunction], lengths: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    let levels: Vec<i32> = lengths.iter().map(|&l| dyadic_level(l)).collect();
    order.sort_by(|&a, &b| levels[b].cmp(&levels[a]).then(a.cmp(&b)));
    par::map_range(grid.n, |k| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut best = 0.0f64;
        for (pos, &s) in order.iter().enumerate() {
            acc += coeffs[s] * funcs[s].values[k];
            let level_ends = order.get(pos + 1).is_none_or(|&t| levels[t] != levels[s]);
            if level_ends {
                best = best.max(acc.norm());
            }
        }
        best
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalMode {
    Plain,
    Max,
    Sigma(StoppingTime),
}

/// A tri-tile system with packets `φ_{s,i}` and signs `ε_s`.
#[derive(Debug, Clone)]
pub struct ModelSumSpec {
    pub system: TileSystem,
    pub packets: Vec<[SampledFunction; 3]>,
    pub signs: Vec<f64>,
    pub grid: Grid,
}

impl ModelSumSpec {
    pub fn new(system: TileSystem, packets: Vec<[SampledFunction; 3]>, signs: Vec<f64>) -> Result<Self> {
        let report = validate_tri_tile_system(&system);
        if !report.pass {
            return Err(LabError::Precondition(format!("tile system fails {:?}", report.failed())));
        }
        if packets.len() != system.len() || signs.len() != system.len() {
            return Err(LabError::invalid("packets", "one packet triple and one sign per tile required"));
        }
        if signs.iter().any(|&e| e != 1.0 && e != -1.0) {
            return Err(LabError::invalid("signs", "must be ±1"));
        }
        let grid = packets.first().map(|p| p[0].grid).unwrap_or(Grid { x0: 0.0, h: 1.0, n: 1 });
        for p in &packets {
            for f in p {
                grid.check_same(&f.grid)?;
            }
        }
        Ok(ModelSumSpec { system, packets, signs, grid })
    }

    /// Builds packets for all three components, orthogonalised per frequency column.
    pub fn build(system: TileSystem, bump: &BaseBump, grid: Grid, signs: Vec<f64>) -> Result<Self> {
        let mut comps: Vec<Vec<SampledFunction>> = Vec::new();
        for i in 0..3 {
            let tiles: Vec<Tile> = system.tiles.iter().map(|s| s.component(i)).collect();
            let mut ps = make_wave_packets(&tiles, bump, grid, &system.affine)?;
            orthogonalize(&mut ps)?;
            comps.push(ps.into_iter().map(|p| p.f).collect());
        }
        let mut it: Vec<_> = comps.into_iter().map(|c| c.into_iter()).collect();
        let packets = (0..system.len())
            .map(|_| {
                let a = it[0].next().expect("len");
                let b = it[1].next().expect("len");
                let c = it[2].next().expect("len");
                [a, b, c]
            })
            .collect();
        ModelSumSpec::new(system, packets, signs)
    }

    /// `ε_s |I_s|^{-1/2} ⟨f1, φ_{s,1}⟩⟨f2, φ_{s,2}⟩`.
    pub fn coefficients(&self, f1: &SampledFunction, f2: &SampledFunction) -> Result<Vec<Complex64>> {
        self.grid.check_same(&f1.grid)?;
        self.grid.check_same(&f2.grid)?;
        Ok(par::map_range(self.system.len(), |s| {
            let a = f1.inner_product(&self.packets[s][0]).expect("grid checked");
            let b = f2.inner_product(&self.packets[s][1]).expect("grid checked");
            a * b * (self.signs[s] / self.system.tiles[s].len().sqrt())
        }))
    }
}

/// Evaluates the model sum in the requested form.
pub fn eval_model_sum(spec: &ModelSumSpec, f1: &SampledFunction, f2: &SampledFunction, mode: &EvalMode) -> Result<SampledFunction> {
    let coeffs = spec.coefficients(f1, f2)?;
    let grid = spec.grid;
    match mode {
        EvalMode::Plain => {
            let funcs: Vec<&SampledFunction> = spec.packets.iter().map(|p| &p[2]).collect();
            Ok(linear_combination(grid, &coeffs, &funcs))
        }
        EvalMode::Max => {
            let funcs: Vec<&SampledFunction> = spec.packets.iter().map(|p| &p[2]).collect();
            let lengths: Vec<f64> = spec.system.tiles.iter().map(TriTile::len).collect();
            let v = truncated_sup(grid, &coeffs, &funcs, &lengths);
            Ok(SampledFunction { grid, values: v.into_iter().map(|x| Complex64::new(x, 0.0)).collect() })
        }
        EvalMode::Sigma(sigma) => {
            let cut: Vec<SampledFunction> = spec
                .packets
                .iter()
                .zip(&spec.system.tiles)
                .map(|(p, t)| truncate_by_stopping_time(&p[2], t.len(), sigma))
                .collect();
            let funcs: Vec<&SampledFunction> = cut.iter().collect();
            Ok(linear_combination(grid, &coeffs, &funcs))
        }
    }
}

/// Tiles `[0,1) × [4n+i, 4n+i+1)`, one tri-tile per `n`, each its own tree.
pub fn counterexample_system(n: usize) -> TileSystem {
    let unit = |a: f64| Interval { left: a, length: 1.0 };
    let tiles: Vec<TriTile> = (0..n)
        .map(|k| {
            let b = 4.0 * k as f64;
            TriTile::new(unit(0.0), [unit(b + 1.0), unit(b + 2.0), unit(b + 3.0)])
        })
        .collect();
    let tops = tiles.iter().map(TriTile::hull_tile).collect();
    TileSystem::new(tiles, tops, (0..n).collect(), Affine::default(), 2.0).expect("well formed")
}

/// Smallest power-of-two sampling rate resolving the counterexample's band.
pub fn counterexample_resolution(n: usize) -> usize {
    (2 * (4 * n + 5)).next_power_of_two()
}

/// The counterexample spec with `f_i = Σ_n φ_{n,i}`; all signs `+1`.
pub fn build_counterexample(n: usize, bump: &BaseBump, grid: Grid) -> Result<(ModelSumSpec, SampledFunction, SampledFunction)> {
    if n == 0 {
        return Err(LabError::invalid("N", "must be at least 1"));
    }
    let spec = ModelSumSpec::build(counterexample_system(n), bump, grid, vec![1.0; n])?;
    let sum = |i: usize| {
        let funcs: Vec<&SampledFunction> = spec.packets.iter().map(|p| &p[i]).collect();
        linear_combination(grid, &vec![Complex64::new(1.0, 0.0); n], &funcs)
    };
    let (f1, f2) = (sum(0), sum(1));
    Ok((spec, f1, f2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub avg_norm: f64,
    pub norm_f1_p: f64,
    pub norm_f2_q: f64,
    pub ratio: f64,
}

pub const SCAN_COLUMNS: [&str; 5] = ["N", "avg_norm", "norm_f1_p", "norm_f2_q", "ratio"];

/// Largest `N` for which signs are enumerated exhaustively.
pub const EXHAUSTIVE_MAX_N: usize = 12;

/// Fast evaluator for `‖Σ_n ε_n φ_{n,3}‖_t`. Since `φ_{n,3}` is `φ_{0,3}`
/// modulated by `4n`, the modulus factors as `|φ_{0,3}(x)| |P(x)|` with
/// `P(x) = Σ ε_n e(4nx)`, which is `1/4`-periodic. On a grid with `1/(4h) = p`
/// samples per period, `P` is a length-`p` DFT and the norm needs only the
/// per-residue weights `W_j = Σ_{k ≡ j} |φ_k|^t`.
pub struct CounterexampleEvaluator {
    grid: Grid,
    base_abs: Vec<f64>,
    period: usize,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl CounterexampleEvaluator {
    pub fn new(bump: &BaseBump, grid: Grid) -> Result<Self> {
        let p = 1.0 / (4.0 * grid.h);
        if (p - p.round()).abs() > 1e-9 || p < 1.0 {
            return Err(LabError::invalid("resolution", "1/(4h) must be a positive integer"));
        }
        let period = p.round() as usize;
        let unit = Interval { left: 0.0, length: 1.0 };
        let base = crate::packets::make_wave_packet(
            &Tile::new(unit, Interval { left: 3.0, length: 1.0 }),
            bump,
            grid,
            &Affine::default(),
        )?;
        let fft = FftPlanner::new().plan_fft_inverse(period);
        Ok(CounterexampleEvaluator { grid, base_abs: base.f.abs(), period, fft })
    }

    pub fn max_n(&self) -> usize {
        self.period
    }

    pub fn weights(&self, t: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.period];
        for (k, a) in self.base_abs.iter().enumerate() {
            w[k % self.period] += a.powf(t);
        }
        w
    }

    /// `|P|` at the `p` residues for sign pattern `eps`.
    pub fn poly_abs(&self, eps: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.period];
        for (n, &s) in eps.iter().enumerate() {
            // e(4n x_j) = e(4n x0) e(n j / p)
            buf[n % self.period] += crate::signal::e(4.0 * n as f64 * self.grid.x0) * s;
        }
        self.fft.process(&mut buf);
        buf.iter().map(|c| c.norm()).collect()
    }

    /// `‖Σ ε_n φ_{n,3}‖_t` using precomputed weights for `t`.
    pub fn norm_with(&self, eps: &[f64], weights: &[f64], t: f64) -> f64 {
        let p = self.poly_abs(eps);
        let s: f64 = p.iter().zip(weights).map(|(a, w)| w * a.powf(t)).sum();
        (self.grid.h * s).powf(1.0 / t)
    }

    /// `‖f_i‖_t`; every `f_i` has modulus `|φ_0| |Σ_n e(4nx)|`.
    pub fn test_function_norm(&self, n: usize, t: f64) -> f64 {
        self.norm_with(&vec![1.0; n], &self.weights(t), t)
    }
}

/// Sign-averaged `‖Σ ε_n φ_{n,3}‖_r` against `‖f_1‖_p ‖f_2‖_q` for each `N`.
pub fn counterexample_scan(
    n_list: &[usize],
    r: f64,
    p: f64,
    q: f64,
    trials: usize,
    seed: u64,
    bump: &BaseBump,
    grid: Grid,
) -> Result<Vec<ScanRow>> {
    if ((1.0 / p + 1.0 / q) - 1.0 / r).abs() > 1e-9 {
        return Err(LabError::invalid("p,q,r", format!("1/{p} + 1/{q} != 1/{r}")));
    }
    if trials < 32 {
        return Err(LabError::invalid("trials", "at least 32 required"));
    }
    let ev = CounterexampleEvaluator::new(bump, grid)?;
    let w_r = ev.weights(r);
    let mut rows = Vec::new();
    for &n in n_list {
        if n == 0 || n > ev.max_n() {
            return Err(LabError::invalid("N", format!("{n} outside 1..={}", ev.max_n())));
        }
        let norms: Vec<f64> = if n <= EXHAUSTIVE_MAX_N {
            par::map_range(1usize << n, |mask| ev.norm_with(&rng::signs_from_mask(mask as u64, n), &w_r, r))
        } else {
            par::map_range(trials, |t| {
                let mut g = rng::stream(seed, n as u64, t as u64);
                ev.norm_with(&rng::signs(&mut g, n), &w_r, r)
            })
        };
        let avg_norm = norms.iter().sum::<f64>() / norms.len() as f64;
        let norm_f1_p = ev.test_function_norm(n, p);
        let norm_f2_q = ev.test_function_norm(n, q);
        rows.push(ScanRow { n, avg_norm, norm_f1_p, norm_f2_q, ratio: avg_norm / (norm_f1_p * norm_f2_q) });
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `‖Σ ε_n φ_{n,3}‖_t` by direct evaluation of the spec (reference path).
pub fn direct_signed_norm(spec: &ModelSumSpec, eps: &[f64], t: f64) -> Result<f64> {
    let funcs: Vec<&SampledFunction> = spec.packets.iter().map(|p| &p[2]).collect();
    let coeffs: Vec<Complex64> = eps.iter().map(|&e| Complex64::new(e, 0.0)).collect();
    let s = linear_combination(spec.grid, &coeffs, &funcs);
    lp_norm_of(&s.abs(), spec.grid.h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::e;

    fn small_grid() -> Grid {
        Grid::window(-64.0, 64.0, 64).unwrap()
    }

    #[test]
    fn counterexample_system_is_valid() {
        let r = validate_tri_tile_system(&counterexample_system(5));
        assert!(r.pass, "{:?}", r.failed());
        assert_eq!(r.orientation, -1);
    }

    #[test]
    fn single_tile_closed_form_and_max() {
        let (spec, f1, f2) = build_counterexample(1, &BaseBump::default(), small_grid()).unwrap();
        assert_eq!(f1, spec.packets[0][0]);
        let plain = eval_model_sum(&spec, &f1, &f2, &EvalMode::Plain).unwrap();
        let c = f1.inner_product(&spec.packets[0][0]).unwrap() * f2.inner_product(&spec.packets[0][1]).unwrap();
        for k in (0..plain.len()).step_by(97) {
            assert!((plain.values[k] - c * spec.packets[0][2].values[k]).norm() < 1e-12);
        }
        let max = eval_model_sum(&spec, &f1, &f2, &EvalMode::Max).unwrap();
        for k in 0..plain.len() {
            assert!((max.values[k].re - plain.values[k].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn test_functions_match_corrected_closed_form() {
        let n = 5;
        let g = small_grid();
        let (spec, f1, _) = build_counterexample(n, &BaseBump::default(), g).unwrap();
        // φ(x - 1/2) recovered from the n = 0 packet of component 1
        let base = &spec.packets[0][0];
        for k in (0..g.n).step_by(37) {
            let x = g.x(k);
            let d = e(4.0 * x) - 1.0;
            if d.norm() < 1e-3 {
                continue;
            }
            let phi = base.values[k] * e(-1.5 * x);
            let want = e(1.5 * x) * phi * (e(4.0 * n as f64 * x) - 1.0) / d;
            assert!((f1.values[k] - want).norm() < 1e-8);
        }
    }

    #[test]
    fn square_function_identity() {
        let n = 4;
        let g = small_grid();
        let (spec, _, _) = build_counterexample(n, &BaseBump::default(), g).unwrap();
        for k in (0..g.n).step_by(41) {
            let s: f64 = spec.packets.iter().map(|p| p[2].values[k].norm_sqr()).sum();
            let want = n as f64 * spec.packets[0][2].values[k].norm_sqr();
            assert!((s - want).abs() <= 1e-13, "{s} {want}");
        }
    }

    #[test]
    fn coefficients_are_one() {
        let (spec, f1, f2) = build_counterexample(6, &BaseBump::default(), small_grid()).unwrap();
        for p in &spec.packets {
            assert!((f1.inner_product(&p[0]).unwrap() - 1.0).norm() < 1e-9);
            assert!((f2.inner_product(&p[1]).unwrap() - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn fast_path_matches_direct_evaluation() {
        let n = 6;
        let g = small_grid();
        let b = BaseBump::default();
        let (spec, _, _) = build_counterexample(n, &b, g).unwrap();
        let ev = CounterexampleEvaluator::new(&b, g).unwrap();
        for mask in [0u64, 5, 17, 63] {
            let eps = rng::signs_from_mask(mask, n);
            for t in [0.6, 1.0, 2.0] {
                let fast = ev.norm_with(&eps, &ev.weights(t), t);
                let slow = direct_signed_norm(&spec, &eps, t).unwrap();
                assert!((fast - slow).abs() < 1e-9 * slow, "{fast} {slow}");
            }
        }
    }

    #[test]
    fn orthogonal_input_gives_zero() {
        let (spec, _, f2) = build_counterexample(3, &BaseBump::default(), small_grid()).unwrap();
        let zero = SampledFunction::zeros(spec.grid);
        for mode in [EvalMode::Plain, EvalMode::Max, EvalMode::Sigma(StoppingTime::constant(0))] {
            let out = eval_model_sum(&spec, &zero, &f2, &mode).unwrap();
            assert!(out.values.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn scan_rejects_bad_exponents() {
        let g = Grid::window(-8.0, 8.0, 64).unwrap();
        assert!(counterexample_scan(&[8], 1.0, 2.0, 3.0, 64, 1, &BaseBump::default(), g).is_err());
        assert!(counterexample_scan(&[8], 1.0, 2.0, 2.0, 8, 1, &BaseBump::default(), g).is_err());
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((loglog_slope(&xs, &ys) - 0.7).abs() < 1e-12);
    }
}
