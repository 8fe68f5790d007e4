//! The named experiments. Each returns tables, JSON reports and pass/fail lines.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde_json::json;

use crate::decomposition::rm::{point_masses, random_frame, random_orthonormal, rm_maximal_check};
use crate::decomposition::synth::{corpus_family, corpus_params, run_family, TEMPLATE_COUNT};
use crate::decomposition::{Family, FittedConstants, SplitParams, SplitReport};
use crate::error::{LabError, Result};
use crate::grids::{enlarge_to_grids, separate_grid};
use crate::intervals::{counting_l1, counting_linf, Interval};
use crate::model_sum::{counterexample_resolution, counterexample_scan, counterexample_system, loglog_slope, CounterexampleEvaluator, SCAN_COLUMNS};
use crate::operators::{bilinear_maximal, bourgain_maximal, dyadic_lattice, operator_profile, truncated_bilinear_singular, Basepoints, Kernel};
use crate::packets::{make_wave_packets, orthogonalize, validate_adapted, BaseBump};
use crate::par;
use crate::rng;
use crate::signal::{inverse_fourier_transform, lp_norm_of, Grid, SampledFunction};
use crate::tiles::{Tile, TileSystem};

use super::baseline::Baseline;
use super::config::{Experiment, ExperimentConfig};
use super::table::{Cell, Table};

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// A plot to draw from one of the tables.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PlotSpec {
    pub table: String,
    pub x: String,
    pub y: String,
    pub log_axes: bool,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub reports: Vec<(String, serde_json::Value)>,
    pub plots: Vec<PlotSpec>,
    pub verdicts: Vec<Verdict>,
    pub log: Vec<String>,
    /// Constants fitted by this run.
    pub fitted: FittedConstants,
}

impl Artifacts {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    fn judge(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.to_string(), pass, detail: detail.into() });
    }
}

/// Runs `cfg` against `baseline`. Identical inputs give identical artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<Artifacts> {
    let mut cfg = cfg.clone();
    let log = cfg.resolve()?;
    let mut art = match cfg.experiment {
        Experiment::CounterexampleScan => counterexample(&cfg)?,
        Experiment::MaximalScan => maximal(&cfg, baseline)?,
        Experiment::BourgainScan => bourgain(&cfg, baseline)?,
        Experiment::RmCheck => rm(&cfg)?,
        Experiment::GridLemmaCheck => grid_lemmas(&cfg, baseline)?,
        Experiment::PipelineRun => pipeline(&cfg, baseline)?,
        Experiment::PacketsValidate => packets(&cfg)?,
    };
    art.log.splice(0..0, log);
    Ok(art)
}

fn window_grid(cfg: &ExperimentConfig, window: (f64, f64), resolution: usize) -> Result<Grid> {
    let (a, b) = cfg.params.window.unwrap_or(window);
    Grid::window(a, b, cfg.params.resolution.unwrap_or(resolution))
}

/// Unit-norm function with a random spectrum on the bins where `keep` holds.
pub fn random_band_limited(grid: Grid, keep: impl Fn(f64) -> bool, r: &mut impl Rng) -> Result<SampledFunction> {
    let fg = grid.freq_grid();
    let mut spec = SampledFunction::zeros(fg);
    for (k, v) in spec.values.iter_mut().enumerate() {
        let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        if keep(fg.x(k)) {
            *v = Complex64::new(a, b);
        }
    }
    let f = inverse_fourier_transform(&spec, grid)?;
    let n = f.lp_norm(2.0)?;
    if n == 0.0 {
        return Err(LabError::invalid("band", "no frequency bin selected"));
    }
    Ok(f.scale(Complex64::new(1.0 / n, 0.0)))
}

// ---------------------------------------------------------------- counterexample

/// Exponents `t` whose test-function norms are tracked.
pub const TEST_NORM_EXPONENTS: [f64; 3] = [1.5, 2.0, 4.0];

fn counterexample(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let pr = &cfg.params;
    let n_list = pr.n_list.clone().unwrap_or_else(|| vec![8, 16, 32, 64, 128, 256]);
    let r = pr.r.unwrap_or(1.0);
    let (p, q) = match (pr.p, pr.q) {
        (Some(p), Some(q)) => (p, q),
        _ => {
            art.log.push(format!("p = q = {} from r = {r}", 2.0 * r));
            (2.0 * r, 2.0 * r)
        }
    };
    let trials = pr.trials.unwrap_or(200);
    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let grid = window_grid(cfg, (-32.0, 32.0), counterexample_resolution(n_max).max(4 * n_max))?;
    let bump = BaseBump::default();
    let rows = counterexample_scan(&n_list, r, p, q, trials, cfg.seed, &bump, grid)?;
    let mut t = Table::new(&SCAN_COLUMNS);
    for row in &rows {
        t.push(vec![row.n.into(), row.avg_norm.into(), row.norm_f1_p.into(), row.norm_f2_q.into(), row.ratio.into()]);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let avg: Vec<f64> = rows.iter().map(|r| r.avg_norm).collect();
    let ratio: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let mut slopes = Table::new(&["quantity", "slope", "expected"]);
    if rows.len() > 1 {
        let s = loglog_slope(&ns, &avg);
        slopes.push(vec!["avg_norm".into(), s.into(), 0.5.into()]);
        art.judge("avg_norm_slope", (s - 0.5).abs() <= 0.05, format!("slope {s:.4}, expected 0.50 ± 0.05"));

        let ev = CounterexampleEvaluator::new(&bump, grid)?;
        let mut norms = Table::new(&["t", "N", "norm"]);
        for t_exp in TEST_NORM_EXPONENTS {
            let vals: Vec<f64> = n_list.iter().map(|&n| ev.test_function_norm(n, t_exp)).collect();
            for (&n, &v) in n_list.iter().zip(&vals) {
                norms.push(vec![t_exp.into(), n.into(), v.into()]);
            }
            let s = loglog_slope(&ns, &vals);
            let e = 1.0 - 1.0 / t_exp;
            slopes.push(vec![format!("norm_f_{t_exp}").into(), s.into(), e.into()]);
            art.judge(&format!("test_norm_slope_{t_exp}"), (s - e).abs() <= 0.05, format!("slope {s:.4}, expected {e:.4} ± 0.05"));
        }
        art.tables.push(("test_norms".into(), norms));

        let growth = 0.5 - (2.0 - 1.0 / r);
        let s = loglog_slope(&ns, &ratio);
        slopes.push(vec!["ratio".into(), s.into(), growth.into()]);
        if growth > 0.0 {
            art.judge("ratio_growth", s >= 0.10, format!("slope {s:.4}, required ≥ 0.10 (exponent {growth:.4})"));
        } else {
            let tail: Vec<(f64, f64)> = ns.iter().copied().zip(ratio.iter().copied()).filter(|&(n, _)| n >= 32.0).collect();
            let rises: Vec<String> = tail.windows(2).filter(|w| w[1].1 > 1.1 * w[0].1).map(|w| format!("N = {}", w[1].0)).collect();
            art.judge("ratio_bounded", rises.is_empty(), if rises.is_empty() { "non-increasing beyond N = 32 within 10%".into() } else { rises.join(", ") });
        }
    }
    art.tables.push(("counterexample".into(), t));
    art.tables.push(("slopes".into(), slopes));
    art.plots.push(PlotSpec { table: "counterexample".into(), x: "N".into(), y: "avg_norm".into(), log_axes: true });
    art.plots.push(PlotSpec { table: "counterexample".into(), x: "N".into(), y: "ratio".into(), log_axes: true });
    Ok(art)
}

// ---------------------------------------------------------------- operators

/// `c'` in `T* ≤ c'M + T•` for the reciprocal kernel on a dyadic lattice.
pub const DOMINATION_BOUND: f64 = 8.0;

/// Dilation parameters of the maximal scan.
pub const SCAN_ALPHAS: [f64; 3] = [-1.0, 0.5, 2.0];

fn maximal(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let pr = &cfg.params;
    let (r, p, q) = (pr.r.unwrap_or(1.0), pr.p.unwrap_or(2.0), pr.q.unwrap_or(2.0));
    let trials = pr.trials.unwrap_or(8);
    let grid = window_grid(cfg, (-16.0, 16.0), 8)?;
    let kernel = match pr.kernel.as_deref() {
        None => Kernel::reciprocal(),
        Some(k) if k.ends_with(".csv") => Kernel::from_csv(std::path::Path::new(k), 1.0)?,
        Some(k) => Kernel::by_name(k)?,
    };
    // the baseline is fitted for the default kernel
    let allowed = if pr.kernel.is_none() { baseline.constants.allowed("domination") } else { None };
    let mut t = Table::new(&["parameter", "trial", "norm", "ratio", "fitted_c", "violations"]);
    let mut worst_c = 0.0f64;
    let mut violations = 0usize;
    for (ai, &alpha) in SCAN_ALPHAS.iter().enumerate() {
        for trial in 0..trials {
            let mut g = rng::stream(cfg.seed, 61, (ai * trials + trial) as u64);
            let f = random_band_limited(grid, |xi| xi.abs() <= 1.0, &mut g)?;
            let h = random_band_limited(grid, |xi| xi.abs() <= 1.0, &mut g)?;
            let prof = operator_profile(&f, &h, &kernel, alpha)?;
            let norm = lp_norm_of(&prof.maximal, grid.h, r)?;
            let ratio = norm / (f.lp_norm(p)? * h.lp_norm(q)?);
            let c = prof.fitted_constant();
            worst_c = worst_c.max(c);
            let v = prof.domination_violations(allowed.unwrap_or(c));
            violations += v;
            t.push(vec![alpha.into(), trial.into(), norm.into(), ratio.into(), c.into(), v.into()]);
        }
    }
    if pr.kernel.is_none() {
        art.fitted.absorb("domination", worst_c);
        // each truncation pair sits within a factor 2 of dyadic lattice points,
        // and each of the two gaps costs at most 4M for |K(y)| = 1/|y|
        art.judge("domination_derived", worst_c <= DOMINATION_BOUND, format!("fitted c' = {worst_c:.4} ≤ {DOMINATION_BOUND}"));
    }
    art.judge(
        "domination",
        violations == 0,
        format!("T* ≤ c'M + T• with c' = {:?}: {violations} violations, fitted c' = {worst_c:.4}", allowed),
    );

    // constants are averaged exactly
    let one = SampledFunction::from_real(grid, |_| 1.0);
    let m = bilinear_maximal(&one, &one, -1.0, &dyadic_lattice(grid.h, grid.length() / 4.0))?;
    let dev = m.values.iter().map(|v| (v.re - 1.0).abs() + v.im.abs()).fold(0.0, f64::max);
    art.judge("maximal_of_constants", dev == 0.0, format!("max |M(1,1) - 1| = {dev:e}"));

    // even inputs against an odd kernel vanish at the origin
    let k0 = ((0.0 - grid.x0) / grid.h).round() as usize;
    let kernel = Kernel::reciprocal();
    let fe = SampledFunction::from_real(grid, |x| (-x * x).exp());
    let ge = SampledFunction::from_real(grid, |x| (-x * x / 2.0).exp() * x.cos());
    let mut odd = 0.0f64;
    for (eps, delta) in [(0.25, 1.0), (0.5, 4.0), (0.125, 2.0)] {
        let v = truncated_bilinear_singular(&fe, &ge, &kernel, -1.0, eps, delta)?;
        odd = odd.max(v.values[k0].norm());
    }
    art.judge("odd_symmetry_zero", odd < 1e-8, format!("max |T(f,g)(0)| = {odd:e}"));
    art.tables.push(("maximal".into(), t));
    Ok(art)
}

/// Separation exponent `j0` and number of scales in the Bourgain scan.
pub const BOURGAIN_J0: i32 = 3;
pub const BOURGAIN_SCALES: i32 = 4;

fn bourgain(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let pr = &cfg.params;
    let ls = pr.l.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64]);
    let trials = pr.trials.unwrap_or(100);
    let grid = window_grid(cfg, (-32.0, 32.0), 16)?;
    let nyquist = 0.5 / grid.h;
    let step = (-(BOURGAIN_J0 as f64)).exp2();
    // lattice of candidate basepoints, kept a separation radius inside the band
    let lo = (-(nyquist - 2.0 * step) / step).ceil() as i64;
    let hi = ((nyquist - 2.0 * step) / step).floor() as i64;
    let lattice: Vec<f64> = (lo..=hi).map(|k| k as f64 * step).collect();
    let js: Vec<i32> = (BOURGAIN_J0..BOURGAIN_J0 + BOURGAIN_SCALES).collect();
    let mut t = Table::new(&["parameter", "norm", "ratio"]);
    let mut norms = Vec::new();
    for &l in &ls {
        if l == 0 || l > lattice.len() {
            return Err(LabError::invalid("L", format!("{l} outside 1..={}", lattice.len())));
        }
        let mut g = rng::stream(cfg.seed, 51, l as u64);
        let points: Vec<f64> = if l == 1 { vec![0.0] } else { sample(&mut g, lattice.len(), l).into_iter().map(|i| lattice[i]).collect() };
        let bp = Basepoints::new(points, BOURGAIN_J0)?;
        let per = par::map_range(trials, |i| -> Result<f64> {
            let mut gi = rng::stream(cfg.seed, 52, (l * trials + i) as u64);
            let f = random_band_limited(grid, |xi| bp.in_neighbourhood(xi, BOURGAIN_J0), &mut gi)?;
            lp_norm_of(&bourgain_maximal(&f, &bp, &js)?, grid.h, 2.0)
        });
        let worst = per.into_iter().collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max);
        norms.push(worst);
        t.push(vec![l.into(), worst.into(), (worst / (1.0 + (l as f64).ln()).powi(3)).into()]);
    }
    if ls.len() > 1 {
        let xs: Vec<f64> = ls.iter().map(|&l| l as f64).collect();
        let s = loglog_slope(&xs, &norms);
        art.judge("growth_exponent", s <= 0.2, format!("fitted exponent {s:.4}, required ≤ 0.2"));
    }
    if let Some(i) = ls.iter().position(|&l| l == 1) {
        art.fitted.absorb("bourgain_single", norms[i]);
        match baseline.get("bourgain_single") {
            Some(b) => {
                let dev = (norms[i] - b).abs() / b;
                art.judge("single_point", dev <= 0.10, format!("L = 1 norm {:.4} vs calibrated {b:.4} ({:.2}%)", norms[i], 100.0 * dev));
            }
            None => art.log.push("no calibrated L = 1 constant".into()),
        }
    }
    art.tables.push(("bourgain".into(), t));
    art.plots.push(PlotSpec { table: "bourgain".into(), x: "parameter".into(), y: "norm".into(), log_axes: true });
    Ok(art)
}

// ---------------------------------------------------------------- Rademacher–Menschov

/// Seeds per `J` and family in `rm-check`.
pub const RM_SEEDS: usize = 20;

fn rm(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let js = cfg.params.j.clone().unwrap_or_else(|| vec![4, 16, 64, 128]);
    let trials = cfg.params.trials.unwrap_or(64).max(32);
    let mut t = Table::new(&["J", "family", "seed", "b_est", "lhs", "ratio", "blocked_rhs", "exhaustive"]);
    let mut worst = 0.0f64;
    let mut blocked_worst = 0.0f64;
    for &j in &js {
        let step = ((j as f64).sqrt().ceil() as usize).max(1);
        let mut blocks: Vec<usize> = (0..j).step_by(step).collect();
        blocks.push(j);
        for family in ["orthonormal", "point-mass", "random-frame"] {
            for i in 0..RM_SEEDS {
                let s = rng::derive(cfg.seed, 24, (j * RM_SEEDS + i) as u64);
                let fs = match family {
                    "orthonormal" => random_orthonormal(j, 2 * j, s)?,
                    "point-mass" => point_masses(j),
                    _ => random_frame(j, j, s),
                };
                let rep = rm_maximal_check(&fs, 1.0, trials, s, Some(&blocks))?;
                let brhs = rep.blocked.as_ref().map_or(f64::NAN, |b| b.rhs);
                worst = worst.max(rep.ratio);
                blocked_worst = blocked_worst.max(rep.lhs / brhs);
                t.push(vec![j.into(), family.into(), s.into(), rep.b_est.into(), rep.lhs.into(), rep.ratio.into(), brhs.into(), rep.exhaustive.into()]);
            }
        }
    }
    art.judge("ratio", worst <= 2.0, format!("max lhs/((1 + ln J) B_est) = {worst:.4}, required ≤ 2"));
    art.judge("blocked_ratio", blocked_worst <= 2.0, format!("max lhs / blocked bound = {blocked_worst:.4}, required ≤ 2"));
    let exact = rm_maximal_check(&point_masses(4), 1.0, trials, cfg.seed, None)?;
    let expected = 2.0 / ((1.0 + 4f64.ln()) * 2.0);
    art.judge(
        "point_mass_exhaustive",
        exact.exhaustive && exact.b_est == 2.0 && exact.lhs == 2.0 && exact.ratio == expected,
        format!("J = 4: B_est = {}, lhs = {}, ratio = {} vs {expected}", exact.b_est, exact.lhs, exact.ratio),
    );
    art.tables.push(("rm".into(), t));
    Ok(art)
}

// ---------------------------------------------------------------- grid lemmas

/// Random dyadic intervals in `[-64, 64)` with levels in `-3..=3`: a grid
/// that also satisfies the enlargement hypothesis.
pub fn random_dyadic_grid(r: &mut impl Rng, max_count: usize) -> Vec<Interval> {
    let count = r.gen_range(1..=max_count);
    let mut out: Vec<Interval> = (0..count)
        .map(|_| {
            let level = r.gen_range(-3i32..=3);
            let len = (level as f64).exp2();
            let slots = (128.0 / len) as i64;
            Interval { left: -64.0 + r.gen_range(0..slots) as f64 * len, length: len }
        })
        .collect();
    out.sort_by(crate::intervals::canonical_cmp);
    out.dedup();
    out
}

/// Disjoint dyadic intervals of levels `-3..=3` tiling `[-64, 64)`, shrinking
/// towards the origin from both sides. Every scale sits next to the origin,
/// which makes `Σ (M1_I(0))²` as large as the level range allows.
pub fn whitney_grid() -> Vec<Interval> {
    let mut right = vec![Interval { left: 0.0, length: 0.125 }];
    let mut at: f64 = 0.125;
    while at < 64.0 {
        let length = at.min(8.0);
        right.push(Interval { left: at, length });
        at += length;
    }
    let mut items: Vec<Interval> = right.iter().map(|iv| Interval { left: -iv.right(), length: iv.length }).collect();
    items.extend(right);
    items.sort_by(crate::intervals::canonical_cmp);
    items
}

/// Random evaluation points of the square-sum check.
pub const SEPARATION_POINTS: usize = 1000;

fn grid_lemmas(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let trials = cfg.params.trials.unwrap_or(100);
    let n = cfg.params.mu.unwrap_or(2);
    let mut en = Table::new(&["input", "A", "intervals", "classes", "class_bound", "containment", "nesting"]);
    let mut sep = Table::new(&["input", "intervals", "D", "N_inf", "N_l1", "flat_measure", "flat_bound", "square_sup", "required_c"]);
    let (mut en_fail, mut flat_fail) = (Vec::new(), Vec::new());
    let mut worst = 0.0f64;
    let inputs = (0..trials).map(|t| (t.to_string(), t)).chain([("whitney".to_string(), trials)]);
    for (label, trial) in inputs {
        let mut g = rng::stream(cfg.seed, 71, trial as u64);
        let items = if trial < trials { random_dyadic_grid(&mut g, 64) } else { whitney_grid() };
        let a = cfg.params.a.unwrap_or([2.0, 4.0, 8.0][trial % 3]);
        let e = enlarge_to_grids(&items, a)?;
        let bound = (4.0 * a * a) as usize;
        let (cont, nest) = (e.containment_ok(a), e.classes_nest());
        if !(cont && nest && e.class_count <= bound) {
            en_fail.push(label.clone());
        }
        en.push(vec![label.as_str().into(), a.into(), items.len().into(), e.class_count.into(), bound.into(), cont.into(), nest.into()]);

        let n_inf = counting_linf(&items) as f64;
        let d = cfg.params.d.unwrap_or(2.0 * n_inf);
        let s = separate_grid(&items, n, d, 1.0)?;
        let fb = s.flat_bound(n, d);
        if !(s.flat_measure <= fb) {
            flat_fail.push(label.clone());
        }
        let pts: Vec<f64> = (0..SEPARATION_POINTS).map(|_| g.gen_range(-80.0..80.0)).collect();
        let sq = s.sharp_square_sup(&pts);
        let c = sq / d.powi(3);
        worst = worst.max(c);
        sep.push(vec![
            label.as_str().into(),
            items.len().into(),
            d.into(),
            n_inf.into(),
            counting_l1(&items).into(),
            s.flat_measure.into(),
            fb.into(),
            sq.into(),
            c.into(),
        ]);
    }
    let trials = trials + 1;
    art.judge("enlargement", en_fail.is_empty(), format!("{} of {trials} inputs fail containment, nesting or the 4A² class bound", en_fail.len()));
    art.judge("flat_measure", flat_fail.is_empty(), format!("{} of {trials} grids exceed 5 D^-n ‖N‖₁", flat_fail.len()));
    art.fitted.absorb("separation", worst);
    match baseline.get("separation") {
        Some(b) => {
            let dev = (worst - b).abs() / b;
            art.judge("square_sum", worst <= b * 1.05, format!("sup Σ(M1_I)² / D³ = {worst:.5}, baseline C_n = {b:.5}"));
            art.judge("separation_drift", dev < 0.05, format!("fitted C_n {worst:.5} vs baseline {b:.5} ({:.2}%)", 100.0 * dev));
        }
        None => art.log.push(format!("no baseline C_n; fitted {worst}")),
    }
    art.tables.push(("enlarge".into(), en));
    art.tables.push(("separate".into(), sep));
    Ok(art)
}

// ---------------------------------------------------------------- pipeline

/// Depth-first `(path, report)` pairs.
pub fn flatten(report: &SplitReport) -> Vec<(String, &SplitReport)> {
    fn walk<'a>(r: &'a SplitReport, path: String, out: &mut Vec<(String, &'a SplitReport)>) {
        for (i, c) in r.children.iter().enumerate() {
            walk(c, format!("{path}/{}[{i}]", c.stage), out);
        }
        out.insert(0, (path, r));
    }
    let mut out = Vec::new();
    walk(report, report.stage.clone(), &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// A family over an arbitrary system: the window covers every packet with margin.
pub fn family_for(sys: TileSystem, seed: u64) -> Result<Family> {
    if sys.is_empty() {
        return Err(LabError::invalid("system", "no tiles"));
    }
    let lo = sys.tiles.iter().map(|s| s.space.left).fold(f64::INFINITY, f64::min);
    let hi = sys.tiles.iter().map(|s| s.space.right()).fold(f64::NEG_INFINITY, f64::max);
    let shortest = sys.tiles.iter().map(|s| s.space.length).fold(f64::INFINITY, f64::min);
    let pad = hi - lo;
    let per_unit = ((16.0 / shortest).ceil() as usize).next_power_of_two();
    let grid = Grid::window(lo - pad, hi + pad, per_unit)?;
    let signs = rng::signs(&mut rng::stream(seed, 32, 0), sys.len());
    Family::build(sys, &BaseBump::default(), grid, signs)
}

fn pipeline(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let pr = &cfg.params;
    let custom = pr.system.is_some() || pr.a.is_some() || pr.mu.is_some() || pr.d.is_some();
    let base = match &pr.system {
        Some(_) => SplitParams::default(),
        None => corpus_params(),
    };
    let params = SplitParams {
        a: pr.a.unwrap_or(base.a),
        mu: pr.mu.unwrap_or(base.mu),
        d: pr.d.or(base.d),
        // fitted constants belong to the corpus parameters
        constants: if custom { FittedConstants::default() } else { baseline.constants.clone() },
        ..base
    };
    if custom {
        art.log.push("custom system or parameters: bounds are fitted, not compared with the baseline".into());
    }
    let runs: Vec<(String, Result<SplitReport>)> = match &pr.system {
        Some(path) => {
            let sys: TileSystem = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            vec![("system".into(), family_for(sys, cfg.seed).and_then(|fam| run_family(&fam, cfg.seed, &params)))]
        }
        None => par::map_range(TEMPLATE_COUNT, |i| {
            let r = corpus_family(i, cfg.seed).and_then(|fam| run_family(&fam, rng::derive(cfg.seed, 33, i as u64), &params));
            (format!("template_{i}"), r)
        }),
    };
    let mut stages = Table::new(&["system", "path", "stage", "sharp", "flat", "flat_measure", "lhs_norm", "rhs_bound", "pass"]);
    let mut bounds = Table::new(&["system", "path", "name", "lhs", "form", "required", "allowed", "pass"]);
    let mut idents = Table::new(&["system", "path", "name", "evaluations", "failures"]);
    let (mut ident_fail, mut ident_evals, mut structure_fail, mut restriction) = (Vec::new(), 0usize, Vec::new(), 0.0f64);
    let mut all_pass = true;
    for (name, rep) in runs {
        let rep = rep?;
        all_pass &= rep.pass;
        rep.collect_constants(&mut art.fitted);
        for (path, r) in flatten(&rep) {
            stages.push(vec![
                name.as_str().into(),
                path.as_str().into(),
                r.stage.as_str().into(),
                r.sharp.len().into(),
                r.flat.len().into(),
                r.flat_measure.into(),
                r.lhs_norm.into(),
                r.rhs_bound.into(),
                r.pass.into(),
            ]);
            for b in &r.bounds {
                bounds.push(vec![
                    name.as_str().into(),
                    path.as_str().into(),
                    b.name.as_str().into(),
                    b.lhs.into(),
                    b.form.into(),
                    b.required.into(),
                    b.allowed.map_or(Cell::Text(String::new()), Cell::Num),
                    b.pass.into(),
                ]);
            }
            for i in &r.identities {
                idents.push(vec![name.as_str().into(), path.as_str().into(), i.name.as_str().into(), i.evaluations.into(), i.failures.into()]);
                if i.name != "restriction" {
                    ident_evals += i.evaluations;
                    if !i.pass() {
                        ident_fail.push(format!("{name} {path} {}: {:?}", i.name, i.witness));
                    }
                }
            }
            if let Some(&e) = r.components.get("restriction_error") {
                restriction = restriction.max(e);
            }
            for c in r.checks.iter().filter(|c| !c.pass) {
                structure_fail.push(format!("{name} {path} {}", c.name));
            }
        }
        art.reports.push((name, serde_json::to_value(&rep)?));
    }
    art.judge(
        "exact_identities",
        ident_fail.is_empty() && ident_evals > 0,
        if ident_fail.is_empty() { format!("{ident_evals} evaluations, zero failures") } else { ident_fail.join("; ") },
    );
    art.judge("restriction_identity", restriction <= 1e-6, format!("max relative restriction error {restriction:e}"));
    art.judge(
        "structure",
        structure_fail.is_empty(),
        if structure_fail.is_empty() { "every structural check passes".into() } else { structure_fail.join("; ") },
    );
    if !custom {
        let flat = art.fitted.0.get("main_flat").copied().unwrap_or(0.0);
        match baseline.get("main_flat") {
            Some(b) => {
                let dev = (flat - b).abs() / b;
                art.judge("flat_constant", dev < 0.05, format!("fitted {flat:.5} vs baseline {b:.5} ({:.2}%)", 100.0 * dev));
            }
            None => art.log.push("no baseline for main_flat".into()),
        }
        let sigma = art.fitted.0.get("main_sigma").copied().unwrap_or(0.0);
        if let Some(b) = baseline.get("main_sigma") {
            art.judge("sigma_bound", sigma <= b * 1.05, format!("required C_μ {sigma:.5}, baseline {b:.5}"));
        }
    }
    let over: Vec<String> = (0..bounds.rows.len())
        .filter(|&k| bounds.rows[k][7] == Cell::Flag(false))
        .map(|k| format!("{:?} {:?}", bounds.rows[k][0], bounds.rows[k][2]))
        .collect();
    art.judge("bounds", over.is_empty(), format!("{} of {} bounds above the baseline {}", over.len(), bounds.rows.len(), over.join(", ")));
    art.judge("reports", all_pass, if all_pass { "every split report passes" } else { "a split report failed" });
    art.tables.push(("stages".into(), stages));
    art.tables.push(("bounds".into(), bounds));
    art.tables.push(("identities".into(), idents));
    Ok(art)
}

// ---------------------------------------------------------------- packets

/// Largest decay order fitted by `packets-validate`.
pub const DECAY_ORDERS: u32 = 6;

fn packets(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut cols: Vec<String> = ["system", "packets", "norm_deviation", "leakage", "area_ratio", "orthogonality", "orthogonal_pairs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..=DECAY_ORDERS).map(|m| format!("C_{m}")));
    let mut t = Table { columns: cols, rows: Vec::new() };
    let bump = BaseBump::default();
    let mut systems: Vec<(String, TileSystem, Grid)> =
        (0..TEMPLATE_COUNT).map(|i| Ok((format!("template_{i}"), corpus_family(i, cfg.seed)?.system, crate::decomposition::synth::corpus_grid()))).collect::<Result<_>>()?;
    let n = 8;
    systems.push(("counterexample_8".into(), counterexample_system(n), Grid::window(-32.0, 32.0, counterexample_resolution(n))?));
    let (mut worst_norm, mut worst_leak, mut worst_orth, mut finite) = (0.0f64, 0.0f64, 0.0f64, true);
    for (name, sys, grid) in systems {
        // components shared between tri-tiles give a single packet
        let mut tiles: Vec<Tile> = Vec::new();
        for t in sys.tiles.iter().flat_map(|s| (0..3).map(|i| s.component(i))) {
            if !tiles.contains(&t) {
                tiles.push(t);
            }
        }
        let mut ps = make_wave_packets(&tiles, &bump, grid, &sys.affine)?;
        orthogonalize(&mut ps)?;
        let rep = validate_adapted(&ps, DECAY_ORDERS, &sys.affine)?;
        worst_norm = worst_norm.max(rep.norm_deviation);
        worst_leak = worst_leak.max(rep.leakage);
        worst_orth = worst_orth.max(rep.orthogonality);
        finite &= rep.decay_constants.iter().all(|c| c.is_finite());
        let mut row: Vec<Cell> = vec![
            name.into(),
            ps.len().into(),
            rep.norm_deviation.into(),
            rep.leakage.into(),
            rep.area_ratio.into(),
            rep.orthogonality.into(),
            rep.orthogonal_pairs.into(),
        ];
        row.extend(rep.decay_constants.iter().map(|&c| Cell::Num(c)));
        t.push(row);
    }
    art.judge("normalisation", worst_norm <= 1e-9, format!("max |‖φ‖₂ - 1| = {worst_norm:e}"));
    art.judge("frequency_support", worst_leak < 1e-8, format!("max leakage {worst_leak:e}"));
    art.judge("decay_constants", finite, format!("C_0..C_{DECAY_ORDERS} finite"));
    art.judge("orthogonality", worst_orth < 1e-6, format!("max same-column pairing {worst_orth:e}"));
    art.tables.push(("packets".into(), t));
    art.reports.push(("summary".into(), json!({ "norm_deviation": worst_norm, "leakage": worst_leak, "orthogonality": worst_orth })));
    Ok(art)
}
