//! Sharp/flat splits of tile families with verified bounds.
//!
//! Every split returns a [`SplitReport`]: the tile partition, the exact
//! measure of the flat part, structural checks, exact pointwise identities
//! and function-norm bounds. Norm bounds follow the form `lhs ≤ C · form`
//! where `form` is the expression with unspecified constants set to one and
//! `C` is fitted on a calibration corpus.

pub mod master;
pub mod normal;
pub mod rm;
pub mod separated;
pub mod shallow;
pub mod stitch;
pub mod synth;
pub mod uniform;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::intervals::{Interval, IntervalUnion};
use crate::model_sum::{linear_combination, truncated_sup};
use crate::packets::{make_wave_packets, orthogonalize, BaseBump};
use crate::par;
use crate::rng;
use crate::signal::{lp_norm_of, Grid, SampledFunction};
use crate::tiles::{ConditionResult, Tile, TileSystem};

/// Allowed relative drift of a fitted constant above its baseline.
pub const DRIFT_TOLERANCE: f64 = 0.05;

/// Fitted constants by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants(pub BTreeMap<String, f64>);

impl FittedConstants {
    /// Largest value a freshly measured constant may take.
    pub fn allowed(&self, name: &str) -> Option<f64> {
        self.0.get(name).map(|c| c * (1.0 + DRIFT_TOLERANCE))
    }

    /// Keeps the larger value per name.
    pub fn absorb(&mut self, name: &str, value: f64) {
        let e = self.0.entry(name.to_string()).or_insert(0.0);
        *e = e.max(value);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitParams {
    pub a: f64,
    pub mu: u32,
    /// Overrides `D = A + ‖N_S‖_∞`.
    pub d: Option<f64>,
    /// Constant in front of `D²` for level-set thresholds.
    pub base_threshold: f64,
    /// Length ratio enforced between distinct scales in the master split;
    /// `None` means `D^{4μ}`.
    pub scale_gap: Option<f64>,
    pub constants: FittedConstants,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams { a: 2.0, mu: 4, d: None, base_threshold: 1.0, scale_gap: None, constants: FittedConstants::default() }
    }
}

impl SplitParams {
    pub fn d_for(&self, sys: &TileSystem, members: &[usize]) -> f64 {
        self.d.unwrap_or(self.a + sys.counting_linf(members) as f64)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.a >= 1.0) {
            return Err(LabError::invalid("A", "must be at least 1"));
        }
        if self.mu < 2 {
            return Err(LabError::invalid("mu", "must be at least 2"));
        }
        Ok(())
    }
}

/// A tile system with first-component packets `φ_{s,1}` and signs `ε_s`.
#[derive(Debug, Clone)]
pub struct Family {
    pub system: TileSystem,
    pub packets: Vec<SampledFunction>,
    pub signs: Vec<f64>,
    pub grid: Grid,
}

/// A test function with its packet coefficients `⟨f, φ_{s,1}⟩`.
#[derive(Debug, Clone)]
pub struct Probe {
    pub f: SampledFunction,
    pub norm: f64,
    pub inner: Vec<Complex64>,
}

impl Family {
    pub fn new(system: TileSystem, packets: Vec<SampledFunction>, signs: Vec<f64>) -> Result<Self> {
        if packets.len() != system.len() || signs.len() != system.len() {
            return Err(LabError::invalid("packets", "one packet and one sign per tile required"));
        }
        if signs.iter().any(|&e| e != 1.0 && e != -1.0) {
            return Err(LabError::invalid("signs", "must be ±1"));
        }
        let grid = packets.first().map(|p| p.grid).unwrap_or(Grid { x0: 0.0, h: 1.0, n: 1 });
        for p in &packets {
            grid.check_same(&p.grid)?;
        }
        Ok(Family { system, packets, signs, grid })
    }

    /// Packets for the first components, orthogonalised per frequency column.
    pub fn build(system: TileSystem, bump: &BaseBump, grid: Grid, signs: Vec<f64>) -> Result<Self> {
        let tiles: Vec<Tile> = system.tiles.iter().map(|s| s.component(0)).collect();
        let mut ps = make_wave_packets(&tiles, bump, grid, &system.affine)?;
        orthogonalize(&mut ps)?;
        let packets = ps.into_iter().map(|p| p.f).collect();
        let mut fam = Family::new(system, packets, signs)?;
        fam.grid = grid;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    pub fn length(&self, s: usize) -> f64 {
        self.system.tiles[s].space.length
    }

    pub fn probe(&self, f: &SampledFunction) -> Result<Probe> {
        self.grid.check_same(&f.grid)?;
        let norm = f.lp_norm(2.0)?;
        let inner = par::map_range(self.len(), |s| f.inner_product(&self.packets[s]).expect("grid checked"));
        Ok(Probe { f: f.clone(), norm, inner })
    }

    fn signed(&self, members: &[usize], p: &Probe) -> (Vec<Complex64>, Vec<&SampledFunction>, Vec<f64>) {
        let coeffs = members.iter().map(|&s| p.inner[s] * self.signs[s]).collect();
        let funcs = members.iter().map(|&s| &self.packets[s]).collect();
        let lengths = members.iter().map(|&s| self.length(s)).collect();
        (coeffs, funcs, lengths)
    }

    /// `T_S f` over `members`.
    pub fn linear(&self, members: &[usize], p: &Probe) -> SampledFunction {
        let (c, f, _) = self.signed(members, p);
        linear_combination(self.grid, &c, &f)
    }

    /// `T_S^max f` over `members`.
    pub fn tmax(&self, members: &[usize], p: &Probe) -> Vec<f64> {
        let (c, f, l) = self.signed(members, p);
        truncated_sup(self.grid, &c, &f, &l)
    }

    pub fn tmax_norm(&self, members: &[usize], p: &Probe) -> f64 {
        self.l2(&self.tmax(members, p))
    }

    /// `SQ_S f`.
    pub fn square(&self, members: &[usize], p: &Probe) -> f64 {
        members.iter().map(|&s| p.inner[s].norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l2(&self, abs: &[f64]) -> f64 {
        lp_norm_of(abs, self.grid.h, 2.0).expect("finite exponent")
    }

    /// `sup_{‖f‖=1} (Σ |⟨f, φ_{s,1}⟩|²)^{1/2}` by power iteration on `f ↦ Σ ⟨f,φ_s⟩ φ_s`.
    pub fn measured_k0(&self, iterations: usize) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let all = self.system.all();
        let ones = vec![Complex64::new(1.0, 0.0); self.len()];
        let funcs: Vec<&SampledFunction> = self.packets.iter().collect();
        let mut v = linear_combination(self.grid, &ones, &funcs);
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let norm = v.lp_norm(2.0).expect("finite");
            if norm == 0.0 {
                return 0.0;
            }
            v = v.scale(Complex64::new(1.0 / norm, 0.0));
            let p = Probe { norm: 1.0, inner: par::map_range(self.len(), |s| v.inner_product(&self.packets[s]).expect("grid")), f: v.clone() };
            lambda = self.square(&all, &p).powi(2);
            v = linear_combination(self.grid, &p.inner, &funcs);
        }
        lambda.sqrt()
    }
}

/// Everything a split needs: the family, probes with their coefficients,
/// the measured `K₀` and the parameters.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub fam: &'a Family,
    pub probes: &'a [Probe],
    pub k0: f64,
    pub params: &'a SplitParams,
}

impl Context<'_> {
    /// `(‖T^max_S f‖₂, SQ_S f)` per probe, normalised by `‖f‖₂`.
    pub fn tmax_and_square(&self, members: &[usize]) -> Vec<(f64, f64)> {
        self.probes
            .iter()
            .map(|p| {
                let n = if p.norm > 0.0 { p.norm } else { 1.0 };
                (self.fam.tmax_norm(members, p) / n, self.fam.square(members, p) / n)
            })
            .collect()
    }

    /// Fits `‖T^max_S f‖ ≤ C (error + K₀ ψ SQ_S f)` over the probes.
    pub fn tmax_bound(&self, name: &str, members: &[usize], error: f64, psi_factor: f64) -> BoundCheck {
        let rows = self.tmax_and_square(members);
        BoundCheck::fit(name, rows.into_iter().map(|(l, sq)| (l, error + self.k0 * psi_factor * sq)), &self.params.constants)
    }
}

/// Unit-norm random functions whose spectra fill the band of the family,
/// followed by random packet combinations.
pub fn standard_battery(fam: &Family, random: usize, combos: usize, seed: u64) -> Result<Vec<SampledFunction>> {
    let g = fam.grid;
    let fg = g.freq_grid();
    let (lo, hi) = fam
        .system
        .tiles
        .iter()
        .map(|s| {
            let iv = fam.system.affine.image(&s.omega[0]);
            let reach = 0.5 / s.space.length;
            (iv.left.min(iv.right()) - reach, iv.left.max(iv.right()) + reach)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
    let mut out = Vec::new();
    for i in 0..random {
        let mut r = rng::stream(seed, 11, i as u64);
        let mut spec = SampledFunction::zeros(fg);
        for (k, v) in spec.values.iter_mut().enumerate() {
            let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            let xi = fg.x(k);
            if xi >= lo && xi <= hi {
                *v = Complex64::new(a, b);
            }
        }
        out.push(unit(crate::signal::inverse_fourier_transform(&spec, g)?)?);
    }
    for i in 0..combos {
        let mut r = rng::stream(seed, 12, i as u64);
        let coeffs: Vec<Complex64> = (0..fam.len()).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        let funcs: Vec<&SampledFunction> = fam.packets.iter().collect();
        out.push(unit(linear_combination(g, &coeffs, &funcs))?);
    }
    Ok(out)
}

fn unit(f: SampledFunction) -> Result<SampledFunction> {
    let n = f.lp_norm(2.0)?;
    if n == 0.0 {
        return Err(LabError::invalid("battery", "zero function"));
    }
    Ok(f.scale(Complex64::new(1.0 / n, 0.0)))
}

/// One fitted-constant bound, worst case over the probes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub form: f64,
    /// Smallest constant with `lhs ≤ C · form`.
    pub required: f64,
    pub allowed: Option<f64>,
    pub pass: bool,
}

impl BoundCheck {
    /// Worst case over `(lhs, form)` samples.
    pub fn fit(name: &str, samples: impl IntoIterator<Item = (f64, f64)>, constants: &FittedConstants) -> Self {
        let (mut lhs, mut form, mut required) = (0.0, 0.0, 0.0f64);
        for (l, f) in samples {
            let r = ratio(l, f);
            if r >= required {
                (lhs, form, required) = (l, f, r);
            }
        }
        let allowed = constants.allowed(name);
        BoundCheck { name: name.to_string(), lhs, form, required, allowed, pass: allowed.is_none_or(|a| required <= a) }
    }

    pub fn rhs(&self) -> f64 {
        self.allowed.unwrap_or(self.required) * self.form
    }
}

fn ratio(l: f64, f: f64) -> f64 {
    if l <= 0.0 {
        0.0
    } else if f > 0.0 {
        l / f
    } else {
        f64::INFINITY
    }
}

/// An identity asserted with zero tolerance at every sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub evaluations: usize,
    pub failures: usize,
    pub witness: Option<String>,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub stage: String,
    pub sharp: Vec<usize>,
    pub flat: Vec<usize>,
    pub flat_measure: f64,
    pub lhs_norm: f64,
    pub rhs_bound: f64,
    pub components: BTreeMap<String, f64>,
    pub checks: Vec<ConditionResult>,
    pub identities: Vec<IdentityCheck>,
    pub bounds: Vec<BoundCheck>,
    pub flags: Vec<String>,
    pub children: Vec<SplitReport>,
    pub pass: bool,
}

impl SplitReport {
    pub fn new(stage: &str) -> Self {
        SplitReport {
            stage: stage.to_string(),
            sharp: Vec::new(),
            flat: Vec::new(),
            flat_measure: 0.0,
            lhs_norm: 0.0,
            rhs_bound: 0.0,
            components: BTreeMap::new(),
            checks: Vec::new(),
            identities: Vec::new(),
            bounds: Vec::new(),
            flags: Vec::new(),
            children: Vec::new(),
            pass: true,
        }
    }

    pub fn check(&mut self, name: &str, witnesses: Vec<String>) {
        self.checks.push(ConditionResult { name: name.to_string(), pass: witnesses.is_empty(), witnesses });
    }

    pub fn component(&mut self, name: &str, value: f64) {
        self.components.insert(name.to_string(), value);
    }

    /// Sets the partition and its exact flat measure.
    pub fn partition(&mut self, sys: &TileSystem, mut sharp: Vec<usize>, mut flat: Vec<usize>) {
        sharp.sort_unstable();
        flat.sort_unstable();
        self.flat_measure = union_of(sys, &flat).measure();
        self.sharp = sharp;
        self.flat = flat;
    }

    /// Recomputes `pass`, `lhs_norm` and `rhs_bound` from the parts.
    pub fn finish(mut self) -> Self {
        if let Some(b) = self.bounds.first() {
            self.lhs_norm = b.lhs;
            self.rhs_bound = b.rhs();
        }
        self.pass = self.checks.iter().all(|c| c.pass)
            && self.identities.iter().all(IdentityCheck::pass)
            && self.bounds.iter().all(|b| b.pass)
            && self.children.iter().all(|c| c.pass);
        self
    }

    /// Every bound in this report and its children.
    pub fn all_bounds(&self) -> Vec<&BoundCheck> {
        let mut out: Vec<&BoundCheck> = self.bounds.iter().collect();
        for c in &self.children {
            out.extend(c.all_bounds());
        }
        out
    }

    pub fn all_identities(&self) -> Vec<&IdentityCheck> {
        let mut out: Vec<&IdentityCheck> = self.identities.iter().collect();
        for c in &self.children {
            out.extend(c.all_identities());
        }
        out
    }

    /// Names of failed checks, identities and bounds, depth first.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.checks.iter().filter(|c| !c.pass) {
            out.push(format!("{}: {} {:?}", self.stage, c.name, c.witnesses.first()));
        }
        for i in self.identities.iter().filter(|i| !i.pass()) {
            out.push(format!("{}: identity {} {:?}", self.stage, i.name, i.witness));
        }
        for b in self.bounds.iter().filter(|b| !b.pass) {
            out.push(format!("{}: bound {} needs {} > {:?}", self.stage, b.name, b.required, b.allowed));
        }
        for c in &self.children {
            out.extend(c.failures());
        }
        out
    }

    /// Folds every required constant into `into`.
    pub fn collect_constants(&self, into: &mut FittedConstants) {
        for b in self.all_bounds() {
            if b.required.is_finite() {
                into.absorb(&b.name, b.required);
            }
        }
    }
}

pub fn union_of(sys: &TileSystem, members: &[usize]) -> IntervalUnion {
    IntervalUnion::new(members.iter().map(|&s| sys.tiles[s].space))
}

/// `(1 + ln d)^j`.
pub fn psi(j: i32, d: f64) -> f64 {
    (1.0 + d.max(1.0).ln()).powi(j)
}

/// Distinct intervals in canonical order.
pub fn distinct(items: impl IntoIterator<Item = Interval>) -> Vec<Interval> {
    let mut v: Vec<Interval> = items.into_iter().collect();
    v.sort_by(crate::intervals::canonical_cmp);
    v.dedup();
    v
}

/// Checks a blocked truncation identity at every sample and threshold.
///
/// `block[s]` orders the tiles into blocks, `support(s, x)` says whether the
/// term of `s` is nonzero at `x`. At each `(x, 2^n)` the set of terms
/// `{s : |I_s| ≥ 2^n}` must coincide with `⋃_{j<K} S_j ∪ {s ∈ S_K : |I_s| ≥ 2^n}`
/// (restricted to the support) for the block `K` chosen by `pick`; equal
/// index sets summed in the same order give bitwise equal sums.
pub fn blocked_identity(
    name: &str,
    grid: Grid,
    members: &[usize],
    lengths: &[f64],
    block: &[usize],
    support: impl Fn(usize, f64) -> bool + Sync,
    pick: BlockPick,
) -> IdentityCheck {
    let mut thresholds: Vec<f64> = members.iter().map(|&s| lengths[s]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let per_sample = par::map_range(grid.n, |k| {
        let x = grid.x(k);
        let live: Vec<usize> = members.iter().copied().filter(|&s| support(s, x)).collect();
        let mut fails = 0usize;
        let mut witness = None;
        for &thr in &thresholds {
            let lhs: Vec<usize> = live.iter().copied().filter(|&s| lengths[s] >= thr).collect();
            let chosen = match pick {
                BlockPick::OfSmallest => lhs
                    .iter()
                    .min_by(|&&a, &&b| lengths[a].total_cmp(&lengths[b]).then(block[a].cmp(&block[b])))
                    .map(|&s| block[s]),
                BlockPick::Deepest => lhs.iter().map(|&s| block[s]).max(),
            };
            let Some(kb) = chosen else { continue };
            let rhs: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&s| block[s] < kb || (block[s] == kb && lengths[s] >= thr))
                .collect();
            if lhs != rhs {
                fails += 1;
                witness.get_or_insert_with(|| format!("x = {x}, |I| ≥ {thr}: {lhs:?} vs {rhs:?}"));
            }
        }
        (thresholds.len(), fails, witness)
    });
    let mut out = IdentityCheck { name: name.to_string(), evaluations: 0, failures: 0, witness: None };
    for (e, f, w) in per_sample {
        out.evaluations += e;
        out.failures += f;
        if out.witness.is_none() {
            out.witness = w;
        }
    }
    out
}

/// How the block `K` is chosen in [`blocked_identity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPick {
    /// Block of the shortest contributing tile.
    OfSmallest,
    /// Deepest block with a contributing tile.
    Deepest,
}

/// `max_m` of centred averages over `2^m + 1` samples: a lower bound for the
/// maximal function in `O(n log n)`.
pub fn dyadic_maximal(abs: &[f64]) -> Vec<f64> {
    let n = abs.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + abs[i];
    }
    par::map_range(n, |k| {
        let mut best = abs[k];
        let mut r = 1usize;
        while r < n {
            let a = k.saturating_sub(r);
            let b = (k + r + 1).min(n);
            best = best.max((prefix[b] - prefix[a]) / (b - a) as f64);
            r *= 2;
        }
        best
    })
}

/// Tiles with `I_s` inside some interval of `within`.
pub fn tiles_inside(sys: &TileSystem, members: &[usize], within: &[Interval]) -> Vec<usize> {
    members.iter().copied().filter(|&s| within.iter().any(|w| sys.tiles[s].space.is_subset_of(w))).collect()
}

pub fn minus(members: &[usize], removed: &[usize]) -> Vec<usize> {
    let set: std::collections::BTreeSet<usize> = removed.iter().copied().collect();
    members.iter().copied().filter(|s| !set.contains(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_fit_takes_worst_ratio() {
        let mut c = FittedConstants::default();
        let b = BoundCheck::fit("x", [(1.0, 2.0), (3.0, 2.0), (0.0, 0.0)], &c);
        assert_eq!(b.required, 1.5);
        assert!(b.pass && b.allowed.is_none());
        c.absorb("x", 1.0);
        let b = BoundCheck::fit("x", [(3.0, 2.0)], &c);
        assert!(!b.pass);
        assert!((b.rhs() - 2.1).abs() < 1e-12);
    }

    #[test]
    fn dyadic_maximal_of_constant() {
        let m = dyadic_maximal(&[2.0; 17]);
        assert!(m.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        let spike = dyadic_maximal(&[0.0, 0.0, 4.0, 0.0, 0.0]);
        assert_eq!(spike[2], 4.0);
        assert!((spike[0] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn blocked_identity_detects_order_violation() {
        let g = Grid::new(0.0, 0.25, 8).unwrap();
        let lengths = [2.0, 1.0];
        let all = [0usize, 1];
        let ok = blocked_identity("ok", g, &all, &lengths, &[0, 1], |_, _| true, BlockPick::OfSmallest);
        assert!(ok.pass() && ok.evaluations == 16);
        // a shorter tile in the earlier block breaks the identity
        let bad = blocked_identity("bad", g, &all, &lengths, &[1, 0], |_, _| true, BlockPick::OfSmallest);
        assert!(!bad.pass());
    }
}
