//! Wave packets adapted to tiles, their validation, and stopping-time truncation.
//!
//! A packet on `ρ = I × ω` is `e(c x) |I|^{-1/2} φ((x - c(I))/|I|)` with `c` the
//! centre of `a(ω)`. It is synthesised on the frequency side, so its discrete
//! spectrum is supported exactly where the bump is.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::intervals::Interval;
use crate::par;
use crate::signal::{e, fourier_transform, inverse_fourier_transform, Grid, SampledFunction};
use crate::tiles::{Affine, Tile};

/// Minimum number of samples per spatial interval length. Separately, the
/// window should be at least `128 |I|` long so the bump spans 64 frequency
/// bins; coarser frequency sampling perturbs the normalisation near `1e-6`.
pub const MIN_SAMPLES_PER_INTERVAL: f64 = 16.0;

/// Smooth even frequency profile supported in `[-1/4, 1/4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseBump {
    /// Half-width of the frequency support.
    pub half_width: f64,
    /// Factor making the profile unit-norm in `L²(dξ)`.
    pub norm_const: f64,
}

impl Default for BaseBump {
    fn default() -> Self {
        let mut b = BaseBump { half_width: 0.25, norm_const: 1.0 };
        // composite Simpson on the support; the integrand is flat at the ends
        let m = 20_000;
        let step = 2.0 * b.half_width / m as f64;
        let mut acc = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * b.profile(-b.half_width + k as f64 * step).powi(2);
        }
        b.norm_const = 1.0 / (acc * step / 3.0).sqrt();
        b
    }
}

impl BaseBump {
    /// `φ̂(ξ)`: proportional to `exp(-1/(1 - (ξ/w)²))` inside the support.
    pub fn profile(&self, xi: f64) -> f64 {
        let t = xi / self.half_width;
        if t.abs() >= 1.0 {
            0.0
        } else {
            self.norm_const * (-1.0 / (1.0 - t * t)).exp()
        }
    }

    /// `sup |φ| = φ(0) = ∫ φ̂`, by Simpson quadrature.
    pub fn space_sup(&self) -> f64 {
        let m = 20_000;
        let step = 2.0 * self.half_width / m as f64;
        let mut acc = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.profile(-self.half_width + k as f64 * step);
        }
        acc * step / 3.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub rho: Tile,
    pub f: SampledFunction,
    /// Open interval carrying the spectrum.
    pub band: (f64, f64),
}

/// Modulation frequency of the packet on `rho`: the centre of `a(ω_ρ)`.
pub fn packet_frequency(rho: &Tile, affine: &Affine) -> f64 {
    affine.apply(rho.freq.center())
}

/// Builds the packet on `rho`, sampled on `grid`, with unit discrete `L²` norm.
pub fn make_wave_packet(rho: &Tile, bump: &BaseBump, grid: Grid, affine: &Affine) -> Result<WavePacket> {
    let len = rho.space.length;
    if len < MIN_SAMPLES_PER_INTERVAL * grid.h {
        return Err(LabError::invalid(
            "resolution",
            format!("|I| = {len} has fewer than {MIN_SAMPLES_PER_INTERVAL} samples at h = {}", grid.h),
        ));
    }
    let centre = packet_frequency(rho, affine);
    let reach = bump.half_width / len;
    let fg = grid.freq_grid();
    let (lo, hi) = (fg.x0, fg.x0 + fg.length());
    if centre - reach < lo || centre + reach >= hi {
        return Err(LabError::invalid("resolution", format!("frequency {centre} ± {reach} exceeds the sampling band")));
    }
    let ci = rho.space.center();
    let sq = len.sqrt();
    let mut spec = SampledFunction::from_fn(fg, |xi| {
        let eta = xi - centre;
        let v = bump.profile(len * eta);
        if v == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            e(-ci * eta) * (sq * v)
        }
    });
    let norm = spec.lp_norm(2.0)?;
    if norm == 0.0 {
        return Err(LabError::invalid("resolution", "packet spectrum falls between frequency samples"));
    }
    spec = spec.scale(Complex64::new(1.0 / norm, 0.0));
    let f = inverse_fourier_transform(&spec, grid)?;
    Ok(WavePacket { rho: *rho, f, band: (centre - reach, centre + reach) })
}

/// Packets for many tiles, built in parallel in input order.
pub fn make_wave_packets(tiles: &[Tile], bump: &BaseBump, grid: Grid, affine: &Affine) -> Result<Vec<WavePacket>> {
    par::map_slice(tiles, |t| make_wave_packet(t, bump, grid, affine)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedReport {
    /// `max |‖φ_ρ‖₂ - 1|`.
    pub norm_deviation: f64,
    /// `max |ρ| / min |ρ|`.
    pub area_ratio: f64,
    pub area_ok: bool,
    /// Largest fraction of spectral mass outside the 3/4-dilate of `a(ω_ρ)`.
    pub leakage: f64,
    /// Fitted decay constants `C_0..=C_{m_max}`.
    pub decay_constants: Vec<f64>,
    /// `max |⟨φ_ρ, φ_ρ'⟩|` over same-frequency, different-space pairs.
    pub orthogonality: f64,
    pub orthogonal_pairs: usize,
}

/// Checks normalisation, area comparability, frequency support, spatial
/// decay and same-frequency orthogonality of a packet family.
pub fn validate_adapted(packets: &[WavePacket], m_max: u32, affine: &Affine) -> Result<AdaptedReport> {
    if let Some(first) = packets.first() {
        for p in packets {
            first.f.grid.check_same(&p.f.grid)?;
        }
    }
    let per: Vec<(f64, f64, Vec<f64>)> = par::map_slice(packets, |p| {
        let g = p.f.grid;
        let norm_dev = (p.f.lp_norm(2.0).unwrap_or(f64::NAN) - 1.0).abs();
        let spec = fourier_transform(&p.f);
        let target = affine.image(&p.rho.freq).dilate(0.75);
        let (mut inside, mut total) = (0.0, 0.0);
        for (j, v) in spec.values.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            if target.contains(spec.grid.x(j)) {
                inside += m;
            }
        }
        let leak = if total > 0.0 { (total - inside) / total } else { 0.0 };
        let len = p.rho.space.length;
        let c = p.rho.space.center();
        let mut cm = vec![0.0f64; m_max as usize + 1];
        for (k, v) in p.f.values.iter().enumerate() {
            let amp = v.norm() * len.sqrt();
            let w = 1.0 + (g.x(k) - c).abs() / len;
            let mut acc = amp;
            for slot in cm.iter_mut() {
                *slot = slot.max(acc);
                acc *= w;
            }
        }
        (norm_dev, leak, cm)
    });
    let norm_deviation = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let leakage = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut decay_constants = vec![0.0f64; m_max as usize + 1];
    for (_, _, cm) in &per {
        for (d, c) in decay_constants.iter_mut().zip(cm) {
            *d = d.max(*c);
        }
    }
    let areas: Vec<f64> = packets.iter().map(|p| p.rho.area()).collect();
    let lo = areas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = areas.iter().copied().fold(0.0, f64::max);
    let area_ratio = if packets.is_empty() { 1.0 } else { hi / lo };

    let mut orthogonality = 0.0f64;
    let mut orthogonal_pairs = 0;
    for col in frequency_columns(packets) {
        for (a, &i) in col.iter().enumerate() {
            for &j in &col[a + 1..] {
                if packets[i].rho.space != packets[j].rho.space {
                    orthogonality = orthogonality.max(packets[i].f.inner_product(&packets[j].f)?.norm());
                    orthogonal_pairs += 1;
                }
            }
        }
    }
    Ok(AdaptedReport {
        norm_deviation,
        area_ratio,
        area_ok: area_ratio <= std::f64::consts::SQRT_2,
        leakage,
        decay_constants,
        orthogonality,
        orthogonal_pairs,
    })
}

/// Indices grouped by identical frequency interval, each column sorted by `c(I)`.
pub fn frequency_columns(packets: &[WavePacket]) -> Vec<Vec<usize>> {
    let mut cols: Vec<(Interval, Vec<usize>)> = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        match cols.iter_mut().find(|(w, _)| *w == p.rho.freq) {
            Some((_, v)) => v.push(i),
            None => cols.push((p.rho.freq, vec![i])),
        }
    }
    cols.into_iter()
        .map(|(_, mut v)| {
            v.sort_by(|&a, &b| packets[a].rho.space.center().total_cmp(&packets[b].rho.space.center()));
            v
        })
        .collect()
}

/// Gram–Schmidt within each constant-frequency column, ordered by `c(I)`.
/// Returns the largest `‖φ_new - φ_old‖₂`.
pub fn orthogonalize(packets: &mut [WavePacket]) -> Result<f64> {
    let cols = frequency_columns(packets);
    let updates: Vec<Result<Vec<(usize, SampledFunction)>>> = par::map_slice(&cols, |col| {
        let mut done: Vec<SampledFunction> = Vec::new();
        let mut out = Vec::new();
        for &i in col {
            // a repeated tile shares the packet of its first occurrence
            let seen = out.iter().find(|(j, _): &&(usize, SampledFunction)| packets[*j].rho == packets[i].rho);
            if let Some(w) = seen.map(|(_, w)| w.clone()) {
                out.push((i, w));
                continue;
            }
            let mut v = packets[i].f.clone();
            // a second sweep removes what cancellation left behind
            for _ in 0..2 {
                for u in &done {
                    let c = v.inner_product(u)?;
                    v.add_scaled(-c, u)?;
                }
            }
            // the exact result lies in the band; cancellation leaves noise outside it
            let mut spec = fourier_transform(&v);
            let (lo, hi) = packets[i].band;
            for (k, s) in spec.values.iter_mut().enumerate() {
                let xi = spec.grid.x(k);
                if !(lo < xi && xi < hi) {
                    *s = Complex64::new(0.0, 0.0);
                }
            }
            v = inverse_fourier_transform(&spec, v.grid)?;
            let n = v.lp_norm(2.0)?;
            if !(n > 1e-8) {
                return Err(LabError::Precondition(format!("packet {i} is linearly dependent on its column")));
            }
            v = v.scale(Complex64::new(1.0 / n, 0.0));
            done.push(v.clone());
            out.push((i, v));
        }
        Ok(out)
    });
    let mut perturbation = 0.0f64;
    for (i, v) in updates.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten() {
        let mut diff = v.clone();
        diff.add_scaled(Complex64::new(-1.0, 0.0), &packets[i].f)?;
        perturbation = perturbation.max(diff.lp_norm(2.0)?);
        packets[i].f = v;
    }
    Ok(perturbation)
}

/// Writes one CSV per packet plus `manifest.json` binding tiles to files.
pub fn write_packet_set(dir: &Path, packets: &[WavePacket]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    #[derive(Serialize)]
    struct Entry<'a> {
        tile: &'a Tile,
        file: String,
    }
    let mut entries = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        let file = format!("packet_{i:05}.csv");
        p.f.write_csv(std::fs::File::create(dir.join(&file))?)?;
        entries.push(Entry { tile: &p.rho, file });
    }
    let mut m = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut m, &entries)?;
    m.write_all(b"\n")?;
    Ok(())
}

/// Right-continuous dyadic step function: `σ(x) = 2^{exponents[j]}` where `j`
/// counts the breakpoints `≤ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingTime {
    pub breakpoints: Vec<f64>,
    pub exponents: Vec<i32>,
}

impl StoppingTime {
    pub fn new(breakpoints: Vec<f64>, exponents: Vec<i32>) -> Result<Self> {
        if exponents.len() != breakpoints.len() + 1 {
            return Err(LabError::invalid("exponents", "need one more piece than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(LabError::invalid("breakpoints", "must be strictly increasing"));
        }
        Ok(StoppingTime { breakpoints, exponents })
    }

    pub fn constant(exponent: i32) -> Self {
        StoppingTime { breakpoints: vec![], exponents: vec![exponent] }
    }

    pub fn exponent_at(&self, x: f64) -> i32 {
        let j = self.breakpoints.partition_point(|&b| b <= x);
        self.exponents[j]
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.exponent_at(x) as f64).exp2()
    }

    /// Whether `σ(x) ≤ scale`.
    pub fn admits(&self, x: f64, scale: f64) -> bool {
        self.value(x) <= scale
    }
}

/// `f · 1_{σ ≤ scale}`.
pub fn truncate_by_stopping_time(f: &SampledFunction, scale: f64, sigma: &StoppingTime) -> SampledFunction {
    let g = f.grid;
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| if sigma.admits(g.x(k), scale) { v } else { Complex64::new(0.0, 0.0) })
        .collect();
    SampledFunction { grid: g, values }
}
