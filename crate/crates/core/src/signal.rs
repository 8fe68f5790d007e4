//! Complex samples on a uniform grid, rectangle-rule norms, the Fourier
//! transform `f̂(ξ) = ∫ e(-xξ) f(x) dx` with `e(x) = exp(2πix)`, and a
//! brute-force Hardy–Littlewood maximal operator.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::par;

/// Samples per unit length used by the counterexample runs.
pub const DEFAULT_RESOLUTION: usize = 4096;
/// Default sampling window `[-32, 32)`.
pub const DEFAULT_WINDOW: (f64, f64) = (-32.0, 32.0);

/// `e(t) = exp(2πit)`, with `t` reduced mod 1 first.
pub fn e(t: f64) -> Complex64 {
    let r = t - t.round();
    Complex64::from_polar(1.0, TAU * r)
}

/// A uniform sampling grid `x_k = x0 + k h`, `k < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x0: f64, h: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::invalid("n", "grid needs at least one sample"));
        }
        if !(h > 0.0) || !h.is_finite() || !x0.is_finite() {
            return Err(LabError::invalid("h", format!("spacing must be positive, got {h}")));
        }
        Ok(Grid { x0, h, n })
    }

    /// Grid covering `[a, b)` with `per_unit` samples per unit length.
    pub fn window(a: f64, b: f64, per_unit: usize) -> Result<Self> {
        let n = ((b - a) * per_unit as f64).round() as usize;
        Grid::new(a, 1.0 / per_unit as f64, n)
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.x0 + self.length()
    }

    /// Spacing of the dual frequency grid.
    pub fn dxi(&self) -> f64 {
        1.0 / self.length()
    }

    /// Lowest frequency index of the centered dual grid.
    pub fn min_freq_index(&self) -> i64 {
        -((self.n / 2) as i64)
    }

    /// Frequency `ξ_m` for the `j`-th entry (ascending order) of the dual grid.
    pub fn freq(&self, j: usize) -> f64 {
        (self.min_freq_index() + j as i64) as f64 * self.dxi()
    }

    pub fn freq_grid(&self) -> Grid {
        Grid { x0: self.freq(0), h: self.dxi(), n: self.n }
    }

    /// Ascending position of the frequency bin nearest `xi`, if inside the band.
    pub fn freq_position(&self, xi: f64) -> Option<usize> {
        let j = (xi / self.dxi()).round() as i64 - self.min_freq_index();
        (0..self.n as i64).contains(&j).then_some(j as usize)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(LabError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Complex samples `values[k] ≈ f(x0 + k h)` on `[x0, x0 + n h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(LabError::invalid(
                "values",
                format!("expected {} samples, got {}", grid.n, values.len()),
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LabError::invalid("values", "samples must be finite"));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction { grid, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64 + Sync + Send) -> Self {
        let values = par::map_range(grid.n, |k| f(grid.x(k)));
        SampledFunction { grid, values }
    }

    pub fn from_real(grid: Grid, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        SampledFunction::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scale(&self, c: Complex64) -> SampledFunction {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> SampledFunction {
        SampledFunction { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &SampledFunction) -> Result<SampledFunction> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(SampledFunction { grid: self.grid, values })
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &SampledFunction) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Pointwise product with `e(λx)`.
    pub fn modulate(&self, lambda: f64) -> SampledFunction {
        let g = self.grid;
        let values =
            self.values.iter().enumerate().map(|(k, &v)| v * e(lambda * g.x(k))).collect();
        SampledFunction { grid: g, values }
    }

    /// `(h Σ |f_k|^t)^{1/t}`, or `max |f_k|` for `t = ∞`.
    pub fn lp_norm(&self, t: f64) -> Result<f64> {
        lp_norm_of(&self.abs(), self.grid.h, t)
    }

    /// `⟨self, g⟩ = h Σ f_k conj(g_k)`.
    pub fn inner_product(&self, g: &SampledFunction) -> Result<Complex64> {
        self.grid.check_same(&g.grid)?;
        Ok(inner_product_raw(&self.values, &g.values, self.grid.h))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "re", "im"]).map_err(csv_err)?;
        for (k, v) in self.values.iter().enumerate() {
            wr.write_record([
                self.grid.x(k).to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the `x,re,im` form; the grid is recovered from the first two abscissae.
    pub fn read_csv<R: Read>(r: R) -> Result<SampledFunction> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "re", "im"] {
            return Err(LabError::invalid("csv", "header must be x,re,im"));
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let p = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| LabError::invalid("csv", e.to_string()))
            };
            xs.push(p(0)?);
            values.push(Complex64::new(p(1)?, p(2)?));
        }
        if xs.is_empty() {
            return Err(LabError::invalid("csv", "no samples"));
        }
        let h = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        SampledFunction::new(Grid::new(xs[0], h, xs.len())?, values)
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::invalid("csv", e.to_string())
}

pub fn inner_product_raw(f: &[Complex64], g: &[Complex64], h: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        acc += a * b.conj();
    }
    acc * h
}

/// Rectangle-rule `L^t` (quasi-)norm of nonnegative samples.
pub fn lp_norm_of(abs_values: &[f64], h: f64, t: f64) -> Result<f64> {
    if t.is_infinite() && t > 0.0 {
        return Ok(abs_values.iter().fold(0.0, |m, &v| m.max(v)));
    }
    if !(t > 0.0) {
        return Err(LabError::invalid("t", format!("exponent must be positive, got {t}")));
    }
    let s: f64 = abs_values.iter().map(|&v| v.powf(t)).sum();
    Ok((h * s).powf(1.0 / t))
}

/// Discrete realization of `f̂(ξ) = ∫ e(-xξ) f(x) dx` on the centered dual grid.
pub fn fourier_transform(f: &SampledFunction) -> SampledFunction {
    let g = f.grid;
    let n = g.n;
    let mut buf = f.values.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let fg = g.freq_grid();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, o) in out.iter_mut().enumerate() {
        let m = g.min_freq_index() + j as i64;
        let bin = m.rem_euclid(n as i64) as usize;
        *o = buf[bin] * g.h * e(-g.x0 * fg.x(j));
    }
    SampledFunction { grid: fg, values: out }
}

/// Inverse of [`fourier_transform`]; `space` is the grid the result lives on.
pub fn inverse_fourier_transform(spectrum: &SampledFunction, space: Grid) -> Result<SampledFunction> {
    space.freq_grid().check_same(&spectrum.grid)?;
    let n = space.n;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let dxi = space.dxi();
    for (j, &v) in spectrum.values.iter().enumerate() {
        let m = space.min_freq_index() + j as i64;
        let bin = m.rem_euclid(n as i64) as usize;
        buf[bin] = v * dxi * e(space.x0 * spectrum.grid.x(j));
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    Ok(SampledFunction { grid: space, values: buf })
}

/// Uncentered maximal function over sample-aligned windows:
/// `Mf(x_k) = max_{a ≤ k ≤ b} (1/(b-a+1)) Σ_{a..=b} |f_i|`, O(n²).
pub fn hl_maximal(f: &SampledFunction) -> Vec<f64> {
    hl_maximal_abs(&f.abs())
}

pub fn hl_maximal_abs(abs: &[f64]) -> Vec<f64> {
    let n = abs.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + abs[i];
    }
    // For a fixed left end `a`, g_a(k) = max_{b ≥ k} avg(a, b) is a suffix max;
    // then Mf(k) = max_{a ≤ k} g_a(k).
    let chunks = 64.min(n.max(1));
    let per = n.div_ceil(chunks);
    let partial = par::map_range(chunks, |c| {
        let mut best = vec![0.0f64; n];
        let mut suffix = vec![0.0f64; n];
        for a in (c * per)..((c + 1) * per).min(n) {
            let mut run = f64::NEG_INFINITY;
            for b in (a..n).rev() {
                let avg = (prefix[b + 1] - prefix[a]) / (b + 1 - a) as f64;
                run = run.max(avg);
                suffix[b] = run;
            }
            for k in a..n {
                best[k] = best[k].max(suffix[k]);
            }
        }
        best
    });
    let mut out = vec![0.0f64; n];
    for p in partial {
        for (o, v) in out.iter_mut().zip(p) {
            *o = o.max(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(x: f64) -> f64 {
        (-x * x).exp()
    }

    #[test]
    fn constant_norm() {
        let g = Grid::window(0.0, 1.0, 1000).unwrap();
        let f = SampledFunction::from_real(g, |_| 1.0);
        assert!((f.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((f.scale(Complex64::new(2.0, 0.0)).lp_norm(3.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(f.lp_norm(0.0).is_err());
        assert!(f.lp_norm(-1.0).is_err());
        assert_eq!(f.lp_norm(f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn smooth_bump_norm_matches_fine_quadrature() {
        let coarse = SampledFunction::from_real(Grid::window(-8.0, 8.0, 64).unwrap(), bump);
        let fine = SampledFunction::from_real(Grid::window(-8.0, 8.0, 640).unwrap(), bump);
        let exact = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((fine.lp_norm(2.0).unwrap() - exact).abs() < 1e-9);
        assert!((coarse.lp_norm(2.0).unwrap() - fine.lp_norm(2.0).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn characters_are_orthogonal() {
        let g = Grid::new(0.0, 1.0 / 1024.0, 1024).unwrap();
        let f = SampledFunction::from_fn(g, |x| e(3.0 * x));
        let h = SampledFunction::from_fn(g, |x| e(7.0 * x));
        assert!(f.inner_product(&h).unwrap().norm() < 1e-10);
        let ff = f.inner_product(&f).unwrap();
        assert!((ff.re - f.lp_norm(2.0).unwrap().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = SampledFunction::zeros(Grid::new(0.0, 0.1, 10).unwrap());
        let b = SampledFunction::zeros(Grid::new(0.0, 0.1, 11).unwrap());
        assert!(matches!(a.inner_product(&b), Err(LabError::GridMismatch(_))));
    }

    #[test]
    fn transform_round_trip_and_parseval() {
        let g = Grid::window(-4.0, 4.0, 32).unwrap();
        let f = SampledFunction::from_fn(g, |x| Complex64::new(bump(x), 0.3 * x * bump(x)));
        let fh = fourier_transform(&f);
        let back = inverse_fourier_transform(&fh, g).unwrap();
        let err = f.values.iter().zip(&back.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert!((f.lp_norm(2.0).unwrap() - fh.lp_norm(2.0).unwrap()).abs() < 1e-9);
        // continuous transform of exp(-x²) is sqrt(π) exp(-π² ξ²)
        let wide = Grid::window(-8.0, 8.0, 32).unwrap();
        let gauss = fourier_transform(&SampledFunction::from_real(wide, |x| (-x * x).exp()));
        let j = wide.freq_position(0.5).unwrap();
        let want = std::f64::consts::PI.sqrt() * (-std::f64::consts::PI.powi(2) * 0.25).exp();
        assert!((gauss.values[j].re - want).abs() < 1e-9);
    }

    #[test]
    fn modulation_shifts_spectrum_up() {
        let g = Grid::window(-4.0, 4.0, 16).unwrap();
        let f = SampledFunction::from_real(g, bump);
        let lambda = 10.0 * g.dxi();
        let a = fourier_transform(&f);
        let b = fourier_transform(&f.modulate(lambda));
        for j in 20..(g.n - 20) {
            assert!((b.values[j + 10] - a.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn spike_has_flat_spectrum() {
        let g = Grid::new(-1.0, 0.125, 16).unwrap();
        let mut f = SampledFunction::zeros(g);
        f.values[5] = Complex64::new(1.0, 0.0);
        let fh = fourier_transform(&f);
        for v in &fh.values {
            assert!((v.norm() - g.h).abs() < 1e-15);
        }
    }

    #[test]
    fn maximal_of_constant_and_indicator() {
        let g = Grid::window(-4.0, 4.0, 16).unwrap();
        let c = SampledFunction::from_real(g, |_| 0.7);
        assert!(hl_maximal(&c).iter().all(|&v| (v - 0.7).abs() < 1e-12));
        let ind = SampledFunction::from_real(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        let m = hl_maximal(&ind);
        let k = ((2.0 - g.x0) / g.h).round() as usize;
        let closed = crate::intervals::hl_maximal_indicator(&crate::intervals::Interval::new(0.0, 1.0).unwrap(), 2.0);
        // window [0, 2] in samples holds 16 of 33 ones
        assert!((m[k] - closed).abs() <= 1.0 / 16.0);
        assert!(m.iter().zip(ind.abs()).all(|(mv, a)| *mv >= a));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(-0.5, 0.25, 4).unwrap();
        let f = SampledFunction::from_fn(g, |x| Complex64::new(x, 1.0 / 3.0));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,re,im\n"));
        let back = SampledFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }
}
