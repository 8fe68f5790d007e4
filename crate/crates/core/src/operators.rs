//! Operators: the bilinear maximal function, truncated bilinear singular
//! integrals and their maximal forms, kernel checks, Fourier restriction to
//! neighbourhoods of basepoints with its maximal form, and the tile operators
//! `T_S`, `SQ_S`, `T_S^max`.
//!
//! Signals are treated as periodic on their window; off-grid values come from
//! linear interpolation.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::model_sum::{linear_combination, truncated_sup};
use crate::par;
use crate::signal::{e, fourier_transform, inverse_fourier_transform, Grid, SampledFunction};

/// A real kernel `K(y)` with declared smoothness order and size constant.
#[derive(Clone)]
pub struct Kernel {
    pub name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub order: u32,
    pub constant: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel").field("name", &self.name).field("order", &self.order).field("constant", &self.constant).finish()
    }
}

impl Kernel {
    pub fn new(name: &str, order: u32, constant: f64, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Kernel { name: name.to_string(), eval: Arc::new(eval), order, constant }
    }

    /// `K(y) = 1/y`.
    pub fn reciprocal() -> Self {
        Kernel::new("reciprocal", 3, 1.0, |y| 1.0 / y)
    }

    pub fn zero() -> Self {
        Kernel::new("zero", 3, 0.0, |_| 0.0)
    }

    /// `K(y) = 1/y²`, which has the wrong homogeneity.
    pub fn inverse_square() -> Self {
        Kernel::new("inverse-square", 3, 1.0, |y| 1.0 / (y * y))
    }

    /// Piecewise-linear kernel through `(y, k)` samples, zero outside their span.
    pub fn from_table(name: &str, mut points: Vec<(f64, f64)>, order: u32, constant: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(LabError::invalid("kernel", "table needs at least two rows"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Kernel::new(name, order, constant, move |y| {
            let i = points.partition_point(|p| p.0 <= y);
            if i == 0 || i == points.len() {
                return 0.0;
            }
            let (a, b) = (points[i - 1], points[i]);
            a.1 + (b.1 - a.1) * (y - a.0) / (b.0 - a.0)
        }))
    }

    /// Reads a `y,k` CSV table.
    pub fn from_csv(path: &std::path::Path, constant: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| LabError::invalid("kernel", e.to_string()))?;
        let mut pts = Vec::new();
        for rec in rdr.deserialize::<(f64, f64)>() {
            pts.push(rec.map_err(|e| LabError::invalid("kernel", e.to_string()))?);
        }
        Kernel::from_table(&path.display().to_string(), pts, 1, constant)
    }

    /// Built-in kernel by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "reciprocal" => Ok(Kernel::reciprocal()),
            "zero" => Ok(Kernel::zero()),
            "inverse-square" => Ok(Kernel::inverse_square()),
            other => Err(LabError::invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.eval)(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    /// `max |y K(y)|` over the probes.
    pub size_constant: f64,
    pub size_ok: bool,
    /// `max |y|^{n+1} |∂ⁿK(y)|` for `n = 1..=order`.
    pub derivative_constants: Vec<f64>,
    /// Whether each order stays within `C · n!`.
    pub derivative_ok: Vec<bool>,
    /// `(ξ, |p.v. ∫ e(-ξy) K(y) dy|)` samples.
    pub transform: Vec<(f64, f64)>,
    pub transform_sup: f64,
    pub transform_bounded: bool,
}

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Number of oscillation periods covered by the principal-value quadrature.
pub const PV_PERIODS: f64 = 1024.0;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Central difference of order `n` with step `s`.
fn central_difference(k: &Kernel, y: f64, n: u32, s: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(n, i) * k.eval(y + (n as f64 / 2.0 - i as f64) * s);
    }
    acc / s.powi(n as i32)
}

/// `p.v. ∫ e(-ξy) K(y) dy`, symmetrised and integrated by Gauss panels of
/// length `1/(8|ξ|)` up to `PV_PERIODS / |ξ|`.
pub fn principal_value_transform(k: &Kernel, xi: f64) -> Complex64 {
    let a = xi.abs().max(1e-12);
    let panel = 1.0 / (8.0 * a);
    let panels = (8.0 * PV_PERIODS) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * panel;
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            for y in [mid - 0.5 * panel * x, mid + 0.5 * panel * x] {
                let g = e(-xi * y) * k.eval(y) + e(xi * y) * k.eval(-y);
                acc += g * (0.5 * panel * w);
            }
        }
    }
    acc
}

/// Default probe points `±2^{m/2}`, `m = -12..=12`.
pub fn default_probes() -> Vec<f64> {
    (-12..=12).flat_map(|m| {
        let y = (m as f64 / 2.0).exp2();
        [y, -y]
    })
    .collect()
}

/// Default frequencies `±2^{m/2}`, `m = -6..=6`.
pub fn default_frequencies() -> Vec<f64> {
    (-6..=6).flat_map(|m| {
        let x = (m as f64 / 2.0).exp2();
        [x, -x]
    })
    .collect()
}

/// Checks the size, smoothness and bounded-transform conditions at probes.
pub fn validate_kernel(k: &Kernel, order: u32, probes: &[f64], frequencies: &[f64]) -> KernelReport {
    let c = k.constant;
    let size_constant = probes.iter().map(|&y| (y * k.eval(y)).abs()).fold(0.0, f64::max);
    let derivative_constants: Vec<f64> = (1..=order)
        .map(|n| {
            probes
                .iter()
                .map(|&y| y.abs().powi(n as i32 + 1) * central_difference(k, y, n, 1e-2 * y.abs()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let derivative_ok = derivative_constants
        .iter()
        .enumerate()
        .map(|(i, &d)| d <= c * factorial(i as u32 + 1) * (1.0 + 1e-2))
        .collect();
    let transform: Vec<(f64, f64)> =
        par::map_slice(frequencies, |&xi| (xi, principal_value_transform(k, xi).norm()));
    let transform_sup = transform.iter().map(|t| t.1).fold(0.0, f64::max);
    KernelReport {
        size_constant,
        size_ok: size_constant <= c * (1.0 + 1e-9),
        derivative_constants,
        derivative_ok,
        transform,
        transform_bounded: transform_sup.is_finite() && transform_sup <= 2.0 * std::f64::consts::PI * c.max(0.0) + 1e-9,
        transform_sup,
    }
}

/// `f(u)` for the periodic extension of `f`, by linear interpolation.
pub fn sample_periodic(f: &SampledFunction, u: f64) -> Complex64 {
    let g = f.grid;
    let pos = (u - g.x0) / g.h;
    let fl = pos.floor();
    let frac = pos - fl;
    let n = g.n as i64;
    let i = (fl as i64).rem_euclid(n) as usize;
    let j = (i + 1) % g.n;
    f.values[i] * (1.0 - frac) + f.values[j] * frac
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha == 0.0 || alpha == 1.0 || !alpha.is_finite() {
        return Err(LabError::invalid("alpha", "must be finite and not 0 or 1"));
    }
    Ok(())
}

/// Node spacing `h / 2^a` with `2^a ≥ max(1, |α|)`, so both factors are resolved
/// and dyadic radii `≥ h` are whole multiples of it.
pub fn node_spacing(grid: Grid, alpha: f64) -> f64 {
    let a = alpha.abs().max(1.0).log2().ceil().max(0.0);
    grid.h / a.exp2()
}

/// `f(x - α y) g(x - y)` at the nodes `±(j + ½) dy`, `j < count`.
fn node_products(f: &SampledFunction, g: &SampledFunction, alpha: f64, x: f64, dy: f64, count: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut plus = Vec::with_capacity(count);
    let mut minus = Vec::with_capacity(count);
    for j in 0..count {
        let y = (j as f64 + 0.5) * dy;
        plus.push(sample_periodic(f, x - alpha * y) * sample_periodic(g, x - y));
        minus.push(sample_periodic(f, x + alpha * y) * sample_periodic(g, x + y));
    }
    (plus, minus)
}

/// Number of nodes `(j + ½) dy` strictly below `v`.
fn nodes_below(v: f64, dy: f64, count: usize) -> usize {
    ((v / dy - 0.5).ceil().max(0.0) as usize).min(count)
}

/// `max_t (1/2t) ∫_{-t}^{t} |f(x - αy) g(x - y)| dy` at every sample.
pub fn bilinear_maximal(f: &SampledFunction, g: &SampledFunction, alpha: f64, t_values: &[f64]) -> Result<SampledFunction> {
    f.grid.check_same(&g.grid)?;
    check_alpha(alpha)?;
    if t_values.is_empty() || t_values.iter().any(|&t| !(t > 0.0)) {
        return Err(LabError::invalid("t_values", "need at least one positive radius"));
    }
    let grid = f.grid;
    let dy = node_spacing(grid, alpha);
    let counts: Vec<usize> = t_values.iter().map(|&t| ((t / dy).round() as usize).max(1)).collect();
    let total = *counts.iter().max().expect("nonempty");
    let values = par::map_range(grid.n, |k| {
        let (p, m) = node_products(f, g, alpha, grid.x(k), dy, total);
        let mut cum = vec![0.0; total + 1];
        for j in 0..total {
            cum[j + 1] = cum[j] + p[j].norm() + m[j].norm();
        }
        let best = counts.iter().map(|&c| cum[c] / (2 * c) as f64).fold(0.0, f64::max);
        Complex64::new(best, 0.0)
    });
    Ok(SampledFunction { grid, values })
}

/// `∫_{ε<|y|<δ} f(x - αy) g(x - y) K(y) dy` by midpoint nodes.
pub fn truncated_bilinear_singular(
    f: &SampledFunction,
    g: &SampledFunction,
    k: &Kernel,
    alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<SampledFunction> {
    f.grid.check_same(&g.grid)?;
    check_alpha(alpha)?;
    if !(eps > 0.0 && eps < delta) {
        return Err(LabError::invalid("eps", "need 0 < eps < delta"));
    }
    let grid = f.grid;
    let dy = node_spacing(grid, alpha);
    let count = nodes_below(delta, dy, usize::MAX);
    let lo = nodes_below(eps, dy, count);
    let weights: Vec<(f64, f64)> = (0..count).map(|j| {
        let y = (j as f64 + 0.5) * dy;
        (k.eval(y), k.eval(-y))
    }).collect();
    let values = par::map_range(grid.n, |i| {
        let (p, m) = node_products(f, g, alpha, grid.x(i), dy, count);
        (lo..count).fold(Complex64::new(0.0, 0.0), |acc, j| acc + (p[j] * weights[j].0 + m[j] * weights[j].1) * dy)
    });
    Ok(SampledFunction { grid, values })
}

/// Dyadic radii `2^k` in `[h, y_max]`.
pub fn dyadic_lattice(h: f64, y_max: f64) -> Vec<f64> {
    let lo = h.log2().ceil() as i32;
    let hi = y_max.log2().floor() as i32;
    (lo..=hi).map(|k| (k as f64).exp2()).collect()
}

/// Quarter-dyadic radii `2^{k/4}` in `[h, y_max]`.
pub fn quarter_lattice(h: f64, y_max: f64) -> Vec<f64> {
    let lo = (4.0 * h.log2()).ceil() as i32;
    let hi = (4.0 * y_max.log2()).floor() as i32;
    (lo..=hi).map(|k| (k as f64 / 4.0).exp2()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorProfile {
    /// Bilinear maximal function over the dyadic radii.
    pub maximal: Vec<f64>,
    /// Sup over quarter-dyadic `ε < δ` of the truncated singular integral.
    pub tstar: Vec<f64>,
    /// The same sup over dyadic `ε < δ`.
    pub tbullet: Vec<f64>,
    pub dyadic: Vec<f64>,
    pub quarter: Vec<f64>,
}

impl OperatorProfile {
    /// Number of samples where `T* > c M + T•`.
    pub fn domination_violations(&self, c: f64) -> usize {
        (0..self.tstar.len())
            .filter(|&k| self.tstar[k] > c * self.maximal[k] + self.tbullet[k] + 1e-12 * (1.0 + self.tstar[k]))
            .count()
    }

    /// Smallest `c` with `T* ≤ c M + T•` everywhere.
    pub fn fitted_constant(&self) -> f64 {
        (0..self.tstar.len())
            .filter(|&k| self.maximal[k] > 0.0)
            .map(|k| (self.tstar[k] - self.tbullet[k]) / self.maximal[k])
            .fold(0.0, f64::max)
    }
}

/// Evaluates `M`, `T*` and `T•` together on one node set, radii in `[h, window/4]`.
pub fn operator_profile(f: &SampledFunction, g: &SampledFunction, k: &Kernel, alpha: f64) -> Result<OperatorProfile> {
    f.grid.check_same(&g.grid)?;
    check_alpha(alpha)?;
    let grid = f.grid;
    let y_max = (grid.length() / 4.0).log2().floor().exp2();
    let dyadic = dyadic_lattice(grid.h, y_max);
    let quarter = quarter_lattice(grid.h, y_max);
    let dy = node_spacing(grid, alpha);
    let count = nodes_below(y_max, dy, usize::MAX);
    let weights: Vec<(f64, f64)> = (0..count).map(|j| {
        let y = (j as f64 + 0.5) * dy;
        (k.eval(y), k.eval(-y))
    }).collect();
    let d_idx: Vec<usize> = dyadic.iter().map(|&v| nodes_below(v, dy, count)).collect();
    let q_idx: Vec<usize> = quarter.iter().map(|&v| nodes_below(v, dy, count)).collect();
    let rows = par::map_range(grid.n, |i| {
        let (p, m) = node_products(f, g, alpha, grid.x(i), dy, count);
        let mut abs_cum = vec![0.0; count + 1];
        let mut ker_cum = vec![Complex64::new(0.0, 0.0); count + 1];
        for j in 0..count {
            abs_cum[j + 1] = abs_cum[j] + p[j].norm() + m[j].norm();
            ker_cum[j + 1] = ker_cum[j] + (p[j] * weights[j].0 + m[j] * weights[j].1) * dy;
        }
        let maximal = d_idx.iter().map(|&c| if c == 0 { 0.0 } else { abs_cum[c] / (2 * c) as f64 }).fold(0.0, f64::max);
        let sup_pairs = |idx: &[usize]| {
            let mut best = 0.0f64;
            for a in 0..idx.len() {
                for b in a + 1..idx.len() {
                    best = best.max((ker_cum[idx[b]] - ker_cum[idx[a]]).norm());
                }
            }
            best
        };
        (maximal, sup_pairs(&q_idx), sup_pairs(&d_idx))
    });
    Ok(OperatorProfile {
        maximal: rows.iter().map(|r| r.0).collect(),
        tstar: rows.iter().map(|r| r.1).collect(),
        tbullet: rows.iter().map(|r| r.2).collect(),
        dyadic,
        quarter,
    })
}

/// Basepoints `λ_1..λ_L` separated by at least `2^{-j0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Basepoints {
    pub points: Vec<f64>,
    pub j0: i32,
}

impl Basepoints {
    pub fn new(points: Vec<f64>, j0: i32) -> Result<Self> {
        if points.is_empty() {
            return Err(LabError::invalid("basepoints", "need at least one point"));
        }
        let gap = (-(j0 as f64)).exp2();
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[1] - w[0] < gap) {
            return Err(LabError::invalid("basepoints", format!("{} and {} closer than 2^-{j0}", w[0], w[1])));
        }
        Ok(Basepoints { points, j0 })
    }

    /// Whether `ξ ∈ R_j`.
    pub fn in_neighbourhood(&self, xi: f64, j: i32) -> bool {
        let r = (-(j as f64)).exp2();
        self.points.iter().any(|&l| (xi - l).abs() <= r)
    }
}

/// Keeps the spectrum on bins whose centres satisfy `keep`, then inverts.
pub fn spectral_mask(spec: &SampledFunction, space: Grid, keep: impl Fn(f64) -> bool) -> Result<SampledFunction> {
    let g = spec.grid;
    let values = spec
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| if keep(g.x(j)) { v } else { Complex64::new(0.0, 0.0) })
        .collect();
    inverse_fourier_transform(&SampledFunction { grid: g, values }, space)
}

/// `Γ_j f`: restriction of `f̂` to the closed `2^{-j}`-neighbourhood of the basepoints.
pub fn fourier_restrict(f: &SampledFunction, bp: &Basepoints, j: i32) -> Result<SampledFunction> {
    if j < bp.j0 {
        return Err(LabError::invalid("j", format!("{j} below j0 = {}", bp.j0)));
    }
    spectral_mask(&fourier_transform(f), f.grid, |xi| bp.in_neighbourhood(xi, j))
}

/// `sup_{j ∈ js} |Γ_j f|` at every sample.
pub fn bourgain_maximal(f: &SampledFunction, bp: &Basepoints, js: &[i32]) -> Result<Vec<f64>> {
    if let Some(&j) = js.iter().find(|&&j| j < bp.j0) {
        return Err(LabError::invalid("j", format!("{j} below j0 = {}", bp.j0)));
    }
    let spec = fourier_transform(f);
    let mut out = vec![0.0f64; f.grid.n];
    for &j in js {
        let gj = spectral_mask(&spec, f.grid, |xi| bp.in_neighbourhood(xi, j))?;
        for (o, v) in out.iter_mut().zip(&gj.values) {
            *o = o.max(v.norm());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileOps {
    /// `T_S f = Σ ε_s ⟨f, φ_{s,1}⟩ φ_{s,1}`.
    pub linear: SampledFunction,
    /// `SQ_S f = (Σ |⟨f, φ_{s,1}⟩|²)^{1/2}`.
    pub square: f64,
    /// `T_S^max f`.
    pub maximal: Vec<f64>,
}

/// The three tile operators for packets `φ_{s,1}` with spatial lengths `|I_s|`.
pub fn tile_linear_ops(packets: &[&SampledFunction], lengths: &[f64], signs: &[f64], f: &SampledFunction) -> Result<TileOps> {
    for p in packets {
        f.grid.check_same(&p.grid)?;
    }
    let inner: Vec<Complex64> = par::map_slice(packets, |p| f.inner_product(p).expect("grid checked"));
    let coeffs: Vec<Complex64> = inner.iter().zip(signs).map(|(c, s)| c * s).collect();
    let square = inner.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(TileOps {
        linear: linear_combination(f.grid, &coeffs, packets),
        square,
        maximal: truncated_sup(f.grid, &coeffs, packets, lengths),
    })
}

/// Largest deviation, per threshold `2^k`, between the truncated sum and the
/// restriction of the full sum to `⋃_λ (λ - 2^{γ-k}, λ + 2^{γ-k})`.
pub fn scale_separation_errors(
    packets: &[&SampledFunction],
    lengths: &[f64],
    signs: &[f64],
    f: &SampledFunction,
    lambdas: &[f64],
    gamma: i32,
    ks: &[i32],
) -> Result<Vec<(i32, f64)>> {
    for p in packets {
        f.grid.check_same(&p.grid)?;
    }
    let coeffs: Vec<Complex64> =
        packets.iter().zip(signs).map(|(p, s)| f.inner_product(p).expect("grid checked") * s).collect();
    let full = linear_combination(f.grid, &coeffs, packets);
    let spec = fourier_transform(&full);
    ks.iter()
        .map(|&k| {
            let thr = (k as f64).exp2();
            let chosen: Vec<Complex64> =
                coeffs.iter().zip(lengths).map(|(c, &l)| if l >= thr { *c } else { Complex64::new(0.0, 0.0) }).collect();
            let partial = linear_combination(f.grid, &chosen, packets);
            let r = ((gamma - k) as f64).exp2();
            let restricted = spectral_mask(&spec, f.grid, |xi| lambdas.iter().any(|l| (xi - l).abs() < r))?;
            let err = partial.values.iter().zip(&restricted.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            Ok((k, err))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::Interval;

    fn grid() -> Grid {
        Grid::window(-8.0, 8.0, 16).unwrap()
    }

    #[test]
    fn reciprocal_kernel_passes() {
        let r = validate_kernel(&Kernel::reciprocal(), 3, &default_probes(), &[0.25, 1.0, -2.0]);
        assert!(r.size_ok);
        assert!(r.derivative_ok.iter().all(|&b| b), "{:?}", r.derivative_constants);
        for (xi, v) in &r.transform {
            assert!((v - std::f64::consts::PI).abs() < 1e-3, "ξ={xi}: {v}");
        }
        assert!(r.transform_bounded);
    }

    #[test]
    fn inverse_square_fails_size() {
        let r = validate_kernel(&Kernel::inverse_square(), 1, &[0.5, -0.25, 2.0], &[1.0]);
        assert!(!r.size_ok);
    }

    #[test]
    fn zero_kernel_passes() {
        let r = validate_kernel(&Kernel::zero(), 3, &default_probes(), &[1.0]);
        assert!(r.size_ok && r.derivative_ok.iter().all(|&b| b) && r.transform_bounded);
        assert_eq!(r.transform_sup, 0.0);
    }

    #[test]
    fn maximal_of_constants_and_zero() {
        let g = grid();
        let one = SampledFunction::from_real(g, |_| 1.0);
        let m = bilinear_maximal(&one, &one, 2.0, &[0.125, 1.0, 2.0]).unwrap();
        assert!(m.values.iter().all(|v| (v.re - 1.0).abs() < 1e-15));
        let zero = SampledFunction::zeros(g);
        let m = bilinear_maximal(&one, &zero, 2.0, &[1.0]).unwrap();
        assert!(m.values.iter().all(|v| v.re == 0.0));
        assert!(bilinear_maximal(&one, &one, 1.0, &[1.0]).is_err());
        assert!(bilinear_maximal(&one, &one, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn maximal_of_indicators_at_centre() {
        let g = grid();
        let ind = SampledFunction::from_real(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        let m = bilinear_maximal(&ind, &ind, -1.0, &dyadic_lattice(g.h, 4.0)).unwrap();
        let idx = ((0.5 - g.x0) / g.h).round() as usize;
        assert!((m.values[idx].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_integrand_vanishes_at_origin() {
        let g = grid();
        let f = SampledFunction::from_real(g, |x| (-x * x).exp());
        let h = SampledFunction::from_real(g, |x| 1.0 / (1.0 + x * x));
        let t = truncated_bilinear_singular(&f, &h, &Kernel::reciprocal(), 2.0, 0.25, 2.0).unwrap();
        let idx = ((0.0 - g.x0) / g.h).round() as usize;
        assert!(t.values[idx].norm() < 1e-8);
    }

    #[test]
    fn singular_integral_edge_cases() {
        let g = grid();
        let f = SampledFunction::from_real(g, |x| (-x * x).exp());
        let z = truncated_bilinear_singular(&f, &f, &Kernel::zero(), 2.0, 0.25, 2.0).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
        let thin = truncated_bilinear_singular(&f, &f, &Kernel::reciprocal(), 2.0, 0.5, 0.5 + 1e-9).unwrap();
        assert!(thin.values.iter().all(|v| v.norm() == 0.0));
        assert!(truncated_bilinear_singular(&f, &f, &Kernel::reciprocal(), 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn domination_with_analytic_constant() {
        let g = grid();
        let f = SampledFunction::from_real(g, |x| (-(x - 0.3) * (x - 0.3)).exp() * (3.0 * x).cos());
        let h = SampledFunction::from_real(g, |x| if (-1.0..2.0).contains(&x) { 1.0 } else { 0.2 });
        let p = operator_profile(&f, &h, &Kernel::reciprocal(), -1.0).unwrap();
        assert_eq!(p.domination_violations(8.0), 0);
        assert!(p.fitted_constant() <= 8.0);
    }

    #[test]
    fn restriction_cases() {
        let g = Grid::window(-16.0, 16.0, 8).unwrap();
        let bp = Basepoints::new(vec![0.0, 2.0], 0).unwrap();
        // spectrum inside R_1: a packet centred at 2 with reach 1/8
        let inside = crate::packets::make_wave_packet(
            &crate::tiles::Tile::new(Interval::new(0.0, 2.0).unwrap(), Interval::new(1.75, 0.5).unwrap()),
            &crate::packets::BaseBump::default(),
            g,
            &crate::tiles::Affine::default(),
        )
        .unwrap()
        .f;
        let r = fourier_restrict(&inside, &bp, 1).unwrap();
        let err = r.values.iter().zip(&inside.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        let outside = inside.modulate(1.0);
        let r = fourier_restrict(&outside, &bp, 2).unwrap();
        assert!(r.values.iter().all(|v| v.norm() < 1e-9));
        assert!(fourier_restrict(&inside, &Basepoints::new(vec![0.0], 1).unwrap(), 0).is_err());
    }

    #[test]
    fn restriction_parseval() {
        let g = Grid::window(-16.0, 16.0, 8).unwrap();
        let f = SampledFunction::from_real(g, |x| (-x * x / 4.0).exp() * (1.0 + (5.0 * x).sin()));
        let bp = Basepoints::new(vec![0.0, 0.8], 1).unwrap();
        let r = fourier_restrict(&f, &bp, 2).unwrap();
        let spec = fourier_transform(&f);
        let mass: f64 = spec
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| bp.in_neighbourhood(spec.grid.x(*j), 2))
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * g.dxi();
        assert!((r.lp_norm(2.0).unwrap().powi(2) - mass).abs() < 1e-10);
    }

    #[test]
    fn single_j_maximal_is_modulus() {
        let g = Grid::window(-16.0, 16.0, 8).unwrap();
        let f = SampledFunction::from_real(g, |x| (-x * x / 4.0).exp());
        let bp = Basepoints::new(vec![0.0], 0).unwrap();
        let m = bourgain_maximal(&f, &bp, &[2]).unwrap();
        let r = fourier_restrict(&f, &bp, 2).unwrap();
        for (a, b) in m.iter().zip(&r.values) {
            assert_eq!(*a, b.norm());
        }
    }

    #[test]
    fn basepoint_separation_enforced() {
        assert!(Basepoints::new(vec![0.0, 0.4], 1).is_err());
        assert!(Basepoints::new(vec![0.0, 0.5], 1).is_ok());
    }

    #[test]
    fn single_tile_ops() {
        let g = Grid::window(-16.0, 16.0, 16).unwrap();
        let p = crate::packets::make_wave_packet(
            &crate::tiles::Tile::new(Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 1.0).unwrap()),
            &crate::packets::BaseBump::default(),
            g,
            &crate::tiles::Affine::default(),
        )
        .unwrap()
        .f;
        let f = SampledFunction::from_real(g, |x| (-x * x).exp() * (2.0 * std::f64::consts::PI * 2.5 * x).cos());
        let ops = tile_linear_ops(&[&p], &[1.0], &[-1.0], &f).unwrap();
        let c = f.inner_product(&p).unwrap();
        assert!((ops.square - c.norm()).abs() < 1e-14);
        for k in 0..g.n {
            let want = -c * p.values[k];
            assert!((ops.linear.values[k] - want).norm() < 1e-14);
            assert!((ops.maximal[k] - want.norm()).abs() < 1e-14);
        }
    }
}
