//! Maximal partial sums of unconditionally bounded sequences.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::par;
use crate::rng;

/// Sign patterns are enumerated exhaustively up to this length.
pub const EXHAUSTIVE_MAX_J: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockedBound {
    pub b0: f64,
    /// `B_j` per block, computed exactly.
    pub block_norms: Vec<f64>,
    /// `(1 + ln J) B_0 + (Σ B_j²)^{1/2}` with `J` the number of blocks.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmReport {
    /// Largest `‖Σ a_j f_j‖₂` seen over coefficient patterns with `|a_j| ≤ 1`.
    pub b_est: f64,
    /// `‖sup_{K ≤ J} |Σ_{j ≤ K} f_j|‖₂`.
    pub lhs: f64,
    /// `lhs / ((1 + ln J) B_est)`.
    pub ratio: f64,
    pub trials: usize,
    pub exhaustive: bool,
    pub blocked: Option<BlockedBound>,
}

fn weighted_norm(v: &[Complex64], weight: f64) -> f64 {
    (weight * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

fn combination(fs: &[Vec<Complex64>], a: &[f64]) -> Vec<Complex64> {
    let m = fs[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (f, &c) in fs.iter().zip(a) {
        for (o, v) in out.iter_mut().zip(f) {
            *o += v * c;
        }
    }
    out
}

/// `‖sup_{lo ≤ N ≤ hi} |F_N - F_lo|‖₂` with `F_N = Σ_{n < N} f_n`.
fn partial_sup_norm(fs: &[Vec<Complex64>], lo: usize, hi: usize, weight: f64) -> f64 {
    let m = fs[0].len();
    let sup: Vec<f64> = (0..m)
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut best = 0.0f64;
            for f in &fs[lo..hi] {
                acc += f[x];
                best = best.max(acc.norm());
            }
            best
        })
        .collect();
    (weight * sup.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Estimates the unconditional constant `B` by sampling coefficient patterns
/// and compares it with the exact maximal partial-sum norm. `blocks` lists
/// increasing boundaries `0 = N_0 < N_1 < … < N_m = J` for the blocked form.
pub fn rm_maximal_check(fs: &[Vec<Complex64>], weight: f64, trials: usize, seed: u64, blocks: Option<&[usize]>) -> Result<RmReport> {
    if fs.is_empty() {
        return Err(LabError::invalid("f_list", "must be nonempty"));
    }
    if trials < 32 {
        return Err(LabError::invalid("trials", "at least 32 required"));
    }
    let m = fs[0].len();
    if fs.iter().any(|f| f.len() != m) {
        return Err(LabError::GridMismatch("sequence members differ in length".into()));
    }
    let j = fs.len();
    let exhaustive = j <= EXHAUSTIVE_MAX_J;
    let mut patterns: Vec<Vec<f64>> = Vec::new();
    if exhaustive {
        patterns.extend((0..1u64 << j).map(|mask| rng::signs_from_mask(mask, j)));
    } else {
        patterns.extend((0..trials).map(|t| rng::signs(&mut rng::stream(seed, 21, t as u64), j)));
    }
    patterns.extend((0..trials).map(|t| {
        let mut r = rng::stream(seed, 22, t as u64);
        (0..j).map(|_| r.gen_range(-1.0..=1.0)).collect()
    }));
    let b_est = par::map_slice(&patterns, |a| weighted_norm(&combination(fs, a), weight))
        .into_iter()
        .fold(0.0, f64::max);
    let lhs = partial_sup_norm(fs, 0, j, weight);
    let ratio = if b_est > 0.0 { lhs / ((1.0 + (j as f64).ln()) * b_est) } else { 0.0 };
    let blocked = match blocks {
        None => None,
        Some(b) => {
            if b.len() < 2 || b[0] != 0 || *b.last().expect("len") != j || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LabError::invalid("blocks", "need 0 = N_0 < … < N_m = J"));
            }
            let block_norms: Vec<f64> = b.windows(2).map(|w| partial_sup_norm(fs, w[0], w[1], weight)).collect();
            let count = block_norms.len() as f64;
            let rhs = (1.0 + count.ln()) * b_est + block_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some(BlockedBound { b0: b_est, block_norms, rhs })
        }
    };
    Ok(RmReport { b_est, lhs, ratio, trials, exhaustive, blocked })
}

/// Point masses `f_j = 1_{{j}}` on `{0..J}` with counting measure.
pub fn point_masses(j: usize) -> Vec<Vec<Complex64>> {
    (0..j)
        .map(|i| (0..j).map(|x| Complex64::new(if x == i { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

fn gaussian(r: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = r.gen_range(f64::EPSILON..1.0);
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// `J` random unit vectors in dimension `dim`.
pub fn random_frame(j: usize, dim: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut r = rng::stream(seed, 23, j as u64);
    (0..j)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut r)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| Complex64::new(x / n, 0.0)).collect()
        })
        .collect()
}

/// `J` random orthonormal vectors in dimension `dim ≥ J`.
pub fn random_orthonormal(j: usize, dim: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    if dim < j {
        return Err(LabError::invalid("dim", "must be at least J"));
    }
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for v in random_frame(j, dim, seed ^ 0x5eed) {
        let mut w = v;
        for u in &out {
            let c: Complex64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * ui;
            }
        }
        let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(w.into_iter().map(|z| z / n).collect());
    }
    Ok(out)
}
