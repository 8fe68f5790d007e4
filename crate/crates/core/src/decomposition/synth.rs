//! Synthetic lacunary tile systems for tests, calibration and the pipeline corpus.

use rand::Rng;

use crate::error::Result;
use crate::intervals::Interval;
use crate::packets::BaseBump;
use crate::rng;
use crate::signal::Grid;
use crate::tiles::{Affine, Tile, TileSystem, TriTile};

use super::master::{default_stopping_times, split_main};
use super::{standard_battery, Context, Family, Probe, SplitParams, SplitReport};

/// Number of fixed corpus templates.
pub const TEMPLATE_COUNT: usize = 10;

/// Proximity constant of every synthetic system.
pub const PROXIMITY: f64 = 2.0;

/// A 1-tree with top `[left, left + |I_t|)` in the frequency column `column`.
///
/// Every level `ℓ` in `levels` contributes the tri-tiles of length `2^ℓ` tiling
/// the top interval, kept when `keep(ℓ, I_s)` holds. With `l = 2^{-ℓ}` the
/// components are `[c+2l, c+3l)`, `[c+l, c+2l)` and `[c, c+l)`, and the top
/// frequency is `[c, c + 1/|I_t|)`.
pub fn lacunary_tree(top: Interval, column: f64, levels: &[i32], keep: impl Fn(i32, Interval) -> bool) -> (Vec<TriTile>, Tile) {
    let mut tiles = Vec::new();
    for &lvl in levels {
        let len = (lvl as f64).exp2();
        let l = 1.0 / len;
        let count = (top.length / len).round() as usize;
        for k in 0..count {
            let space = Interval { left: top.left + k as f64 * len, length: len };
            if keep(lvl, space) {
                let w = |m: f64| Interval { left: column + m * l, length: l };
                tiles.push(TriTile::new(space, [w(2.0), w(1.0), w(0.0)]));
            }
        }
    }
    let t = Tile::new(top, Interval { left: column, length: 1.0 / top.length });
    (tiles, t)
}

/// Collects trees into one system with the identity frequency map.
pub fn system_of(trees: Vec<(Vec<TriTile>, Tile)>) -> TileSystem {
    let mut tiles = Vec::new();
    let mut tops = Vec::new();
    let mut tree_of = Vec::new();
    for (t, (ts, top)) in trees.into_iter().enumerate() {
        tree_of.extend(std::iter::repeat_n(t, ts.len()));
        tiles.extend(ts);
        tops.push(top);
    }
    TileSystem::new(tiles, tops, tree_of, Affine::default(), PROXIMITY).expect("consistent by construction")
}

struct TreeSpec {
    left: f64,
    top_level: i32,
    column: f64,
    levels: &'static [i32],
    sparse: bool,
}

const fn tree(left: f64, top_level: i32, column: f64, levels: &'static [i32], sparse: bool) -> TreeSpec {
    TreeSpec { left, top_level, column, levels, sparse }
}

fn template(index: usize) -> Vec<TreeSpec> {
    match index {
        0 => vec![tree(0.0, 3, 0.0, &[3, 0, -3], false)],
        1 => vec![tree(-16.0, 3, 0.0, &[3, 0], false), tree(8.0, 3, 0.0, &[3, 0], false)],
        2 => vec![tree(-16.0, 5, -32.0, &[5, 2], false), tree(0.0, 3, 32.0, &[3, 0, -3], true)],
        3 => vec![
            tree(-32.0, 5, 0.0, &[5, 2, -1], true),
            tree(-12.0, 2, 32.0, &[2, -1], false),
            tree(8.0, 3, -32.0, &[3, 0, -3], true),
        ],
        4 => [-40.0, -24.0, -8.0, 8.0, 24.0].into_iter().map(|a| tree(a, 3, 0.0, &[3, 0], false)).collect(),
        5 => vec![tree(-8.0, 4, 0.0, &[4, 1, -2], false)],
        6 => vec![tree(-16.0, 5, -32.0, &[5, 2, -1], true), tree(-8.0, 3, 32.0, &[3, 0], false)],
        7 => vec![
            tree(-24.0, 3, 0.0, &[3, 0, -3], true),
            tree(0.0, 3, -32.0, &[3, 0, -3], true),
            tree(0.0, 3, 32.0, &[3], false),
        ],
        8 => vec![tree(-32.0, 5, 0.0, &[5, 2], false), tree(-32.0, 5, 32.0, &[5, 2, -1], true)],
        9 => vec![
            tree(-40.0, 4, 0.0, &[4, 1], false),
            tree(-16.0, 4, 0.0, &[4, 1, -2], true),
            tree(8.0, 4, 0.0, &[4, 1], false),
            tree(-12.0, 1, 32.0, &[1, -2], false),
        ],
        _ => panic!("template index {index} out of range"),
    }
}

/// Template `index` before translation.
pub fn template_system(index: usize) -> TileSystem {
    system_of(
        template(index)
            .into_iter()
            .map(|t| {
                let top = Interval { left: t.left, length: (t.top_level as f64).exp2() };
                let deepest = t.levels.iter().copied().min().unwrap_or(t.top_level);
                lacunary_tree(top, t.column, t.levels, |lvl, iv| {
                    !t.sparse || lvl != deepest || ((iv.left - top.left) / iv.length).round() as i64 % 3 != 1
                })
            })
            .collect(),
    )
}

/// Template `index` translated by a seed-dependent multiple of 8.
pub fn corpus_system(index: usize, seed: u64) -> TileSystem {
    let shift = 8.0 * rng::stream(seed, 31, index as u64).gen_range(-2i32..=2) as f64;
    template_system(index).transformed(shift, 1.0)
}

pub fn corpus_grid() -> Grid {
    Grid::window(-64.0, 64.0, 128).expect("valid window")
}

/// Parameters used on the corpus: `A = 2`, `μ = 2` and a scale gap of 4.
pub fn corpus_params() -> SplitParams {
    SplitParams { a: 2.0, mu: 2, scale_gap: Some(4.0), ..SplitParams::default() }
}

/// Corpus family with random signs.
pub fn corpus_family(index: usize, seed: u64) -> Result<Family> {
    let sys = corpus_system(index, seed);
    let signs = rng::signs(&mut rng::stream(seed, 32, index as u64), sys.len());
    Family::build(sys, &BaseBump::default(), corpus_grid(), signs)
}

/// Probes of the standard battery.
pub fn probes(fam: &Family, random: usize, combos: usize, seed: u64) -> Result<Vec<Probe>> {
    standard_battery(fam, random, combos, seed)?.iter().map(|f| fam.probe(f)).collect()
}

/// Runs `body` on a small context over `sys` with unit signs, `μ = 2` and a
/// short battery on a 64-unit window.
pub fn test_context<R>(sys: TileSystem, a: f64, body: impl FnOnce(&Context) -> R) -> R {
    let n = sys.len();
    let grid = Grid::window(-32.0, 32.0, 128).expect("valid window");
    let fam = Family::build(sys, &BaseBump::default(), grid, vec![1.0; n]).expect("packets fit the window");
    let probes = probes(&fam, 4, 2, 7).expect("battery");
    let params = SplitParams { a, mu: 2, ..SplitParams::default() };
    let k0 = fam.measured_k0(20);
    body(&Context { fam: &fam, probes: &probes, k0, params: &params })
}

/// Battery sizes of a corpus run: random band-limited functions and packet combinations.
pub const CORPUS_BATTERY: (usize, usize) = (20, 4);

/// Runs the master split on corpus entry `index`.
pub fn run_corpus_entry(index: usize, seed: u64, params: &SplitParams) -> Result<SplitReport> {
    run_family(&corpus_family(index, seed)?, rng::derive(seed, 33, index as u64), params)
}

/// Runs the master split on all of `fam` with the corpus battery and stopping times.
pub fn run_family(fam: &Family, seed: u64, params: &SplitParams) -> Result<SplitReport> {
    let probes = probes(fam, CORPUS_BATTERY.0, CORPUS_BATTERY.1, seed)?;
    let k0 = fam.measured_k0(20);
    let ctx = Context { fam, probes: &probes, k0, params };
    let sigmas = default_stopping_times(fam.grid, rng::derive(seed, 34, 0));
    split_main(&ctx, &fam.system.all(), &sigmas)
}
