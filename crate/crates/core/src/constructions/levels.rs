//! Lexicographic level schedule: integer levels per window whose slabs are pairwise disjoint,
//! with all suprema bounded by interval arithmetic.

use super::atlas::TrivializingAtlas;
use super::exhaustion::Exhaustion;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::interval::{DecimalBounds, Interval};
use serde::Serialize;

/// Pieces per axis when bounding over the overlap of two windows.
const OVERLAP_PIECES: usize = 16;

/// Slab `Z^{i,α}`: window `α` (inner closure padded by half the atlas margin) times
/// `|f∘pr₂∘ψ^α₀ − level| ≤ band`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlabId {
    pub step: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEntry {
    pub slab: SlabId,
    pub level: u64,
    /// Enclosure of the largest value of this window's `f` over earlier overlapping slabs.
    pub constraint: Option<DecimalBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabPair {
    pub first: SlabId,
    pub second: SlabId,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSchedule {
    /// `levels[α][i] = n(i, α)`.
    pub levels: Vec<Vec<u64>>,
    pub band: f64,
    pub pad: f64,
    pub entries: Vec<LevelEntry>,
    pub pairs: Vec<SlabPair>,
    pub disjoint: bool,
}

impl LevelSchedule {
    pub fn level_values(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| l.iter().map(|v| *v as f64).collect()).collect()
    }
}

fn overlap(a: &[Interval], b: &[Interval]) -> Option<Vec<Interval>> {
    a.iter().zip(b).map(|(x, y)| x.intersection(y)).collect()
}

/// Enclosure of `f(pr₂ ψ^α₀(p))` over the slab of window `beta` at `level`, or `None` when the
/// slab misses window `alpha`'s padded box or is empty.
pub fn enclose_over_slab(
    atlas: &TrivializingAtlas,
    f: &Exhaustion,
    alpha: usize,
    beta: usize,
    level: f64,
    band: f64,
    pad: f64,
) -> Result<Option<Interval>> {
    let Some(common) = overlap(&atlas.windows[alpha].padded_inner(pad), &atlas.windows[beta].padded_inner(pad)) else {
        return Ok(None);
    };
    let boxes = f.level_boxes(Interval::new(level - band, level + band));
    if boxes.is_empty() {
        return Ok(None);
    }
    let diff = atlas.shifts[alpha].minus(&atlas.shifts[beta]);
    let n = common[0];
    let mut out: Option<Interval> = None;
    for k in 0..OVERLAP_PIECES {
        let piece = Interval::new(
            n.lo + n.width() * k as f64 / OVERLAP_PIECES as f64,
            if k + 1 == OVERLAP_PIECES { n.hi } else { n.lo + n.width() * (k + 1) as f64 / OVERLAP_PIECES as f64 },
        );
        let delta = diff.enclose(piece);
        for b in &boxes {
            let mut moved = b.clone();
            moved[atlas.shift_coord] = moved[atlas.shift_coord] + delta;
            let v = f.enclose(&moved);
            if !v.is_bounded() {
                return Err(Error::SupremumUnbounded(format!("slab (window {beta}, level {level}) seen from window {alpha}")));
            }
            out = Some(out.map_or(v, |o| o.hull(&v)));
        }
    }
    Ok(out)
}

fn band_of(level: f64, band: f64) -> Interval {
    Interval::new(level - band, level + band)
}

/// Checks every pair of slabs. Same-window slabs are separated when their levels differ by more
/// than `2·band`; cross-window slabs when either window's `f` over the other slab misses its band.
pub fn verify_disjointness(atlas: &TrivializingAtlas, f: &Exhaustion, levels: &[Vec<f64>], band: f64, pad: f64) -> Result<Vec<SlabPair>> {
    let slabs: Vec<(SlabId, f64)> = levels
        .iter()
        .enumerate()
        .flat_map(|(w, ls)| ls.iter().enumerate().map(move |(i, l)| (SlabId { step: i, window: w }, *l)))
        .collect();
    let mut pairs = Vec::new();
    for (a, (sa, la)) in slabs.iter().enumerate() {
        for (sb, lb) in &slabs[a + 1..] {
            let separated = if sa.window == sb.window {
                (la - lb).abs() > 2.0 * band
            } else {
                let seen_from_a = enclose_over_slab(atlas, f, sa.window, sb.window, *lb, band, pad)?;
                let seen_from_b = enclose_over_slab(atlas, f, sb.window, sa.window, *la, band, pad)?;
                let misses = |e: Option<Interval>, level: f64| e.is_none_or(|iv| !iv.intersects(&band_of(level, band)));
                misses(seen_from_a, *la) || misses(seen_from_b, *lb)
            };
            pairs.push(SlabPair { first: *sa, second: *sb, separated });
        }
    }
    Ok(pairs)
}

/// Levels `n(i, α)` for `i < depth` in lexicographic order of `(i, α)`: each exceeds the previous
/// level of its window and `sup + band` over every earlier slab of another window.
pub fn level_schedule(atlas: &TrivializingAtlas, f: &Exhaustion, depth: usize, tol: &Tolerances) -> Result<LevelSchedule> {
    let band = tol.level_band;
    if !(band > 0.0 && band < 0.5) {
        return Err(Error::InvalidParams(format!("level band {band} must lie in (0, 1/2)")));
    }
    let pad = tol.atlas_margin / 2.0;
    let nw = atlas.windows.len();
    let mut levels: Vec<Vec<u64>> = vec![Vec::new(); nw];
    let mut entries = Vec::new();
    for i in 0..depth {
        for alpha in 0..nw {
            let mut level = if i == 0 { 0 } else { levels[alpha][i - 1] + 1 };
            let mut constraint: Option<Interval> = None;
            for (j, beta) in (0..=i).flat_map(|j| (0..nw).map(move |b| (j, b))) {
                if (j, beta) >= (i, alpha) || beta == alpha {
                    continue;
                }
                let Some(sup) = enclose_over_slab(atlas, f, alpha, beta, levels[beta][j] as f64, band, pad)? else {
                    continue;
                };
                constraint = Some(constraint.map_or(sup, |c| c.hull(&sup)));
                let needed = (sup.hi + band).floor();
                if !needed.is_finite() || needed >= u64::MAX as f64 {
                    return Err(Error::SupremumUnbounded(format!("level for step {i}, window {alpha}")));
                }
                level = level.max(needed as u64 + 1);
            }
            levels[alpha].push(level);
            entries.push(LevelEntry { slab: SlabId { step: i, window: alpha }, level, constraint: constraint.map(|c| c.decimal()) });
        }
    }
    let values: Vec<Vec<f64>> = levels.iter().map(|l| l.iter().map(|v| *v as f64).collect()).collect();
    let pairs = verify_disjointness(atlas, f, &values, band, pad)?;
    let disjoint = pairs.iter().all(|p| p.separated);
    Ok(LevelSchedule { levels, band, pad, entries, pairs, disjoint })
}
