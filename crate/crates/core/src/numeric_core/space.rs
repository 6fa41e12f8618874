use crate::error::{Error, Result};
use nalgebra::DVector;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoordKind {
    Line,
    Angle,
}

/// Wraps an angle into `[0, 2π)`. Idempotent on its own output.
pub fn normalize_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Representative of `x` in `(-π, π]`.
pub fn wrap_difference(x: f64) -> f64 {
    let r = normalize_angle(x + PI) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// A removed point of a patch, possibly constrained on a subset of the coordinates only
/// (then the removed set is an affine slice, e.g. a line in the plane).
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub coords: Vec<(usize, f64)>,
    pub radius: f64,
}

impl Exclusion {
    pub fn point(center: &[f64], radius: f64) -> Self {
        Self { coords: center.iter().copied().enumerate().collect(), radius }
    }

    pub fn on_coords(coords: Vec<(usize, f64)>, radius: f64) -> Self {
        Self { coords, radius }
    }

    pub fn shifted(&self, offset: usize) -> Self {
        Self { coords: self.coords.iter().map(|&(i, v)| (i + offset, v)).collect(), radius: self.radius }
    }

    fn offset_from(&self, kinds: &[CoordKind], x: &[f64]) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&(i, c)| match kinds[i] {
                CoordKind::Line => x[i] - c,
                CoordKind::Angle => wrap_difference(x[i] - c),
            })
            .collect()
    }

    pub fn distance(&self, kinds: &[CoordKind], x: &[f64]) -> f64 {
        self.offset_from(kinds, x).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Smallest `λ ∈ [0, 1]` at which the segment `a + λ (b - a)` enters the exclusion ball.
    pub fn segment_entry(&self, kinds: &[CoordKind], a: &[f64], b: &[f64]) -> Option<f64> {
        let rel = self.offset_from(kinds, a);
        let d: Vec<f64> = self
            .coords
            .iter()
            .map(|&(i, _)| match kinds[i] {
                CoordKind::Line => b[i] - a[i],
                CoordKind::Angle => wrap_difference(b[i] - a[i]),
            })
            .collect();
        let r2 = self.radius * self.radius;
        let c = rel.iter().map(|v| v * v).sum::<f64>() - r2;
        if c <= 0.0 {
            return Some(0.0);
        }
        let qa = d.iter().map(|v| v * v).sum::<f64>();
        if qa == 0.0 {
            return None;
        }
        let qb = 2.0 * rel.iter().zip(&d).map(|(r, v)| r * v).sum::<f64>();
        let disc = qb * qb - 4.0 * qa * c;
        if disc < 0.0 {
            return None;
        }
        let lambda = (-qb - disc.sqrt()) / (2.0 * qa);
        (0.0..=1.0).contains(&lambda).then_some(lambda)
    }
}

/// One connected coordinate chart `ℝ^a × (S¹)^b`, minus finitely many exclusion balls.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub kinds: Vec<CoordKind>,
    pub excluded: Vec<Exclusion>,
    pub label: String,
}

impl Patch {
    pub fn new(label: impl Into<String>, kinds: Vec<CoordKind>) -> Self {
        Self { kinds, excluded: Vec::new(), label: label.into() }
    }

    pub fn lines(label: impl Into<String>, n: usize) -> Self {
        Self::new(label, vec![CoordKind::Line; n])
    }

    pub fn point(label: impl Into<String>) -> Self {
        Self::new(label, Vec::new())
    }

    pub fn with_exclusion(mut self, e: Exclusion) -> Self {
        self.excluded.push(e);
        self
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn lin_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == CoordKind::Line).count()
    }

    pub fn circ_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == CoordKind::Angle).count()
    }

    pub fn normalize(&self, coords: &mut [f64]) {
        for (x, k) in coords.iter_mut().zip(&self.kinds) {
            if *k == CoordKind::Angle {
                *x = normalize_angle(*x);
            }
        }
    }

    /// Coordinate difference `a - b`, angles taken in `(-π, π]`.
    pub fn diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.kinds
            .iter()
            .zip(a.iter().zip(b))
            .map(|(k, (x, y))| match k {
                CoordKind::Line => x - y,
                CoordKind::Angle => wrap_difference(x - y),
            })
            .collect()
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.diff(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn excluded_distance(&self, x: &[f64]) -> f64 {
        self.excluded.iter().map(|e| e.distance(&self.kinds, x)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_excluded(&self, x: &[f64]) -> bool {
        self.excluded.iter().any(|e| e.distance(&self.kinds, x) < e.radius)
    }

    pub fn segment_entry(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        self.excluded
            .iter()
            .filter_map(|e| e.segment_entry(&self.kinds, a, b))
            .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |m| m.min(l))))
    }

    pub fn product(&self, other: &Patch) -> Patch {
        let offset = self.dim();
        let mut kinds = self.kinds.clone();
        kinds.extend(other.kinds.iter().copied());
        let mut excluded = self.excluded.clone();
        excluded.extend(other.excluded.iter().map(|e| e.shifted(offset)));
        Patch { kinds, excluded, label: format!("{}*{}", self.label, other.label) }
    }
}

/// Finite disjoint union of patches.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub patches: Vec<Patch>,
}

impl Space {
    pub fn new(patches: Vec<Patch>) -> Self {
        Self { patches }
    }

    pub fn single(patch: Patch) -> Self {
        Self { patches: vec![patch] }
    }

    pub fn point() -> Self {
        Self::single(Patch::point("pt"))
    }

    pub fn patch(&self, i: usize) -> &Patch {
        &self.patches[i]
    }

    pub fn dim(&self, patch: usize) -> usize {
        self.patches[patch].dim()
    }

    /// Product space; patch `(i, j)` sits at index `i * other.len() + j`.
    pub fn product(&self, other: &Space) -> Space {
        let mut patches = Vec::with_capacity(self.patches.len() * other.patches.len());
        for a in &self.patches {
            for b in &other.patches {
                patches.push(a.product(b));
            }
        }
        Space { patches }
    }

    pub fn disjoint_union(&self, other: &Space) -> Space {
        let mut patches = self.patches.clone();
        patches.extend(other.patches.iter().cloned());
        Space { patches }
    }

    pub fn labels_unique(&self) -> bool {
        let mut labels: Vec<&str> = self.patches.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        labels.windows(2).all(|w| w[0] != w[1])
    }

    pub fn point_at(&self, patch: usize, coords: Vec<f64>) -> Point {
        let mut p = Point { patch, coords };
        self.patches[patch].normalize(&mut p.coords);
        p
    }

    pub fn normalize(&self, p: &mut Point) {
        self.patches[p.patch].normalize(&mut p.coords);
    }

    /// Flat-gauge distance; points on different patches are infinitely far apart.
    pub fn dist(&self, a: &Point, b: &Point) -> f64 {
        if a.patch != b.patch {
            return f64::INFINITY;
        }
        self.patches[a.patch].dist(&a.coords, &b.coords)
    }

    pub fn diff(&self, a: &Point, b: &Point) -> Option<DVector<f64>> {
        (a.patch == b.patch).then(|| DVector::from_vec(self.patches[a.patch].diff(&a.coords, &b.coords)))
    }

    pub fn validate(&self, p: &Point) -> Result<()> {
        let patch = self
            .patches
            .get(p.patch)
            .ok_or_else(|| Error::EvaluationOutsideDomain(format!("patch index {} out of range", p.patch)))?;
        if patch.dim() != p.coords.len() {
            return Err(Error::EvaluationOutsideDomain(format!(
                "point has {} coordinates, patch `{}` has dimension {}",
                p.coords.len(),
                patch.label,
                patch.dim()
            )));
        }
        if patch.is_excluded(&p.coords) {
            return Err(Error::EvaluationOutsideDomain(format!("{p:?} lies in an exclusion ball of `{}`", patch.label)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub patch: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(patch: usize, coords: Vec<f64>) -> Self {
        Self { patch, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub coeffs: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, coeffs: DVector<f64>) -> Self {
        debug_assert_eq!(base.coords.len(), coeffs.len());
        Self { base, coeffs }
    }

    pub fn zero(base: Point) -> Self {
        let n = base.dim();
        Self { base, coeffs: DVector::zeros(n) }
    }
}
