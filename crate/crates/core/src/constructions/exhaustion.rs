//! Closed-form invariant exhaustion functions on the object space of a fiber groupoid.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::groupoid_core::Groupoid;
use crate::interval::Interval;
use crate::numeric_core::CoordKind;
use crate::report::{CheckReport, Witness};
use crate::rng::{rng_for, symmetric, uniform, SampleRng};
use serde::Serialize;
use std::f64::consts::TAU;

/// `f(x) = √(|x_lin|² + 1)` over the line coordinates, or the constant `1` when every
/// coordinate is an angle (compact objects).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exhaustion {
    pub name: String,
    pub kinds: Vec<CoordKind>,
}

impl Exhaustion {
    pub fn for_kinds(kinds: Vec<CoordKind>) -> Self {
        let name = if kinds.contains(&CoordKind::Line) { "sqrt(|x|^2 + 1)" } else { "1" };
        Self { name: name.into(), kinds }
    }

    pub fn is_constant(&self) -> bool {
        !self.kinds.contains(&CoordKind::Line)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(&self.kinds).filter(|(_, k)| **k == CoordKind::Line).map(|(v, _)| v * v).sum();
        (sq + 1.0).sqrt()
    }

    pub fn enclose(&self, b: &[Interval]) -> Interval {
        let mut sq = Interval::point(1.0);
        for (iv, k) in b.iter().zip(&self.kinds) {
            if *k == CoordKind::Line {
                sq = sq + iv.sqr();
            }
        }
        sq.sqrt()
    }

    /// Boxes covering `f⁻¹(band)`; empty when the band misses the range of `f`.
    pub fn level_boxes(&self, band: Interval) -> Vec<Vec<Interval>> {
        let angle = Interval::new(0.0, TAU);
        if band.hi < 1.0 || (self.is_constant() && band.lo > 1.0) {
            return Vec::new();
        }
        let radius = (Interval::point(band.hi).sqr() - Interval::point(1.0)).sqrt().hi;
        let inner = if band.lo > 1.0 { (Interval::point(band.lo).sqr() - Interval::point(1.0)).sqrt().lo } else { 0.0 };
        let lines = self.kinds.iter().filter(|k| **k == CoordKind::Line).count();
        let full = |iv: Interval| self.kinds.iter().map(|k| if *k == CoordKind::Line { iv } else { angle }).collect::<Vec<_>>();
        if lines == 1 && inner > 0.0 {
            vec![full(Interval::new(-radius, -inner)), full(Interval::new(inner, radius))]
        } else {
            vec![full(Interval::new(-radius, radius))]
        }
    }

    /// A random point of `f⁻¹(level)`.
    pub fn level_point(&self, level: f64, rng: &mut SampleRng) -> Option<Vec<f64>> {
        if self.is_constant() {
            return (level == 1.0).then(|| self.kinds.iter().map(|_| uniform(rng, 0.0, TAU)).collect());
        }
        if level < 1.0 {
            return None;
        }
        let r = (level * level - 1.0).sqrt();
        let mut x: Vec<f64> = self.kinds.iter().map(|k| if *k == CoordKind::Line { symmetric(rng, 1.0) } else { uniform(rng, 0.0, TAU) }).collect();
        let norm = x.iter().zip(&self.kinds).filter(|(_, k)| **k == CoordKind::Line).map(|(v, _)| v * v).sum::<f64>().sqrt();
        let norm = if norm > 0.0 { norm } else { 1.0 };
        for (v, k) in x.iter_mut().zip(&self.kinds) {
            if *k == CoordKind::Line {
                *v *= r / norm;
            }
        }
        Some(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionReport {
    pub function: String,
    pub invariance: CheckReport,
    /// Along rays `r ↦ f(r e)`: violations of strict growth and of `f(r e) ≥ r`.
    pub growth: CheckReport,
}

const RAY_RADII: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 16.0, 64.0, 1024.0];

/// The closed-form exhaustion for a source-proper fiber, with invariance `f∘s = f∘t` and growth
/// checks at samples.
pub fn invariant_exhaustion(fiber: &Groupoid, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<(Exhaustion, ExhaustionReport)> {
    if !fiber.meta.source_proper {
        return Err(Error::NotSourceProper(fiber.name.clone()));
    }
    if fiber.objects.patches.len() != 1 {
        return Err(Error::InvalidParams(format!("{} has several object patches", fiber.name)));
    }
    let f = Exhaustion::for_kinds(fiber.objects.patch(0).kinds.clone());
    let mut inv = CheckReport::new("exhaustion invariance", n_samples, seed);
    let mut growth = CheckReport::new("exhaustion growth along rays", n_samples, seed);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let g = fiber.sample_arrow(&mut rng);
        let (s, t) = (fiber.s(&g), fiber.t(&g));
        inv.observe((f.eval(&s.coords) - f.eval(&t.coords)).abs(), || Witness::points("arrow", &[&g]));
        if f.is_constant() {
            continue;
        }
        let dir: Vec<f64> = f.kinds.iter().map(|kind| if *kind == CoordKind::Line { symmetric(&mut rng, 1.0) } else { 0.0 }).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let mut prev = f64::NEG_INFINITY;
        let mut bad = 0.0f64;
        for r in RAY_RADII {
            let x: Vec<f64> = dir.iter().map(|v| v * r / norm).collect();
            let v = f.eval(&x);
            bad = bad.max((prev - v).max(0.0)).max((r - v).max(0.0));
            if v <= prev {
                bad = bad.max(1.0);
            }
            prev = v;
        }
        growth.observe(bad, || Witness::new("ray direction", dir.clone()));
    }
    Ok((f, ExhaustionReport { function: fiber.name.clone(), invariance: inv.finish(tol.tol_alg), growth: growth.finish(tol.tol_alg) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid_core::catalog::{cyclic_group, group_bundle, pair_groupoid, unit_groupoid};
    use crate::numeric_core::{Patch, Space};
    use std::sync::Arc;

    #[test]
    fn unit_groupoid_on_the_line() {
        let g = unit_groupoid(Arc::new(Space::single(Patch::lines("x", 1))));
        let (f, rep) = invariant_exhaustion(&g, 100, 1, &Tolerances::default()).unwrap();
        assert_eq!(rep.invariance.worst_residual, 0.0);
        assert!(rep.growth.passed);
        assert_eq!(f.eval(&[0.0]), 1.0);
        assert!((f.eval(&[3.0]) - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn trivial_action_bundle_is_invariant() {
        let g = group_bundle(Patch::lines("x", 1), &cyclic_group(2));
        let (_, rep) = invariant_exhaustion(&g, 100, 1, &Tolerances::default()).unwrap();
        assert_eq!(rep.invariance.worst_residual, 0.0);
    }

    #[test]
    fn compact_objects_get_a_constant() {
        let g = unit_groupoid(Arc::new(Space::single(Patch::new("theta", vec![CoordKind::Angle]))));
        let (f, _) = invariant_exhaustion(&g, 10, 1, &Tolerances::default()).unwrap();
        assert!(f.is_constant());
        assert!(f.level_boxes(Interval::new(0.75, 1.25)).iter().all(|b| b.iter().all(|iv| iv.is_bounded())));
        assert!(f.level_boxes(Interval::new(1.75, 2.25)).is_empty());
    }

    #[test]
    fn pair_groupoid_is_not_source_proper() {
        let g = pair_groupoid(Patch::lines("x", 1));
        assert!(matches!(invariant_exhaustion(&g, 10, 1, &Tolerances::default()), Err(Error::NotSourceProper(_))));
    }

    #[test]
    fn level_boxes_enclose_level_points() {
        let f = Exhaustion::for_kinds(vec![CoordKind::Line]);
        let mut rng = rng_for(9, 0);
        for level in [1.0, 1.3, 2.0, 7.5] {
            let boxes = f.level_boxes(Interval::new(level - 0.25, level + 0.25));
            for _ in 0..20 {
                let x = f.level_point(level, &mut rng).unwrap();
                assert!((f.eval(&x) - level).abs() < 1e-12);
                assert!(boxes.iter().any(|b| b[0].contains(x[0])), "{x:?} outside {boxes:?}");
            }
        }
        assert!(f.level_boxes(Interval::new(-0.25, 0.25)).is_empty());
    }
}
