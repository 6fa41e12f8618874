//! Trivializing atlases of families `N × 𝓕 → N` whose charts shift one fiber coordinate by a
//! polynomial in the first base coordinate, and the partition-of-unity gluing of chart-flat lifts.

use super::{open_bump, BOX_SPLIT_DEPTH};
use crate::config::Tolerances;
use crate::connections::{Connection, HorFn};
use crate::error::{Error, Result};
use crate::groupoid_core::{Groupoid, GroupoidMorphism};
use crate::interval::Interval;
use crate::numeric_core::{Point, SmoothMap, Space};
use crate::report::{CheckReport, Witness};
use crate::rng::{rng_for, uniform, SampleRng};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;

/// `a(n) = c0 + c1·n + c2·n²`, evaluated at the first base coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberShift {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl FiberShift {
    pub const ZERO: FiberShift = FiberShift { c0: 0.0, c1: 0.0, c2: 0.0 };

    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub fn value(&self, n: f64) -> f64 {
        self.c0 + self.c1 * n + self.c2 * n * n
    }

    pub fn slope(&self, n: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * n
    }

    pub fn enclose(&self, n: Interval) -> Interval {
        Interval::point(self.c0) + n.scale(self.c1) + n.sqr().scale(self.c2)
    }

    pub fn minus(&self, other: &FiberShift) -> FiberShift {
        FiberShift::new(self.c0 - other.c0, self.c1 - other.c1, self.c2 - other.c2)
    }
}

/// Base window `U ⊂ V`, both open boxes given per base coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub inner: Vec<(f64, f64)>,
    pub outer: Vec<(f64, f64)>,
}

impl Window {
    pub fn interval(inner: (f64, f64), outer: (f64, f64)) -> Self {
        Self { inner: vec![inner], outer: vec![outer] }
    }

    /// Distance from `closure(U)` to the boundary of `V`, coordinatewise.
    pub fn margin(&self) -> f64 {
        self.inner.iter().zip(&self.outer).map(|(u, v)| (u.0 - v.0).min(v.1 - u.1)).fold(f64::INFINITY, f64::min)
    }

    pub fn in_outer(&self, n: &[f64]) -> bool {
        self.outer.iter().zip(n).all(|(v, x)| v.0 < *x && *x < v.1)
    }

    /// `closure(U)` enlarged by `pad` on every side.
    pub fn padded_inner(&self, pad: f64) -> Vec<Interval> {
        self.inner.iter().map(|u| Interval::new(u.0 - pad, u.1 + pad)).collect()
    }
}

/// Charts `ψ^α(n, x) = (n, x + a_α(n) e_k)` on a family `N × 𝓕 → N`, where `e_k` is one fiber
/// coordinate, shared by arrows and objects. Valid when translating that coordinate commutes with
/// the structure maps of `𝓕` (e.g. group bundles over `ℝ` with trivial action); `check` verifies
/// it at samples.
#[derive(Clone)]
pub struct TrivializingAtlas {
    pub family: Arc<GroupoidMorphism>,
    pub fiber: Arc<Groupoid>,
    pub windows: Vec<Window>,
    pub shifts: Vec<FiberShift>,
    pub shift_coord: usize,
    /// Truncation box in `N`; certificates only speak about windows over it.
    pub base_box: Vec<Interval>,
    /// Truncation box for the fiber object coordinates.
    pub fiber_box: Vec<Interval>,
}

impl std::fmt::Debug for TrivializingAtlas {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrivializingAtlas")
            .field("family", &self.family.name)
            .field("windows", &self.windows)
            .field("shifts", &self.shifts)
            .finish()
    }
}

impl TrivializingAtlas {
    pub fn new(
        family: Arc<GroupoidMorphism>,
        fiber: Arc<Groupoid>,
        windows: Vec<Window>,
        shifts: Vec<FiberShift>,
        shift_coord: usize,
        base_box: Vec<Interval>,
        fiber_box: Vec<Interval>,
    ) -> Result<Self> {
        if !family.is_family() {
            return Err(Error::NotAFamily(family.name.clone()));
        }
        if windows.is_empty() || windows.len() != shifts.len() {
            return Err(Error::InvalidParams(format!("{} windows but {} shifts", windows.len(), shifts.len())));
        }
        let dn = family.base.objects.dim(0);
        if base_box.len() != dn || windows.iter().any(|w| w.inner.len() != dn || w.outer.len() != dn) {
            return Err(Error::InvalidParams(format!("base boxes must have {dn} coordinates")));
        }
        if dn == 0 {
            return Err(Error::InvalidParams("shift charts need a base coordinate".into()));
        }
        let df = family.total.objects.dim(0) - dn;
        if shift_coord >= df || fiber_box.len() != df {
            return Err(Error::InvalidParams(format!("fiber has {df} coordinates")));
        }
        Ok(Self { family, fiber, windows, shifts, shift_coord, base_box, fiber_box })
    }

    /// One window around the whole base box with the identity chart.
    pub fn global(family: Arc<GroupoidMorphism>, fiber: Arc<Groupoid>, base_box: Vec<Interval>, fiber_box: Vec<Interval>, margin: f64) -> Result<Self> {
        let inner = base_box.iter().map(|b| (b.lo - margin, b.hi + margin)).collect();
        let outer = base_box.iter().map(|b| (b.lo - 2.0 * margin, b.hi + 2.0 * margin)).collect();
        Self::new(family, fiber, vec![Window { inner, outer }], vec![FiberShift::ZERO], 0, base_box, fiber_box)
    }

    pub fn base_dim(&self) -> usize {
        self.family.base.objects.dim(0)
    }

    fn object_index(&self) -> usize {
        self.base_dim() + self.shift_coord
    }

    fn shifted(&self, p: &Point, alpha: usize, sign: f64) -> Point {
        let mut q = p.clone();
        q.coords[self.object_index()] += sign * self.shifts[alpha].value(p.coords[0]);
        q
    }

    fn shift_jacobian(&self, p: &Point, alpha: usize, sign: f64) -> DMatrix<f64> {
        let mut j = DMatrix::identity(p.dim(), p.dim());
        j[(self.object_index(), 0)] = sign * self.shifts[alpha].slope(p.coords[0]);
        j
    }

    fn chart_map(&self, space: &Arc<Space>, alpha: usize, sign: f64) -> SmoothMap {
        let (a, b) = (self.clone(), self.clone());
        SmoothMap::new(space.clone(), space.clone(), move |p| a.shifted(p, alpha, sign))
            .with_jacobian(move |p| b.shift_jacobian(p, alpha, sign))
    }

    /// `ψ^α` on arrows.
    pub fn chart_arrows(&self, alpha: usize) -> SmoothMap {
        self.chart_map(&self.family.total.arrows, alpha, 1.0)
    }

    pub fn chart_arrows_inv(&self, alpha: usize) -> SmoothMap {
        self.chart_map(&self.family.total.arrows, alpha, -1.0)
    }

    /// `ψ^α₀` on objects.
    pub fn chart_objects(&self, alpha: usize) -> SmoothMap {
        self.chart_map(&self.family.total.objects, alpha, 1.0)
    }

    pub fn chart_objects_inv(&self, alpha: usize) -> SmoothMap {
        self.chart_map(&self.family.total.objects, alpha, -1.0)
    }

    /// Fiber coordinates of `ψ^α₀(n, x)`.
    pub fn chart_fiber(&self, alpha: usize, n: &[f64], fiber: &[f64]) -> Vec<f64> {
        let mut y = fiber.to_vec();
        y[self.shift_coord] += self.shifts[alpha].value(n[0]);
        y
    }

    /// `Dψ^α⁻¹ (w, 0)` at any point (arrow or object) whose first coordinates are the base.
    pub fn chart_lift(&self, alpha: usize, p: &Point, w: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(p.dim());
        v.rows_mut(0, w.len()).copy_from(w);
        v[self.object_index()] = -self.shifts[alpha].slope(p.coords[0]) * w[0];
        v
    }

    /// Replaces the base coordinates of a point.
    fn with_base(p: &Point, n: &[f64]) -> Point {
        let mut q = p.clone();
        q.coords[..n.len()].copy_from_slice(n);
        q
    }

    fn sample_base(&self, alpha: usize, rng: &mut SampleRng) -> Vec<f64> {
        self.windows[alpha].outer.iter().map(|v| uniform(rng, v.0, v.1)).collect()
    }

    /// `pr₁∘ψ = π`, `ψ` commutes with `s`, `t`, `i`, `m`, `ψ⁻¹∘ψ = id`, and the window margin.
    pub fn check(&self, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<CheckReport> {
        for (a, w) in self.windows.iter().enumerate() {
            if w.margin() < tol.atlas_margin {
                return Err(Error::AtlasMismatch(format!("window {a} has margin {} < {}", w.margin(), tol.atlas_margin)));
            }
        }
        let total = &self.family.total;
        let dn = self.base_dim();
        let mut rep = CheckReport::new("trivializing atlas", n_samples * self.windows.len(), seed);
        for alpha in 0..self.windows.len() {
            let (pa, pa_inv, po) = (self.chart_arrows(alpha), self.chart_arrows_inv(alpha), self.chart_objects(alpha));
            for k in 0..n_samples {
                let mut rng = rng_for(seed ^ alpha as u64, k as u64);
                let n = self.sample_base(alpha, &mut rng);
                let (g, h) = total.sample_pair(&mut rng);
                let (g, h) = (Self::with_base(&g, &n), Self::with_base(&h, &n));
                let (pg, ph) = (pa.eval(&g), pa.eval(&h));
                let proj = self.family.base.arrows.dist(&Point::new(0, pg.coords[..dn].to_vec()), &self.family.pi(&g));
                let mul = total.arrows.dist(&pa.eval(&total.m(&g, &h)), &total.m(&pg, &ph));
                let src = total.objects.dist(&po.eval(&total.s(&g)), &total.s(&pg));
                let tgt = total.objects.dist(&po.eval(&total.t(&g)), &total.t(&pg));
                let inv = total.arrows.dist(&pa.eval(&total.i(&g)), &total.i(&pg));
                let back = total.arrows.dist(&pa_inv.eval(&pg), &g);
                let r = [proj, mul, src, tgt, inv, back].into_iter().fold(0.0, f64::max);
                rep.observe(r, || Witness::points(format!("chart {alpha}"), &[&g, &h]));
            }
        }
        Ok(rep.finish(tol.tol_alg))
    }
}

/// Weights `χ^α(n)` for all windows; `None` outside the cover.
pub type PartitionFn = dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync;

/// Normalized bumps positive exactly on the outer windows.
pub fn subordinate_partition(atlas: &TrivializingAtlas) -> Arc<PartitionFn> {
    let windows = atlas.windows.clone();
    Arc::new(move |n: &[f64]| {
        let raw: Vec<f64> = windows
            .iter()
            .map(|w| w.outer.iter().zip(n).map(|(v, x)| open_bump(*x, v.0, v.1)).product())
            .collect();
        let total: f64 = raw.iter().sum();
        (total > 0.0).then(|| raw.iter().map(|r| r / total).collect())
    })
}

/// Worst `|Σχ^α − 1|` over a grid of the base box refined `BOX_SPLIT_DEPTH` times per axis,
/// plus a support check: no weight may be positive outside its outer window.
pub fn partition_defect(atlas: &TrivializingAtlas, partition: &PartitionFn) -> (f64, Option<Vec<f64>>) {
    let per_axis = 1usize << BOX_SPLIT_DEPTH.min(10);
    let dn = atlas.base_dim();
    let total_points = (per_axis + 1).pow(dn as u32);
    let mut worst = 0.0f64;
    let mut at = None;
    for idx in 0..total_points {
        let mut rest = idx;
        let n: Vec<f64> = atlas
            .base_box
            .iter()
            .map(|b| {
                let i = rest % (per_axis + 1);
                rest /= per_axis + 1;
                b.lo + b.width() * i as f64 / per_axis as f64
            })
            .collect();
        let defect = match partition(&n) {
            None => f64::INFINITY,
            Some(w) => {
                let outside = w.iter().zip(&atlas.windows).any(|(x, win)| *x != 0.0 && !win.in_outer(&n));
                if outside || w.iter().any(|x| *x < 0.0) {
                    f64::INFINITY
                } else {
                    (w.iter().sum::<f64>() - 1.0).abs()
                }
            }
        };
        if defect > worst {
            worst = defect;
            at = Some(n);
        }
    }
    (worst, at)
}

/// `hor = Σ χ^α(π g) · Dψ^α⁻¹(w, 0)`.
pub fn glue_local_trivial(atlas: &TrivializingAtlas, partition: Arc<PartitionFn>, tol: &Tolerances) -> Result<Connection> {
    let (gap, _) = partition_defect(atlas, &*partition);
    if gap > tol.partition_tol {
        return Err(Error::PartitionGap(gap));
    }
    let weighted = |atlas: TrivializingAtlas, partition: Arc<PartitionFn>| -> Arc<HorFn> {
        Arc::new(move |p: &Point, w: &DVector<f64>| {
            let dn = atlas.base_dim();
            let weights = partition(&p.coords[..dn])?;
            let mut v = DVector::zeros(p.dim());
            for (alpha, chi) in weights.iter().enumerate() {
                if *chi != 0.0 {
                    v += atlas.chart_lift(alpha, p, w) * *chi;
                }
            }
            Some(v)
        })
    };
    let hor = weighted(atlas.clone(), partition.clone());
    let hor0 = weighted(atlas.clone(), partition);
    Ok(Connection::new(atlas.family.clone(), move |g, w| hor(g, w), move |x, w| hor0(x, w), "glued chart-flat lifts").claimed(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::{complement_check, multiplicativity_check_pointwise};
    use crate::report::MultVerdict;
    use crate::constructions::tests::{two_window_atlas, z2_family};
    use crate::transport::{arrow_path_family, completeness_probe, LiftSystem, PROBE_SPEED};

    #[test]
    fn shifted_charts_are_groupoid_isomorphisms() {
        let atlas = two_window_atlas();
        let rep = atlas.check(100, 3, &Tolerances::default()).unwrap();
        assert!(rep.passed, "{rep}");
    }

    #[test]
    fn thin_margin_is_rejected() {
        let (family, fiber) = z2_family();
        let w = Window::interval((-1.0, 1.0), (-1.05, 1.05));
        let atlas = TrivializingAtlas::new(family, fiber, vec![w], vec![FiberShift::ZERO], 0, vec![Interval::new(-1.0, 1.0)], vec![Interval::new(-1.0, 1.0)]).unwrap();
        assert!(matches!(atlas.check(10, 1, &Tolerances::default()), Err(Error::AtlasMismatch(_))));
    }

    #[test]
    fn single_window_glues_to_the_flat_connection() {
        let (family, fiber) = z2_family();
        let atlas = TrivializingAtlas::global(family, fiber, vec![Interval::new(-7.0, 7.0)], vec![Interval::new(-8.0, 8.0)], 0.5).unwrap();
        let tol = Tolerances::default();
        let c = glue_local_trivial(&atlas, subordinate_partition(&atlas), &tol).unwrap();
        let g = Point::new(1, vec![0.3, -1.2]);
        assert_eq!(c.lift(&g, &DVector::from_vec(vec![2.0])).unwrap(), DVector::from_vec(vec![2.0, 0.0]));
        assert!(multiplicativity_check_pointwise(&c, 50, 2, &tol).unwrap().verdict == MultVerdict::Multiplicative);
        let v = completeness_probe(&LiftSystem::arrows(&c), &*arrow_path_family(c.morphism.clone(), PROBE_SPEED), 100, 4, &tol).unwrap();
        assert!(!v.found_witness());
    }

    #[test]
    fn two_windows_glue_to_a_multiplicative_connection() {
        let atlas = two_window_atlas();
        let tol = Tolerances::default();
        let c = glue_local_trivial(&atlas, subordinate_partition(&atlas), &tol).unwrap();
        assert!(complement_check(&c, 50, 1, &tol).unwrap().check.passed);
        let rep = multiplicativity_check_pointwise(&c, 100, 2, &tol).unwrap();
        assert!(rep.verdict == MultVerdict::Multiplicative, "{rep:?}");
        // in the overlap the lift mixes both chart slopes
        let g = Point::new(0, vec![0.0, 1.0]);
        let v = c.lift(&g, &DVector::from_vec(vec![1.0])).unwrap();
        let (s0, s1) = (-atlas.shifts[0].slope(0.0), -atlas.shifts[1].slope(0.0));
        assert!(v[1] > s0.min(s1) && v[1] < s0.max(s1));
        let probe = completeness_probe(&LiftSystem::arrows(&c), &*arrow_path_family(c.morphism.clone(), PROBE_SPEED), 100, 5, &tol).unwrap();
        assert!(!probe.found_witness());
    }

    #[test]
    fn partition_with_a_gap_is_rejected() {
        let atlas = two_window_atlas();
        let broken: Arc<PartitionFn> = Arc::new(|n: &[f64]| Some(vec![if n[0] < 0.0 { 1.0 } else { 0.0 }, if n[0] > 0.2 { 1.0 } else { 0.0 }]));
        match glue_local_trivial(&atlas, broken, &Tolerances::default()) {
            Err(Error::PartitionGap(g)) => assert!((g - 1.0).abs() < 1e-12),
            other => panic!("expected a partition gap, got {other:?}"),
        }
    }
}
