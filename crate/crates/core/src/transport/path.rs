use crate::groupoid_core::MulMap;
use crate::numeric_core::{Point, SmoothMap, Space};
use nalgebra::DVector;
use std::fmt;
use std::sync::Arc;

pub type CurveFn = dyn Fn(f64) -> (Point, DVector<f64>) + Send + Sync;

/// Closed-form curve `[0, 1] → space` together with its derivative.
#[derive(Clone)]
pub struct BasePath {
    pub space: Arc<Space>,
    curve: Arc<CurveFn>,
    pub is_unit_path: bool,
    pub is_loop: bool,
}

impl fmt::Debug for BasePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p0, v0) = self.at(0.0);
        f.debug_struct("BasePath")
            .field("start", &p0.coords)
            .field("start_velocity", &v0.as_slice())
            .field("is_unit_path", &self.is_unit_path)
            .field("is_loop", &self.is_loop)
            .finish()
    }
}

impl BasePath {
    pub fn new(space: Arc<Space>, curve: impl Fn(f64) -> (Point, DVector<f64>) + Send + Sync + 'static) -> Self {
        Self { space, curve: Arc::new(curve), is_unit_path: false, is_loop: false }
    }

    pub fn tagged(mut self, is_unit_path: bool, is_loop: bool) -> Self {
        self.is_unit_path = is_unit_path;
        self.is_loop = is_loop;
        self
    }

    /// Point (angle-normalized) and velocity at time `t`.
    pub fn at(&self, t: f64) -> (Point, DVector<f64>) {
        let (mut p, v) = (self.curve)(t);
        self.space.normalize(&mut p);
        (p, v)
    }

    pub fn point(&self, t: f64) -> Point {
        self.at(t).0
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        self.at(t).1
    }

    pub fn constant(space: Arc<Space>, p: Point) -> Self {
        let n = p.dim();
        Self::new(space, move |_| (p.clone(), DVector::zeros(n))).tagged(true, true)
    }

    /// `t ↦ start + t · velocity` in patch coordinates.
    pub fn linear(space: Arc<Space>, start: Point, velocity: DVector<f64>) -> Self {
        Self::new(space, move |t| {
            let coords = start.coords.iter().zip(velocity.iter()).map(|(x, v)| x + t * v).collect();
            (Point::new(start.patch, coords), velocity.clone())
        })
    }

    /// `t ↦ start + amplitude · sin(2π k t)`, a loop that sweeps back and forth `k` times.
    pub fn oscillating(space: Arc<Space>, start: Point, amplitude: DVector<f64>, k: f64) -> Self {
        let w = std::f64::consts::TAU * k;
        Self::new(space, move |t| {
            let (s, c) = (w * t).sin_cos();
            let coords = start.coords.iter().zip(amplitude.iter()).map(|(x, a)| x + a * s).collect();
            (Point::new(start.patch, coords), &amplitude * (w * c))
        })
        .tagged(false, true)
    }

    /// `f ∘ γ`, with derivative `Df · γ'`.
    pub fn mapped(&self, map: &SmoothMap, fd_step: f64) -> BasePath {
        let me = self.clone();
        let map = map.clone();
        let unit = self.is_unit_path;
        BasePath::new(map.codomain.clone(), move |t| {
            let (p, v) = me.at(t);
            let q = map.eval(&p);
            let dv = match map.jacobian(&p, fd_step) {
                Ok(j) => j * v,
                Err(_) => DVector::from_element(q.dim(), f64::NAN),
            };
            (q, dv)
        })
        .tagged(unit, self.is_loop)
    }

    /// Pointwise product `t ↦ m(γ(t), η(t))` of a composable path pair.
    pub fn product(gamma: &BasePath, eta: &BasePath, mul: &MulMap, fd_step: f64) -> BasePath {
        let (g, e, m) = (gamma.clone(), eta.clone(), mul.clone());
        BasePath::new(mul.arrows.clone(), move |t| {
            let (a, va) = g.at(t);
            let (b, vb) = e.at(t);
            let q = m.eval(&a, &b);
            let dv = match m.jacobians(&a, &b, fd_step) {
                Ok((ja, jb)) => ja * va + jb * vb,
                Err(_) => DVector::from_element(q.dim(), f64::NAN),
            };
            (q, dv)
        })
        .tagged(gamma.is_unit_path && eta.is_unit_path, gamma.is_loop && eta.is_loop)
    }

    /// `t ↦ γ(1 − t)` with negated derivative.
    pub fn reverse(&self) -> BasePath {
        let me = self.clone();
        BasePath::new(self.space.clone(), move |t| {
            let (p, v) = me.at(1.0 - t);
            (p, -v)
        })
        .tagged(self.is_unit_path, self.is_loop)
    }

    /// Reparametrized restriction `s ↦ γ(a + (b − a) s)`.
    pub fn segment(&self, a: f64, b: f64) -> BasePath {
        let me = self.clone();
        BasePath::new(self.space.clone(), move |s| {
            let (p, v) = me.at(a + (b - a) * s);
            (p, v * (b - a))
        })
        .tagged(self.is_unit_path, false)
    }

    /// Coordinate concatenation of paths on factor spaces into a path on a product space.
    pub fn combine(space: Arc<Space>, parts: Vec<BasePath>, patch_of: impl Fn(&[usize]) -> usize + Send + Sync + 'static) -> BasePath {
        let unit = parts.iter().all(|p| p.is_unit_path);
        let lp = parts.iter().all(|p| p.is_loop);
        BasePath::new(space, move |t| {
            let mut coords = Vec::new();
            let mut vel = Vec::new();
            let mut patches = Vec::with_capacity(parts.len());
            for part in &parts {
                let (p, v) = part.at(t);
                patches.push(p.patch);
                coords.extend(p.coords);
                vel.extend(v.iter().copied());
            }
            (Point::new(patch_of(&patches), coords), DVector::from_vec(vel))
        })
        .tagged(unit, lp)
    }

    /// Largest deviation between the closed-form derivative and central differences.
    pub fn derivative_defect(&self, samples: usize, h: f64) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..samples {
            let t = (k as f64 + 0.5) / samples as f64;
            let (p, v) = self.at(t);
            let (pp, _) = self.at(t + h);
            let (pm, _) = self.at(t - h);
            let patch = self.space.patch(p.patch);
            let fd: Vec<f64> = patch.diff(&pp.coords, &pm.coords).iter().map(|d| d / (2.0 * h)).collect();
            let defect = fd.iter().zip(v.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(defect);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric_core::{CoordKind, Patch};

    #[test]
    fn linear_path_wraps_angles() {
        let s1 = Arc::new(Space::single(Patch::new("s1", vec![CoordKind::Angle])));
        let p = BasePath::linear(s1, Point::new(0, vec![6.0]), DVector::from_element(1, 1.0));
        assert!(p.point(1.0).coords[0] < 1.0);
        assert!(p.derivative_defect(20, 1e-6) < 1e-6);
    }

    #[test]
    fn reverse_and_segment() {
        let r = Arc::new(Space::single(Patch::lines("r", 1)));
        let p = BasePath::oscillating(r, Point::new(0, vec![0.0]), DVector::from_element(1, 2.0), 1.0);
        assert!(p.derivative_defect(20, 1e-6) < 1e-5);
        let q = p.reverse();
        assert!((q.point(0.3).coords[0] - p.point(0.7).coords[0]).abs() < 1e-15);
        assert!((q.velocity(0.3)[0] + p.velocity(0.7)[0]).abs() < 1e-15);
        let s = p.segment(0.25, 0.5);
        assert!((s.point(1.0).coords[0] - p.point(0.5).coords[0]).abs() < 1e-15);
        assert!(s.derivative_defect(20, 1e-6) < 1e-5);
    }
}
