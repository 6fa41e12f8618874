use super::space::{Point, Space};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

pub type EvalFn = dyn Fn(&Point) -> Point + Send + Sync;
pub type JacFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;

/// A coordinate map between spaces, with an optional analytic Jacobian.
#[derive(Clone)]
pub struct SmoothMap {
    pub domain: Arc<Space>,
    pub codomain: Arc<Space>,
    eval: Arc<EvalFn>,
    jac: Option<Arc<JacFn>>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("domain_patches", &self.domain.patches.len())
            .field("codomain_patches", &self.codomain.patches.len())
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new(
        domain: Arc<Space>,
        codomain: Arc<Space>,
        eval: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self { domain, codomain, eval: Arc::new(eval), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn without_jacobian(mut self) -> Self {
        self.jac = None;
        self
    }

    pub fn identity(space: Arc<Space>) -> Self {
        Self::new(space.clone(), space, |p| p.clone())
            .with_jacobian(|p| DMatrix::identity(p.dim(), p.dim()))
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Evaluates and normalizes the image into the codomain's angle ranges.
    pub fn eval(&self, p: &Point) -> Point {
        let mut q = (self.eval)(p);
        self.codomain.normalize(&mut q);
        q
    }

    pub fn analytic_jacobian(&self, p: &Point) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(p))
    }

    /// Central differences with step `h`; angle outputs are differenced through wraparound.
    pub fn fd_jacobian(&self, p: &Point, h: f64) -> Result<DMatrix<f64>> {
        let patch = self.domain.patch(p.patch);
        let base = self.eval(p);
        let out = self.codomain.patch(base.patch);
        let mut jac = DMatrix::zeros(out.dim(), p.dim());
        for j in 0..p.dim() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.coords[j] += h;
            minus.coords[j] -= h;
            if patch.is_excluded(&plus.coords) || patch.is_excluded(&minus.coords) {
                return Err(Error::EvaluationOutsideDomain(format!(
                    "finite-difference probe of coordinate {j} at {:?} hits an exclusion",
                    p.coords
                )));
            }
            let fp = self.eval(&plus);
            let fm = self.eval(&minus);
            if fp.patch != base.patch || fm.patch != base.patch {
                return Err(Error::EvaluationOutsideDomain(format!(
                    "finite-difference probe at {:?} leaves the image patch",
                    p.coords
                )));
            }
            let d = out.diff(&fp.coords, &fm.coords);
            for (i, di) in d.iter().enumerate() {
                jac[(i, j)] = di / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Analytic Jacobian when supplied, else central finite differences.
    pub fn jacobian(&self, p: &Point, fd_step: f64) -> Result<DMatrix<f64>> {
        match &self.jac {
            Some(j) => Ok(j(p)),
            None => self.fd_jacobian(p, fd_step),
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &SmoothMap) -> SmoothMap {
        let (f, g) = (self.clone(), other.clone());
        let eval_f = self.clone();
        let eval_g = other.clone();
        let mut out = SmoothMap::new(self.domain.clone(), other.codomain.clone(), move |p| eval_g.eval(&eval_f.eval(p)));
        if f.jac.is_some() && g.jac.is_some() {
            out = out.with_jacobian(move |p| {
                let q = f.eval(p);
                g.analytic_jacobian(&q).unwrap() * f.analytic_jacobian(p).unwrap()
            });
        }
        out
    }
}

/// Free-function form of [`SmoothMap::jacobian`].
pub fn jacobian(map: &SmoothMap, p: &Point, fd_step: f64) -> Result<DMatrix<f64>> {
    map.jacobian(p, fd_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric_core::space::{CoordKind, Patch};
    use std::f64::consts::PI;

    fn line() -> Arc<Space> {
        Arc::new(Space::single(Patch::lines("r", 1)))
    }

    #[test]
    fn linear_map_exact() {
        let plane = Arc::new(Space::single(Patch::lines("r2", 2)));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let a2 = a.clone();
        let a3 = a.clone();
        let map = SmoothMap::new(plane.clone(), plane, move |p| Point::new(0, (&a2 * p.vector()).as_slice().to_vec()))
            .with_jacobian(move |_| a3.clone());
        let p = Point::new(0, vec![0.3, -0.7]);
        assert!((map.jacobian(&p, 1e-6).unwrap() - &a).norm() < 1e-12);
        assert!((map.fd_jacobian(&p, 1e-6).unwrap() - &a).norm() < 1e-8);
    }

    #[test]
    fn sine_at_zero() {
        let map = SmoothMap::new(line(), line(), |p| Point::new(0, vec![p.coords[0].sin()]));
        let j = map.jacobian(&Point::new(0, vec![0.0]), 1e-6).unwrap();
        assert!((j[(0, 0)] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn doubling_angle_across_wrap() {
        let circle = Arc::new(Space::single(Patch::new("s1", vec![CoordKind::Angle])));
        let map = SmoothMap::new(circle.clone(), circle, |p| Point::new(0, vec![2.0 * p.coords[0]]));
        let j = map.jacobian(&Point::new(0, vec![1.5 * PI]), 1e-6).unwrap();
        assert!((j[(0, 0)] - 2.0).abs() < 1e-5);
        // image of 3π/2 under doubling lands on π; probes at 0 wrap as well
        let j0 = map.jacobian(&Point::new(0, vec![0.0]), 1e-6).unwrap();
        assert!((j0[(0, 0)] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn probe_into_exclusion_is_an_error() {
        use crate::numeric_core::space::Exclusion;
        let punctured = Arc::new(Space::single(Patch::lines("r*", 1).with_exclusion(Exclusion::point(&[0.0], 1e-3))));
        let map = SmoothMap::new(punctured, line(), |p| p.clone());
        assert!(matches!(
            map.fd_jacobian(&Point::new(0, vec![1e-3 + 5e-7]), 1e-6),
            Err(Error::EvaluationOutsideDomain(_))
        ));
    }

    #[test]
    fn composition_chains_jacobians() {
        let f = SmoothMap::new(line(), line(), |p| Point::new(0, vec![3.0 * p.coords[0]]))
            .with_jacobian(|_| DMatrix::from_element(1, 1, 3.0));
        let g = SmoothMap::new(line(), line(), |p| Point::new(0, vec![p.coords[0] * p.coords[0]]))
            .with_jacobian(|p| DMatrix::from_element(1, 1, 2.0 * p.coords[0]));
        let h = f.then(&g);
        let p = Point::new(0, vec![0.5]);
        assert_eq!(h.eval(&p).coords[0], 2.25);
        assert!((h.jacobian(&p, 1e-6).unwrap()[(0, 0)] - 9.0).abs() < 1e-12);
    }
}
