//! Lie groupoids and groupoid morphisms as coordinate data, with sampled axiom checks,
//! the example catalog, and fibration-class probes.

pub mod catalog;
pub mod probe;

pub use catalog::{catalog, CatalogEntry, Params};
pub use probe::{fibration_probe, FibrationVerdict};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numeric_core::{Point, SmoothMap, Space};
use crate::report::{CheckReport, Witness};
use crate::rng::{rng_for, SampleRng};
use crate::transport::BasePath;
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

pub type MulEval = dyn Fn(&Point, &Point) -> Point + Send + Sync;
pub type MulJac = dyn Fn(&Point, &Point) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync;

/// Multiplication on composable pairs. Implementations read the middle object from the
/// second factor, so a pair that is composable only up to `tol_compose` is snapped onto
/// exact composability before evaluation.
#[derive(Clone)]
pub struct MulMap {
    pub arrows: Arc<Space>,
    eval: Arc<MulEval>,
    jac: Option<Arc<MulJac>>,
}

impl MulMap {
    pub fn new(arrows: Arc<Space>, eval: impl Fn(&Point, &Point) -> Point + Send + Sync + 'static) -> Self {
        Self { arrows, eval: Arc::new(eval), jac: None }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&Point, &Point) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn eval(&self, g: &Point, h: &Point) -> Point {
        let mut q = (self.eval)(g, h);
        self.arrows.normalize(&mut q);
        q
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Partial Jacobians `(∂m/∂g, ∂m/∂h)` of the snapped extension.
    pub fn jacobians(&self, g: &Point, h: &Point, fd_step: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if let Some(j) = &self.jac {
            return Ok(j(g, h));
        }
        let base = self.eval(g, h);
        let out = self.arrows.patch(base.patch);
        let column = |a: &Point, b: &Point, c: &Point, d: &Point| -> Result<Vec<f64>> {
            let fp = self.eval(a, b);
            let fm = self.eval(c, d);
            if fp.patch != base.patch || fm.patch != base.patch {
                return Err(Error::EvaluationOutsideDomain("multiplication probe leaves the image patch".into()));
            }
            Ok(out.diff(&fp.coords, &fm.coords).iter().map(|v| v / (2.0 * fd_step)).collect())
        };
        let mut jg = DMatrix::zeros(out.dim(), g.dim());
        for j in 0..g.dim() {
            let (mut p, mut m) = (g.clone(), g.clone());
            p.coords[j] += fd_step;
            m.coords[j] -= fd_step;
            for (i, v) in column(&p, h, &m, h)?.into_iter().enumerate() {
                jg[(i, j)] = v;
            }
        }
        let mut jh = DMatrix::zeros(out.dim(), h.dim());
        for j in 0..h.dim() {
            let (mut p, mut m) = (h.clone(), h.clone());
            p.coords[j] += fd_step;
            m.coords[j] -= fd_step;
            for (i, v) in column(g, &p, g, &m)?.into_iter().enumerate() {
                jh[(i, j)] = v;
            }
        }
        Ok((jg, jh))
    }
}

pub type ArrowSampler = dyn Fn(&mut SampleRng) -> Point + Send + Sync;
pub type PairSampler = dyn Fn(&mut SampleRng) -> (Point, Point) + Send + Sync;
pub type FiberSampler = dyn Fn(&Point, &mut SampleRng) -> Option<Point> + Send + Sync;
pub type FiberQuadrature = dyn Fn(&Point, usize) -> Vec<(Point, f64)> + Send + Sync;
pub type PathPairSampler = dyn Fn(&Point, &Point, &mut SampleRng, f64) -> (BasePath, BasePath) + Send + Sync;

/// Declared (not verified) global properties of a catalog groupoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupoidMeta {
    pub proper: bool,
    pub source_proper: bool,
    pub source_connected: bool,
    /// Every arrow is a unit (the base of a family).
    pub is_unit: bool,
}

#[derive(Clone)]
pub struct Groupoid {
    pub name: String,
    pub objects: Arc<Space>,
    pub arrows: Arc<Space>,
    pub src: SmoothMap,
    pub tgt: SmoothMap,
    pub unit: SmoothMap,
    pub inv: SmoothMap,
    pub mul: MulMap,
    pub object_sampler: Arc<ArrowSampler>,
    pub arrow_sampler: Arc<ArrowSampler>,
    pub pair_sampler: Arc<PairSampler>,
    pub sfiber_sampler: Arc<FiberSampler>,
    /// Normalized Haar nodes on the target fiber over an object, when the fibers are compact.
    pub tfiber_quadrature: Option<Arc<FiberQuadrature>>,
    /// Composable path pair `(γ, η)` with `γ(0) = g`, `η(0) = h` and `s∘γ = t∘η`.
    pub path_pair: Arc<PathPairSampler>,
    pub meta: GroupoidMeta,
}

impl fmt::Debug for Groupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Groupoid")
            .field("name", &self.name)
            .field("object_patches", &self.objects.patches.len())
            .field("arrow_patches", &self.arrows.patches.len())
            .field("meta", &self.meta)
            .finish()
    }
}

impl Groupoid {
    pub fn sample_arrow(&self, rng: &mut SampleRng) -> Point {
        (self.arrow_sampler)(rng)
    }

    pub fn sample_object(&self, rng: &mut SampleRng) -> Point {
        (self.object_sampler)(rng)
    }

    pub fn sample_pair(&self, rng: &mut SampleRng) -> (Point, Point) {
        (self.pair_sampler)(rng)
    }

    pub fn sample_sfiber(&self, x: &Point, rng: &mut SampleRng) -> Option<Point> {
        (self.sfiber_sampler)(x, rng)
    }

    pub fn s(&self, g: &Point) -> Point {
        self.src.eval(g)
    }

    pub fn t(&self, g: &Point) -> Point {
        self.tgt.eval(g)
    }

    pub fn u(&self, x: &Point) -> Point {
        self.unit.eval(x)
    }

    pub fn i(&self, g: &Point) -> Point {
        self.inv.eval(g)
    }

    pub fn m(&self, g: &Point, h: &Point) -> Point {
        self.mul.eval(g, h)
    }

    /// A single path through `g`, taken as the first leg of a pair through `(g, u(s(g)))`.
    pub fn path_through(&self, g: &Point, rng: &mut SampleRng, speed: f64) -> BasePath {
        let unit = self.u(&self.s(g));
        (self.path_pair)(g, &unit, rng, speed).0
    }

    /// Copy with a replaced multiplication (used for injected-defect tests).
    pub fn with_mul(&self, mul: MulMap) -> Groupoid {
        let mut g = self.clone();
        g.mul = mul;
        g
    }
}

/// Classification tag attached by the catalog; it records how a morphism was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphismKind {
    Generic,
    Family,
    Action,
    Projection,
    MoritaPullback,
}

#[derive(Debug, Clone, Default)]
pub struct MorphismMeta {
    /// Objects where the fibration probe should look first (e.g. removed points).
    pub probe_objects: Vec<Point>,
    pub source_connected_kernel: bool,
}

/// Kernel `K = π⁻¹(u(N))` as a family over the base objects, embedded in the total arrows.
#[derive(Clone)]
pub struct KernelData {
    pub family: Arc<GroupoidMorphism>,
    pub embed: SmoothMap,
    /// Left inverse of `embed`, defined near `K`.
    pub chart: SmoothMap,
}

#[derive(Clone)]
pub struct GroupoidMorphism {
    pub name: String,
    pub total: Arc<Groupoid>,
    pub base: Arc<Groupoid>,
    pub arrow_map: SmoothMap,
    pub object_map: SmoothMap,
    pub kind: MorphismKind,
    pub kernel: Option<Arc<KernelData>>,
    pub meta: MorphismMeta,
}

impl fmt::Debug for GroupoidMorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupoidMorphism")
            .field("name", &self.name)
            .field("total", &self.total.name)
            .field("base", &self.base.name)
            .field("kind", &self.kind)
            .finish()
    }
}

impl GroupoidMorphism {
    pub fn pi(&self, g: &Point) -> Point {
        self.arrow_map.eval(g)
    }

    pub fn pi0(&self, x: &Point) -> Point {
        self.object_map.eval(x)
    }

    pub fn is_family(&self) -> bool {
        self.kind == MorphismKind::Family
    }

    pub fn identity(g: Arc<Groupoid>) -> GroupoidMorphism {
        GroupoidMorphism {
            name: format!("id({})", g.name),
            total: g.clone(),
            base: g.clone(),
            arrow_map: SmoothMap::identity(g.arrows.clone()),
            object_map: SmoothMap::identity(g.objects.clone()),
            kind: MorphismKind::Generic,
            kernel: None,
            meta: MorphismMeta::default(),
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &GroupoidMorphism) -> GroupoidMorphism {
        GroupoidMorphism {
            name: format!("{} then {}", self.name, other.name),
            total: self.total.clone(),
            base: other.base.clone(),
            arrow_map: self.arrow_map.then(&other.arrow_map),
            object_map: self.object_map.then(&other.object_map),
            kind: if other.kind == MorphismKind::Family { MorphismKind::Family } else { MorphismKind::Generic },
            kernel: None,
            meta: MorphismMeta::default(),
        }
    }
}

/// Sampled groupoid axioms: unit, source/target of products, associativity, unit and
/// inverse laws, pair composability and source-fiber membership.
pub fn check_axioms(g: &Groupoid, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<CheckReport> {
    let mut rep = CheckReport::new(format!("axioms({})", g.name), n_samples, seed);
    let (arr, obj) = (&g.arrows, &g.objects);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let x = g.sample_object(&mut rng);
        let ux = g.u(&x);
        rep.observe(obj.dist(&g.s(&ux), &x).max(obj.dist(&g.t(&ux), &x)), || Witness::points("unit", &[&x]));

        let (a, b) = g.sample_pair(&mut rng);
        let compose_gap = obj.dist(&g.s(&a), &g.t(&b));
        if compose_gap > tol.tol_compose {
            return Err(Error::SamplerFailure(format!("pair sampler of {} produced a gap of {compose_gap:e}", g.name)));
        }
        let ab = g.m(&a, &b);
        rep.observe(obj.dist(&g.s(&ab), &g.s(&b)).max(obj.dist(&g.t(&ab), &g.t(&a))), || {
            Witness::points("source/target of product", &[&a, &b])
        });

        let c = g
            .sample_sfiber(&g.t(&a), &mut rng)
            .ok_or_else(|| Error::SamplerFailure(format!("empty source fiber in {}", g.name)))?;
        rep.observe(obj.dist(&g.s(&c), &g.t(&a)), || Witness::points("source fiber", &[&c]));
        let assoc_l = g.m(&g.m(&c, &a), &b);
        let assoc_r = g.m(&c, &g.m(&a, &b));
        rep.observe(arr.dist(&assoc_l, &assoc_r), || Witness::points("associativity", &[&c, &a, &b]));

        let h = g.sample_arrow(&mut rng);
        rep.observe(arr.dist(&g.m(&g.u(&g.t(&h)), &h), &h).max(arr.dist(&g.m(&h, &g.u(&g.s(&h))), &h)), || {
            Witness::points("unit law", &[&h])
        });
        let hi = g.i(&h);
        rep.observe(
            arr.dist(&g.m(&h, &hi), &g.u(&g.t(&h)))
                .max(arr.dist(&g.m(&hi, &h), &g.u(&g.s(&h))))
                .max(obj.dist(&g.s(&hi), &g.t(&h))),
            || Witness::points("inverse law", &[&h]),
        );
    }
    Ok(rep.finish(tol.tol_alg))
}

/// Sampled functoriality of a morphism.
pub fn morphism_check(pi: &GroupoidMorphism, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<CheckReport> {
    let (g, h) = (&pi.total, &pi.base);
    let mut rep = CheckReport::new(format!("morphism({})", pi.name), n_samples, seed);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let x = g.sample_object(&mut rng);
        rep.observe(h.arrows.dist(&pi.pi(&g.u(&x)), &h.u(&pi.pi0(&x))), || Witness::points("unit", &[&x]));
        let a = g.sample_arrow(&mut rng);
        let pa = pi.pi(&a);
        rep.observe(
            h.objects.dist(&h.s(&pa), &pi.pi0(&g.s(&a))).max(h.objects.dist(&h.t(&pa), &pi.pi0(&g.t(&a)))),
            || Witness::points("source/target", &[&a]),
        );
        let (p, q) = g.sample_pair(&mut rng);
        if g.objects.dist(&g.s(&p), &g.t(&q)) > tol.tol_compose {
            return Err(Error::SamplerFailure(format!("pair sampler of {} not composable", g.name)));
        }
        rep.observe(h.arrows.dist(&pi.pi(&g.m(&p, &q)), &h.m(&pi.pi(&p), &pi.pi(&q))), || {
            Witness::points("product", &[&p, &q])
        });
    }
    Ok(rep.finish(tol.tol_alg))
}
