use super::{Groupoid, GroupoidMeta, GroupoidMorphism, KernelData, MorphismKind, MorphismMeta, MulMap};
use crate::error::{Error, Result};
use crate::numeric_core::{normalize_angle, wrap_difference, CoordKind, Exclusion, Patch, Point, SmoothMap, Space};
use crate::rng::{avoid, index, symmetric, uniform, SampleRng};
use crate::transport::BasePath;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Half-width of the box that line coordinates are sampled from.
pub const SAMPLE_BOX: f64 = 2.0;

/// String-valued catalog parameters, e.g. `order = 2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.0.get(key).map(String::as_str).unwrap_or(default)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidParams(format!("`{key}` must be a finite number, got `{v}`"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.trim().parse::<usize>().map_err(|_| Error::InvalidParams(format!("`{key}` must be a count, got `{v}`"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key).map(|s| s.trim()) {
            None => Ok(default),
            Some("1") | Some("true") => Ok(true),
            Some("0") | Some("false") => Ok(false),
            Some(v) => Err(Error::InvalidParams(format!("`{key}` must be a boolean, got `{v}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Groupoid(Arc<Groupoid>),
    Morphism(Arc<GroupoidMorphism>),
}

impl CatalogEntry {
    pub fn groupoid(&self) -> Option<&Arc<Groupoid>> {
        match self {
            CatalogEntry::Groupoid(g) => Some(g),
            CatalogEntry::Morphism(_) => None,
        }
    }

    pub fn morphism(&self) -> Option<&Arc<GroupoidMorphism>> {
        match self {
            CatalogEntry::Morphism(m) => Some(m),
            CatalogEntry::Groupoid(_) => None,
        }
    }

    /// Every groupoid reachable from the entry (total and base for morphisms).
    pub fn groupoids(&self) -> Vec<Arc<Groupoid>> {
        match self {
            CatalogEntry::Groupoid(g) => vec![g.clone()],
            CatalogEntry::Morphism(m) => vec![m.total.clone(), m.base.clone()],
        }
    }
}

pub const CATALOG_NAMES: &[&str] = &[
    "pair",
    "action",
    "group_bundle",
    "punctured_group_bundle",
    "pullback",
    "trivial_family",
    "disjoint_union",
    "product_with_manifold",
];

/// Named catalog instances.
///
/// | name | params | result |
/// |---|---|---|
/// | `pair` | `space` ∈ line, circle, plane, punctured_line; `x0` | `M × M ⇉ M` |
/// | `action` | `group` ∈ so2, cyclic; `order`; `trivial` | `K ⋉ ℝ²` |
/// | `group_bundle` | `group` ∈ cyclic, circle; `order` | `ℝ × Γ ⇉ ℝ` |
/// | `punctured_group_bundle` | `order`; `x0` | `ℝ × Γ` minus `{x0} × (Γ ∖ e)` |
/// | `pullback` | `base` ∈ circle_group, circle_bundle; `fiber` ∈ line, punctured_line | projection `π₀*H → H` |
/// | `trivial_family` | `fiber` ∈ cyclic, so2_action, pair_line | `N × 𝓕 → N` |
/// | `disjoint_union` | `order`; `x0` | `H ⊔ H* → H` |
/// | `product_with_manifold` | `base` ∈ pair_line, circle_bundle; `dim` | `H × P → H` |
pub fn catalog(name: &str, params: &Params) -> Result<CatalogEntry> {
    let x0 = params.f64_or("x0", 0.0)?;
    let order = params.usize_or("order", 2)?;
    match name {
        "pair" => {
            let patch = match params.str_or("space", "line") {
                "line" => Patch::lines("x", 1),
                "plane" => Patch::lines("xy", 2),
                "circle" => Patch::new("theta", vec![CoordKind::Angle]),
                "punctured_line" => punctured_line(x0, 1e-3),
                other => return Err(Error::InvalidParams(format!("unknown pair space `{other}`"))),
            };
            Ok(CatalogEntry::Groupoid(Arc::new(pair_groupoid(patch))))
        }
        "action" => {
            let trivial = params.bool_or("trivial", false)?;
            match params.str_or("group", "so2") {
                "so2" => Ok(CatalogEntry::Groupoid(Arc::new(so2_action(trivial)))),
                "cyclic" => {
                    nonzero(order)?;
                    Ok(CatalogEntry::Groupoid(Arc::new(cyclic_action(order))))
                }
                other => Err(Error::InvalidParams(format!("unknown acting group `{other}`"))),
            }
        }
        "group_bundle" => {
            let group = match params.str_or("group", "cyclic") {
                "cyclic" => {
                    nonzero(order)?;
                    cyclic_group(order)
                }
                "circle" => abelian_group("S1", vec![CoordKind::Angle]),
                other => return Err(Error::InvalidParams(format!("unknown bundle group `{other}`"))),
            };
            Ok(CatalogEntry::Groupoid(Arc::new(group_bundle(Patch::lines("x", 1), &group))))
        }
        "punctured_group_bundle" => {
            if order < 2 {
                return Err(Error::InvalidParams("a punctured bundle needs order >= 2".into()));
            }
            Ok(CatalogEntry::Groupoid(Arc::new(punctured_group_bundle(order, x0, 1e-3))))
        }
        "pullback" => {
            let base = match params.str_or("base", "circle_group") {
                "circle_group" => abelian_group("S1", vec![CoordKind::Angle]),
                "circle_bundle" => group_bundle(Patch::lines("n", 1), &abelian_group("S1", vec![CoordKind::Angle])),
                other => return Err(Error::InvalidParams(format!("unknown pullback base `{other}`"))),
            };
            let fiber = match params.str_or("fiber", "line") {
                "line" => Patch::lines("f", 1),
                "punctured_line" => punctured_line(x0, 1e-3),
                other => return Err(Error::InvalidParams(format!("unknown pullback fiber `{other}`"))),
            };
            Ok(CatalogEntry::Morphism(Arc::new(morita_projection(Arc::new(base), fiber))))
        }
        "trivial_family" => {
            let fiber = match params.str_or("fiber", "cyclic") {
                "cyclic" => {
                    nonzero(order)?;
                    group_bundle(Patch::lines("x", 1), &cyclic_group(order))
                }
                "so2_action" => so2_action(false),
                "pair_line" => pair_groupoid(Patch::lines("x", 1)),
                other => return Err(Error::InvalidParams(format!("unknown family fiber `{other}`"))),
            };
            Ok(CatalogEntry::Morphism(Arc::new(trivial_family(Patch::lines("n", 1), Arc::new(fiber)))))
        }
        "disjoint_union" => {
            if order < 2 {
                return Err(Error::InvalidParams("the covering example needs order >= 2".into()));
            }
            Ok(CatalogEntry::Morphism(Arc::new(covering_counterexample(order, x0, 1e-3))))
        }
        "product_with_manifold" => {
            let dim = params.usize_or("dim", 1)?;
            let base = match params.str_or("base", "pair_line") {
                "pair_line" => pair_groupoid(Patch::lines("n", 1)),
                "circle_bundle" => group_bundle(Patch::lines("n", 1), &abelian_group("S1", vec![CoordKind::Angle])),
                other => return Err(Error::InvalidParams(format!("unknown base `{other}`"))),
            };
            Ok(CatalogEntry::Morphism(Arc::new(product_with_manifold(Arc::new(base), Patch::lines("p", dim)))))
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

fn nonzero(order: usize) -> Result<()> {
    if order == 0 {
        Err(Error::InvalidParams("order must be positive".into()))
    } else {
        Ok(())
    }
}

/// `ℝ ∖ {x0}` as a single patch with an exclusion ball of radius `delta`.
pub fn punctured_line(x0: f64, delta: f64) -> Patch {
    Patch::lines("x", 1).with_exclusion(Exclusion::point(&[x0], delta))
}

// ---------------------------------------------------------------------------
// helpers

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

fn zeros(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::zeros(r, c)
}

/// Assembles a block matrix from rows of blocks with consistent shapes.
fn blocks(rows: &[Vec<DMatrix<f64>>]) -> DMatrix<f64> {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut out = zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (row, h) in rows.iter().zip(&heights) {
        let mut c0 = 0;
        for (b, w) in row.iter().zip(&widths) {
            debug_assert_eq!((b.nrows(), b.ncols()), (*h, *w));
            out.view_mut((r0, c0), (*h, *w)).copy_from(b);
            c0 += w;
        }
        r0 += h;
    }
    out
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    blocks(&[vec![a.clone(), zeros(a.nrows(), b.ncols())], vec![zeros(b.nrows(), a.ncols()), b.clone()]])
}

fn rotation(theta: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (s, c) = theta.sin_cos();
    (DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), DMatrix::from_row_slice(2, 2, &[-s, -c, c, -s]))
}

fn rotate(theta: f64, p: &[f64]) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Uniform draw from a patch: lines in the sample box, angles on the full circle, pushed
/// out to twice the radius of every exclusion ball.
pub fn sample_in_patch(patch: &Patch, rng: &mut SampleRng) -> Vec<f64> {
    let mut x: Vec<f64> = patch
        .kinds
        .iter()
        .map(|k| match k {
            CoordKind::Line => symmetric(rng, SAMPLE_BOX),
            CoordKind::Angle => uniform(rng, 0.0, TAU),
        })
        .collect();
    push_out(patch, &mut x);
    x
}

fn push_out(patch: &Patch, x: &mut [f64]) {
    for e in &patch.excluded {
        if e.distance(&patch.kinds, x) < 2.0 * e.radius {
            let (i, c) = e.coords[0];
            x[i] = match patch.kinds[i] {
                CoordKind::Line => avoid(x[i], c, 2.0 * e.radius),
                CoordKind::Angle => normalize_angle(c + avoid(wrap_difference(x[i] - c), 0.0, 2.0 * e.radius)),
            };
        }
    }
}

fn random_velocity(dim: usize, rng: &mut SampleRng, speed: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| symmetric(rng, speed))
}

fn linear_coords(start: &[f64], v: &DVector<f64>, t: f64) -> Vec<f64> {
    start.iter().zip(v.iter()).map(|(x, w)| x + t * w).collect()
}

fn to_point_map(domain: Arc<Space>) -> SmoothMap {
    let pt = Arc::new(Space::point());
    SmoothMap::new(domain, pt, |_| Point::new(0, Vec::new())).with_jacobian(|p| zeros(0, p.dim()))
}

/// Splits points of `left × right` into factors and joins them back.
#[derive(Clone)]
struct Split {
    left: Arc<Space>,
    right_len: usize,
}

impl Split {
    fn new(left: &Arc<Space>, right: &Arc<Space>) -> Self {
        Self { left: left.clone(), right_len: right.patches.len() }
    }

    fn split(&self, p: &Point) -> (Point, Point) {
        let (i, j) = (p.patch / self.right_len, p.patch % self.right_len);
        let d = self.left.dim(i);
        (Point::new(i, p.coords[..d].to_vec()), Point::new(j, p.coords[d..].to_vec()))
    }

    fn join(&self, a: &Point, b: &Point) -> Point {
        let mut coords = a.coords.clone();
        coords.extend_from_slice(&b.coords);
        Point::new(a.patch * self.right_len + b.patch, coords)
    }
}

fn product_map(f: &SmoothMap, g: &SmoothMap, dom: Arc<Space>, cod: Arc<Space>) -> SmoothMap {
    let ds = Split::new(&f.domain, &g.domain);
    let cs = Split::new(&f.codomain, &g.codomain);
    let (fe, ge, d2) = (f.clone(), g.clone(), ds.clone());
    let mut out = SmoothMap::new(dom, cod, move |p| {
        let (a, b) = d2.split(p);
        cs.join(&fe.eval(&a), &ge.eval(&b))
    });
    if f.has_analytic_jacobian() && g.has_analytic_jacobian() {
        let (fj, gj) = (f.clone(), g.clone());
        out = out.with_jacobian(move |p| {
            let (a, b) = ds.split(p);
            block_diag(&fj.analytic_jacobian(&a).unwrap(), &gj.analytic_jacobian(&b).unwrap())
        });
    }
    out
}

/// Map on `A ⊔ B` acting by `f` on the first components and by `g` on the rest.
fn union_map(f: &SmoothMap, g: &SmoothMap, dom: Arc<Space>, cod: Arc<Space>) -> SmoothMap {
    let (dn, cn) = (f.domain.patches.len(), f.codomain.patches.len());
    let (fe, ge) = (f.clone(), g.clone());
    let mut out = SmoothMap::new(dom, cod, move |p| {
        if p.patch < dn {
            fe.eval(p)
        } else {
            let q = ge.eval(&Point::new(p.patch - dn, p.coords.clone()));
            Point::new(q.patch + cn, q.coords)
        }
    });
    if f.has_analytic_jacobian() && g.has_analytic_jacobian() {
        let (fj, gj) = (f.clone(), g.clone());
        out = out.with_jacobian(move |p| {
            if p.patch < dn {
                fj.analytic_jacobian(p).unwrap()
            } else {
                gj.analytic_jacobian(&Point::new(p.patch - dn, p.coords.clone())).unwrap()
            }
        });
    }
    out
}

fn uniform_circle_nodes(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    (0..n).map(|j| (TAU * j as f64 / n as f64, 1.0 / n as f64)).collect()
}

// ---------------------------------------------------------------------------
// builders

/// The unit groupoid `M ⇉ M`: every arrow is a unit.
pub fn unit_groupoid(objects: Arc<Space>) -> Groupoid {
    let name = format!("unit({})", objects.patches.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join("+"));
    let ob = objects.clone();
    let object_sampler = Arc::new(move |rng: &mut SampleRng| {
        let i = index(rng, ob.patches.len());
        Point::new(i, sample_in_patch(ob.patch(i), rng))
    });
    let os = object_sampler.clone();
    let os2 = object_sampler.clone();
    let sp = objects.clone();
    Groupoid {
        name,
        objects: objects.clone(),
        arrows: objects.clone(),
        src: SmoothMap::identity(objects.clone()),
        tgt: SmoothMap::identity(objects.clone()),
        unit: SmoothMap::identity(objects.clone()),
        inv: SmoothMap::identity(objects.clone()),
        mul: MulMap::new(objects.clone(), |_, h| h.clone()).with_jacobian(|_, h| (zeros(h.dim(), h.dim()), eye(h.dim()))),
        object_sampler,
        arrow_sampler: os,
        pair_sampler: Arc::new(move |rng| {
            let x = os2(rng);
            (x.clone(), x)
        }),
        sfiber_sampler: Arc::new(|x, _| Some(x.clone())),
        tfiber_quadrature: Some(Arc::new(|x, _| vec![(x.clone(), 1.0)])),
        path_pair: Arc::new(move |g, h, rng, speed| {
            let v = random_velocity(g.dim(), rng, speed);
            (BasePath::linear(sp.clone(), g.clone(), v.clone()), BasePath::linear(sp.clone(), h.clone(), v))
        }),
        meta: GroupoidMeta { proper: true, source_proper: true, source_connected: true, is_unit: true },
    }
}

/// Abelian Lie group `ℝ^a × T^b` under addition, as a groupoid over a point.
pub fn abelian_group(label: &str, kinds: Vec<CoordKind>) -> Groupoid {
    let n = kinds.len();
    let compact = kinds.iter().all(|k| *k == CoordKind::Angle);
    let patch = Patch::new(label, kinds);
    let arrows = Arc::new(Space::single(patch.clone()));
    let objects = Arc::new(Space::point());
    let pa = patch.clone();
    let arrow_sampler: Arc<dyn Fn(&mut SampleRng) -> Point + Send + Sync> =
        Arc::new(move |rng: &mut SampleRng| Point::new(0, sample_in_patch(&pa, rng)));
    let (a1, a2, a3) = (arrow_sampler.clone(), arrow_sampler.clone(), arrow_sampler.clone());
    let sp = arrows.clone();
    let quadrature: Option<Arc<super::FiberQuadrature>> = if compact {
        Some(Arc::new(move |_x: &Point, nodes: usize| {
            let per = if n <= 1 { nodes } else { (nodes as f64).powf(1.0 / n as f64).ceil() as usize };
            let axis = uniform_circle_nodes(per);
            let mut out = vec![(Vec::new(), 1.0)];
            for _ in 0..n {
                out = out
                    .into_iter()
                    .flat_map(|(c, w): (Vec<f64>, f64)| {
                        axis.iter().map(move |(th, wj)| {
                            let mut c2 = c.clone();
                            c2.push(*th);
                            (c2, w * wj)
                        })
                    })
                    .collect();
            }
            out.into_iter().map(|(c, w)| (Point::new(0, c), w)).collect()
        }))
    } else {
        None
    };
    Groupoid {
        name: label.to_string(),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: to_point_map(arrows.clone()),
        tgt: to_point_map(arrows.clone()),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), move |_| Point::new(0, vec![0.0; n])).with_jacobian(move |_| zeros(n, 0)),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), |g| Point::new(0, g.coords.iter().map(|x| -x).collect()))
            .with_jacobian(move |_| -eye(n)),
        mul: MulMap::new(arrows.clone(), |g, h| Point::new(0, g.coords.iter().zip(&h.coords).map(|(a, b)| a + b).collect()))
            .with_jacobian(move |_, _| (eye(n), eye(n))),
        object_sampler: Arc::new(|_| Point::new(0, Vec::new())),
        arrow_sampler,
        pair_sampler: Arc::new(move |rng| (a1(rng), a2(rng))),
        sfiber_sampler: Arc::new(move |_, rng| Some(a3(rng))),
        tfiber_quadrature: quadrature,
        path_pair: Arc::new(move |g, h, rng, speed| {
            let v1 = random_velocity(n, rng, speed);
            let v2 = random_velocity(n, rng, speed);
            (BasePath::linear(sp.clone(), g.clone(), v1), BasePath::linear(sp.clone(), h.clone(), v2))
        }),
        meta: GroupoidMeta { proper: compact, source_proper: compact, source_connected: true, is_unit: false },
    }
}

/// Cyclic group `Z_n` over a point; arrow `k` lives on patch `k`.
pub fn cyclic_group(order: usize) -> Groupoid {
    let arrows = Arc::new(Space::new((0..order).map(|k| Patch::point(k.to_string())).collect()));
    let objects = Arc::new(Space::point());
    let sp = arrows.clone();
    let atom = move |k: usize| Point::new(k % order, Vec::new());
    Groupoid {
        name: format!("Z{order}"),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: to_point_map(arrows.clone()),
        tgt: to_point_map(arrows.clone()),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), move |_| atom(0)).with_jacobian(|_| zeros(0, 0)),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| atom(order - g.patch)).with_jacobian(|_| zeros(0, 0)),
        mul: MulMap::new(arrows.clone(), move |g, h| atom(g.patch + h.patch)).with_jacobian(|_, _| (zeros(0, 0), zeros(0, 0))),
        object_sampler: Arc::new(|_| Point::new(0, Vec::new())),
        arrow_sampler: Arc::new(move |rng| atom(index(rng, order))),
        pair_sampler: Arc::new(move |rng| (atom(index(rng, order)), atom(index(rng, order)))),
        sfiber_sampler: Arc::new(move |_, rng| Some(atom(index(rng, order)))),
        tfiber_quadrature: Some(Arc::new(move |_, _| (0..order).map(|k| (atom(k), 1.0 / order as f64)).collect())),
        path_pair: Arc::new(move |g, h, _, _| (BasePath::constant(sp.clone(), g.clone()), BasePath::constant(sp.clone(), h.clone()))),
        meta: GroupoidMeta { proper: true, source_proper: true, source_connected: order == 1, is_unit: false },
    }
}

/// Direct product `G₁ × G₂ ⇉ M₁ × M₂`.
pub fn product(g1: &Groupoid, g2: &Groupoid) -> Groupoid {
    let objects = Arc::new(g1.objects.product(&g2.objects));
    let arrows = Arc::new(g1.arrows.product(&g2.arrows));
    let asplit = Split::new(&g1.arrows, &g2.arrows);
    let osplit = Split::new(&g1.objects, &g2.objects);

    let (m1, m2, sa) = (g1.mul.clone(), g2.mul.clone(), asplit.clone());
    let mut mul = MulMap::new(arrows.clone(), move |g, h| {
        let ((ga, gb), (ha, hb)) = (sa.split(g), sa.split(h));
        sa.join(&m1.eval(&ga, &ha), &m2.eval(&gb, &hb))
    });
    if g1.mul.has_analytic_jacobian() && g2.mul.has_analytic_jacobian() {
        let (m1, m2, sa) = (g1.mul.clone(), g2.mul.clone(), asplit.clone());
        mul = mul.with_jacobian(move |g, h| {
            let ((ga, gb), (ha, hb)) = (sa.split(g), sa.split(h));
            let (p1, q1) = m1.jacobians(&ga, &ha, 0.0).unwrap();
            let (p2, q2) = m2.jacobians(&gb, &hb, 0.0).unwrap();
            (block_diag(&p1, &p2), block_diag(&q1, &q2))
        });
    }

    let (o1, o2, so) = (g1.object_sampler.clone(), g2.object_sampler.clone(), osplit.clone());
    let (r1, r2, sa2) = (g1.arrow_sampler.clone(), g2.arrow_sampler.clone(), asplit.clone());
    let (p1, p2, sa3) = (g1.pair_sampler.clone(), g2.pair_sampler.clone(), asplit.clone());
    let (f1, f2, so2, sa4) = (g1.sfiber_sampler.clone(), g2.sfiber_sampler.clone(), osplit.clone(), asplit.clone());
    let quadrature: Option<Arc<super::FiberQuadrature>> = match (&g1.tfiber_quadrature, &g2.tfiber_quadrature) {
        (Some(q1), Some(q2)) => {
            let (q1, q2, so3, sa5) = (q1.clone(), q2.clone(), osplit.clone(), asplit.clone());
            Some(Arc::new(move |x: &Point, n: usize| {
                let (xa, xb) = so3.split(x);
                let (na, nb) = (q1(&xa, n), q2(&xb, n));
                let mut out = Vec::with_capacity(na.len() * nb.len());
                for (a, wa) in &na {
                    for (b, wb) in &nb {
                        out.push((sa5.join(a, b), wa * wb));
                    }
                }
                out
            }))
        }
        _ => None,
    };
    let (pp1, pp2, sa6, arr) = (g1.path_pair.clone(), g2.path_pair.clone(), asplit.clone(), arrows.clone());
    let right_len = g2.arrows.patches.len();

    Groupoid {
        name: format!("{}x{}", g1.name, g2.name),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: product_map(&g1.src, &g2.src, arrows.clone(), objects.clone()),
        tgt: product_map(&g1.tgt, &g2.tgt, arrows.clone(), objects.clone()),
        unit: product_map(&g1.unit, &g2.unit, objects.clone(), arrows.clone()),
        inv: product_map(&g1.inv, &g2.inv, arrows.clone(), arrows.clone()),
        mul,
        object_sampler: Arc::new(move |rng| {
            let a = o1(rng);
            so.join(&a, &o2(rng))
        }),
        arrow_sampler: Arc::new(move |rng| {
            let a = r1(rng);
            sa2.join(&a, &r2(rng))
        }),
        pair_sampler: Arc::new(move |rng| {
            let (a, b) = p1(rng);
            let (c, d) = p2(rng);
            (sa3.join(&a, &c), sa3.join(&b, &d))
        }),
        sfiber_sampler: Arc::new(move |x, rng| {
            let (xa, xb) = so2.split(x);
            let a = f1(&xa, rng)?;
            let b = f2(&xb, rng)?;
            Some(sa4.join(&a, &b))
        }),
        tfiber_quadrature: quadrature,
        path_pair: Arc::new(move |g, h, rng, speed| {
            let ((ga, gb), (ha, hb)) = (sa6.split(g), sa6.split(h));
            let (c1, e1) = pp1(&ga, &ha, rng, speed);
            let (c2, e2) = pp2(&gb, &hb, rng, speed);
            let join = move |ps: &[usize]| ps[0] * right_len + ps[1];
            (BasePath::combine(arr.clone(), vec![c1, c2], join), BasePath::combine(arr.clone(), vec![e1, e2], join))
        }),
        meta: GroupoidMeta {
            proper: g1.meta.proper && g2.meta.proper,
            source_proper: g1.meta.source_proper && g2.meta.source_proper,
            source_connected: g1.meta.source_connected && g2.meta.source_connected,
            is_unit: g1.meta.is_unit && g2.meta.is_unit,
        },
    }
}

/// Pair groupoid `M × M ⇉ M` with `s(a, b) = b`, `t(a, b) = a`, `(a, b)(b, c) = (a, c)`.
pub fn pair_groupoid(patch: Patch) -> Groupoid {
    let d = patch.dim();
    let compact = patch.excluded.is_empty() && patch.kinds.iter().all(|k| *k == CoordKind::Angle);
    let connected = patch.excluded.is_empty();
    let objects = Arc::new(Space::single(patch.clone()));
    let arrows = Arc::new(Space::single(patch.product(&patch)));
    let first = move |g: &Point| g.coords[..d].to_vec();
    let second = move |g: &Point| g.coords[d..].to_vec();
    let cat = |a: Vec<f64>, b: Vec<f64>| Point::new(0, [a, b].concat());
    let (i, o) = (eye(d), zeros(d, d));
    let (ja, jb, jc, jd, je, jf) = (i.clone(), i.clone(), i.clone(), o.clone(), o.clone(), o.clone());
    let (p1, p2, p3, p4) = (patch.clone(), patch.clone(), patch.clone(), patch.clone());
    let quadrature: Option<Arc<super::FiberQuadrature>> = (compact && d == 1).then(|| {
        Arc::new(move |x: &Point, n: usize| {
            uniform_circle_nodes(n).into_iter().map(|(th, w)| (Point::new(0, vec![x.coords[0], th]), w)).collect()
        }) as Arc<super::FiberQuadrature>
    });
    let arr = arrows.clone();
    Groupoid {
        name: format!("pair({})", patch.label),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: SmoothMap::new(arrows.clone(), objects.clone(), move |g| Point::new(0, second(g)))
            .with_jacobian(move |_| blocks(&[vec![jd.clone(), ja.clone()]])),
        tgt: SmoothMap::new(arrows.clone(), objects.clone(), move |g| Point::new(0, first(g)))
            .with_jacobian(move |_| blocks(&[vec![jb.clone(), je.clone()]])),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), move |x| cat(x.coords.clone(), x.coords.clone()))
            .with_jacobian(move |_| blocks(&[vec![jc.clone()], vec![jc.clone()]])),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| cat(second(g), first(g)))
            .with_jacobian(move |_| blocks(&[vec![jf.clone(), eye(d)], vec![eye(d), jf.clone()]])),
        mul: MulMap::new(arrows.clone(), move |g, h| cat(first(g), second(h))).with_jacobian(move |_, _| {
            (
                blocks(&[vec![eye(d), zeros(d, d)], vec![zeros(d, d), zeros(d, d)]]),
                blocks(&[vec![zeros(d, d), zeros(d, d)], vec![zeros(d, d), eye(d)]]),
            )
        }),
        object_sampler: Arc::new(move |rng| Point::new(0, sample_in_patch(&p1, rng))),
        arrow_sampler: Arc::new(move |rng| {
            let a = sample_in_patch(&p2, rng);
            cat(a, sample_in_patch(&p2, rng))
        }),
        pair_sampler: Arc::new(move |rng| {
            let a = sample_in_patch(&p3, rng);
            let b = sample_in_patch(&p3, rng);
            let c = sample_in_patch(&p3, rng);
            (cat(a, b.clone()), cat(b, c))
        }),
        sfiber_sampler: Arc::new(move |x, rng| Some(cat(sample_in_patch(&p4, rng), x.coords.clone()))),
        tfiber_quadrature: quadrature,
        path_pair: Arc::new(move |g, h, rng, speed| {
            let va = random_velocity(d, rng, speed);
            let vb = random_velocity(d, rng, speed);
            let vc = random_velocity(d, rng, speed);
            let (a, b) = (first(g), second(g));
            let (b2, c) = (first(h), second(h));
            let vg = DVector::from_iterator(2 * d, va.iter().chain(vb.iter()).copied());
            let vh = DVector::from_iterator(2 * d, vb.iter().chain(vc.iter()).copied());
            (
                BasePath::linear(arr.clone(), cat(a, b), vg),
                BasePath::linear(arr.clone(), cat(b2, c), vh),
            )
        }),
        meta: GroupoidMeta { proper: compact, source_proper: compact, source_connected: connected, is_unit: false },
    }
}

/// `SO(2) ⋉ ℝ²` with arrows `(θ, p)`, `s = p`, `t = R_θ p`, or the trivial action `t = p`.
pub fn so2_action(trivial: bool) -> Groupoid {
    let objects = Arc::new(Space::single(Patch::lines("xy", 2)));
    let arrows = Arc::new(Space::single(Patch::new(
        if trivial { "theta*xy(trivial)" } else { "theta*xy" },
        vec![CoordKind::Angle, CoordKind::Line, CoordKind::Line],
    )));
    let act = move |theta: f64, p: &[f64]| if trivial { p.to_vec() } else { rotate(theta, p) };
    let act_jac = move |theta: f64, p: &[f64]| -> DMatrix<f64> {
        if trivial {
            blocks(&[vec![zeros(2, 1), eye(2)]])
        } else {
            let (r, dr) = rotation(theta);
            let col = &dr * DVector::from_column_slice(p);
            blocks(&[vec![DMatrix::from_column_slice(2, 1, col.as_slice()), r]])
        }
    };
    let arrow = |theta: f64, p: Vec<f64>| Point::new(0, vec![theta, p[0], p[1]]);
    let sample_p = |rng: &mut SampleRng| vec![symmetric(rng, SAMPLE_BOX), symmetric(rng, SAMPLE_BOX)];
    let arr = arrows.clone();
    Groupoid {
        name: if trivial { "SO2xR2(trivial)".into() } else { "SO2xR2".into() },
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: SmoothMap::new(arrows.clone(), objects.clone(), |g| Point::new(0, g.coords[1..].to_vec()))
            .with_jacobian(|_| blocks(&[vec![zeros(2, 1), eye(2)]])),
        tgt: SmoothMap::new(arrows.clone(), objects.clone(), move |g| Point::new(0, act(g.coords[0], &g.coords[1..])))
            .with_jacobian(move |g| act_jac(g.coords[0], &g.coords[1..])),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), move |x| arrow(0.0, x.coords.clone()))
            .with_jacobian(|_| blocks(&[vec![zeros(1, 2)], vec![eye(2)]])),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| arrow(-g.coords[0], act(g.coords[0], &g.coords[1..])))
            .with_jacobian(move |g| {
                let mut j = zeros(3, 3);
                j[(0, 0)] = -1.0;
                j.view_mut((1, 0), (2, 3)).copy_from(&act_jac(g.coords[0], &g.coords[1..]));
                j
            }),
        mul: MulMap::new(arrows.clone(), move |g, h| arrow(g.coords[0] + h.coords[0], h.coords[1..].to_vec())).with_jacobian(|_, _| {
            let mut dg = zeros(3, 3);
            dg[(0, 0)] = 1.0;
            (dg, eye(3))
        }),
        object_sampler: Arc::new(move |rng| Point::new(0, sample_p(rng))),
        arrow_sampler: Arc::new(move |rng| {
            let th = uniform(rng, 0.0, TAU);
            arrow(th, sample_p(rng))
        }),
        pair_sampler: Arc::new(move |rng| {
            let (t1, t2) = (uniform(rng, 0.0, TAU), uniform(rng, 0.0, TAU));
            let p = sample_p(rng);
            let q = act(t2, &p);
            (arrow(t1, q), arrow(t2, p))
        }),
        sfiber_sampler: Arc::new(move |x, rng| Some(arrow(uniform(rng, 0.0, TAU), x.coords.clone()))),
        tfiber_quadrature: Some(Arc::new(move |x, n| {
            uniform_circle_nodes(n).into_iter().map(|(th, w)| (arrow(th, act(-th, &x.coords)), w)).collect()
        })),
        path_pair: Arc::new(move |g, h, rng, speed| {
            let (w1, w2) = (symmetric(rng, speed), symmetric(rng, speed));
            let v = random_velocity(2, rng, speed);
            let (th1, th2, p) = (g.coords[0], h.coords[0], h.coords[1..].to_vec());
            let (pv, p2) = (v.clone(), p.clone());
            let eta = BasePath::new(arr.clone(), move |t| {
                let q = linear_coords(&p2, &pv, t);
                (arrow(th2 + w2 * t, q), DVector::from_vec(vec![w2, pv[0], pv[1]]))
            });
            let gamma = BasePath::new(arr.clone(), move |t| {
                let q = linear_coords(&p, &v, t);
                let th = th2 + w2 * t;
                let j = act_jac(th, &q);
                let dq = &j * DVector::from_vec(vec![w2, v[0], v[1]]);
                (arrow(th1 + w1 * t, act(th, &q)), DVector::from_vec(vec![w1, dq[0], dq[1]]))
            });
            (gamma, eta)
        }),
        meta: GroupoidMeta { proper: true, source_proper: true, source_connected: true, is_unit: false },
    }
}

/// `Z_n ⋉ ℝ²` by rotations through multiples of `2π / n`; arrow `(k, p)` lives on patch `k`.
pub fn cyclic_action(order: usize) -> Groupoid {
    let objects = Arc::new(Space::single(Patch::lines("xy", 2)));
    let arrows = Arc::new(Space::new((0..order).map(|k| Patch::lines(format!("{k}*xy"), 2)).collect()));
    let angle = move |k: usize| TAU * k as f64 / order as f64;
    let rot_jac = move |k: usize| rotation(angle(k)).0;
    let sample_p = |rng: &mut SampleRng| vec![symmetric(rng, SAMPLE_BOX), symmetric(rng, SAMPLE_BOX)];
    let arr = arrows.clone();
    Groupoid {
        name: format!("Z{order}xR2"),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: SmoothMap::new(arrows.clone(), objects.clone(), |g| Point::new(0, g.coords.clone())).with_jacobian(|_| eye(2)),
        tgt: SmoothMap::new(arrows.clone(), objects.clone(), move |g| Point::new(0, rotate(angle(g.patch), &g.coords)))
            .with_jacobian(move |g| rot_jac(g.patch)),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), |x| Point::new(0, x.coords.clone())).with_jacobian(|_| eye(2)),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| {
            Point::new((order - g.patch) % order, rotate(angle(g.patch), &g.coords))
        })
        .with_jacobian(move |g| rot_jac(g.patch)),
        mul: MulMap::new(arrows.clone(), move |g, h| Point::new((g.patch + h.patch) % order, h.coords.clone()))
            .with_jacobian(|_, _| (zeros(2, 2), eye(2))),
        object_sampler: Arc::new(move |rng| Point::new(0, sample_p(rng))),
        arrow_sampler: Arc::new(move |rng| {
            let k = index(rng, order);
            Point::new(k, sample_p(rng))
        }),
        pair_sampler: Arc::new(move |rng| {
            let (k1, k2) = (index(rng, order), index(rng, order));
            let p = sample_p(rng);
            (Point::new(k1, rotate(angle(k2), &p)), Point::new(k2, p))
        }),
        sfiber_sampler: Arc::new(move |x, rng| Some(Point::new(index(rng, order), x.coords.clone()))),
        tfiber_quadrature: Some(Arc::new(move |x, _| {
            (0..order).map(|k| (Point::new(k, rotate(-angle(k), &x.coords)), 1.0 / order as f64)).collect()
        })),
        path_pair: Arc::new(move |g, h, rng, speed| {
            let v = random_velocity(2, rng, speed);
            let (k1, k2, p) = (g.patch, h.patch, h.coords.clone());
            let eta = BasePath::linear(arr.clone(), h.clone(), v.clone());
            let r = rot_jac(k2);
            let gamma = BasePath::new(arr.clone(), move |t| {
                let q = linear_coords(&p, &v, t);
                (Point::new(k1, rotate(angle(k2), &q)), &r * &v)
            });
            (gamma, eta)
        }),
        meta: GroupoidMeta { proper: true, source_proper: true, source_connected: order == 1, is_unit: false },
    }
}

/// Trivial group bundle `N × Γ ⇉ N`.
pub fn group_bundle(base: Patch, group: &Groupoid) -> Groupoid {
    let mut g = product(&unit_groupoid(Arc::new(Space::single(base))), group);
    g.name = format!("bundle({})", g.name);
    g
}

/// `ℝ × Z_n` with `{x0} × (Z_n ∖ {0})` removed: the nontrivial sheets are punctured at `x0`.
pub fn punctured_group_bundle(order: usize, x0: f64, delta: f64) -> Groupoid {
    let objects = Arc::new(Space::single(Patch::lines("x", 1)));
    let arrows = Arc::new(Space::new(
        (0..order)
            .map(|k| {
                let p = Patch::lines(format!("x*{k}"), 1);
                if k == 0 {
                    p
                } else {
                    p.with_exclusion(Exclusion::point(&[x0], delta))
                }
            })
            .collect(),
    ));
    let arr = arrows.clone();
    let clear = move |x: f64| avoid(x, x0, 2.0 * delta);
    Groupoid {
        name: format!("punctured(Rx Z{order})"),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: SmoothMap::new(arrows.clone(), objects.clone(), |g| Point::new(0, g.coords.clone())).with_jacobian(|_| eye(1)),
        tgt: SmoothMap::new(arrows.clone(), objects.clone(), |g| Point::new(0, g.coords.clone())).with_jacobian(|_| eye(1)),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), |x| Point::new(0, x.coords.clone())).with_jacobian(|_| eye(1)),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| Point::new((order - g.patch) % order, g.coords.clone()))
            .with_jacobian(|_| eye(1)),
        mul: MulMap::new(arrows.clone(), move |g, h| Point::new((g.patch + h.patch) % order, h.coords.clone()))
            .with_jacobian(|_, _| (zeros(1, 1), eye(1))),
        object_sampler: Arc::new(|rng| Point::new(0, vec![symmetric(rng, SAMPLE_BOX)])),
        arrow_sampler: Arc::new(move |rng| {
            let k = index(rng, order);
            let x = symmetric(rng, SAMPLE_BOX);
            Point::new(k, vec![if k == 0 { x } else { clear(x) }])
        }),
        pair_sampler: Arc::new(move |rng| {
            let (k1, k2) = (index(rng, order), index(rng, order));
            let x = symmetric(rng, SAMPLE_BOX);
            let x = if k1 == 0 && k2 == 0 { x } else { clear(x) };
            (Point::new(k1, vec![x]), Point::new(k2, vec![x]))
        }),
        sfiber_sampler: Arc::new(move |x, rng| {
            let k = if (x.coords[0] - x0).abs() < delta { 0 } else { index(rng, order) };
            Some(Point::new(k, x.coords.clone()))
        }),
        tfiber_quadrature: Some(Arc::new(move |x, _| {
            if (x.coords[0] - x0).abs() < delta {
                vec![(Point::new(0, x.coords.clone()), 1.0)]
            } else {
                (0..order).map(|k| (Point::new(k, x.coords.clone()), 1.0 / order as f64)).collect()
            }
        })),
        path_pair: Arc::new(move |g, h, rng, speed| {
            let v = random_velocity(1, rng, speed);
            let hx = Point::new(h.patch, g.coords.clone());
            (BasePath::linear(arr.clone(), g.clone(), v.clone()), BasePath::linear(arr.clone(), hx, v))
        }),
        meta: GroupoidMeta { proper: false, source_proper: true, source_connected: false, is_unit: false },
    }
}

/// Family `punctured(ℝ × Z_n) → unit(ℝ)`, `(k, x) ↦ x`.
pub fn punctured_family(order: usize, x0: f64, delta: f64) -> GroupoidMorphism {
    let total = Arc::new(punctured_group_bundle(order, x0, delta));
    let base = Arc::new(unit_groupoid(total.objects.clone()));
    GroupoidMorphism {
        name: format!("{} -> unit(R)", total.name),
        arrow_map: SmoothMap::new(total.arrows.clone(), base.arrows.clone(), |g| Point::new(0, g.coords.clone())).with_jacobian(|_| eye(1)),
        object_map: SmoothMap::identity(total.objects.clone()),
        total,
        base,
        kind: MorphismKind::Family,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: false },
    }
}

/// Disjoint union `G₁ ⊔ G₂`; patch labels are prefixed with `a.` and `b.`.
pub fn disjoint_union(g1: &Groupoid, g2: &Groupoid) -> Groupoid {
    let relabel = |s: &Space, prefix: &str| {
        Space::new(s.patches.iter().map(|p| Patch { label: format!("{prefix}.{}", p.label), ..p.clone() }).collect())
    };
    let objects = Arc::new(relabel(&g1.objects, "a").disjoint_union(&relabel(&g2.objects, "b")));
    let arrows = Arc::new(relabel(&g1.arrows, "a").disjoint_union(&relabel(&g2.arrows, "b")));
    let (na, no) = (g1.arrows.patches.len(), g1.objects.patches.len());
    let shift = |p: Point, by: usize| Point::new(p.patch + by, p.coords);
    let back = |p: &Point, by: usize| Point::new(p.patch - by, p.coords.clone());

    let (m1, m2) = (g1.mul.clone(), g2.mul.clone());
    let mut mul = MulMap::new(arrows.clone(), move |g, h| {
        if g.patch < na {
            m1.eval(g, h)
        } else {
            shift(m2.eval(&back(g, na), &back(h, na)), na)
        }
    });
    if g1.mul.has_analytic_jacobian() && g2.mul.has_analytic_jacobian() {
        let (m1, m2) = (g1.mul.clone(), g2.mul.clone());
        mul = mul.with_jacobian(move |g, h| {
            if g.patch < na {
                m1.jacobians(g, h, 0.0).unwrap()
            } else {
                m2.jacobians(&back(g, na), &back(h, na), 0.0).unwrap()
            }
        });
    }
    let pick2 = |rng: &mut SampleRng| index(rng, 2) == 0;
    let (o1, o2) = (g1.object_sampler.clone(), g2.object_sampler.clone());
    let (a1, a2) = (g1.arrow_sampler.clone(), g2.arrow_sampler.clone());
    let (p1, p2) = (g1.pair_sampler.clone(), g2.pair_sampler.clone());
    let (f1, f2) = (g1.sfiber_sampler.clone(), g2.sfiber_sampler.clone());
    let (pp1, pp2) = (g1.path_pair.clone(), g2.path_pair.clone());
    let quadrature: Option<Arc<super::FiberQuadrature>> = match (&g1.tfiber_quadrature, &g2.tfiber_quadrature) {
        (Some(q1), Some(q2)) => {
            let (q1, q2) = (q1.clone(), q2.clone());
            Some(Arc::new(move |x: &Point, n: usize| {
                if x.patch < no {
                    q1(x, n)
                } else {
                    q2(&back(x, no), n).into_iter().map(|(p, w)| (shift(p, na), w)).collect()
                }
            }))
        }
        _ => None,
    };
    let arr = arrows.clone();
    let relabel_path = move |p: BasePath| {
        let inner = p.clone();
        BasePath::new(arr.clone(), move |t| {
            let (q, v) = inner.at(t);
            (shift(q, na), v)
        })
        .tagged(p.is_unit_path, p.is_loop)
    };
    Groupoid {
        name: format!("{}+{}", g1.name, g2.name),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: union_map(&g1.src, &g2.src, arrows.clone(), objects.clone()),
        tgt: union_map(&g1.tgt, &g2.tgt, arrows.clone(), objects.clone()),
        unit: union_map(&g1.unit, &g2.unit, objects.clone(), arrows.clone()),
        inv: union_map(&g1.inv, &g2.inv, arrows.clone(), arrows.clone()),
        mul,
        object_sampler: Arc::new(move |rng| if pick2(rng) { o1(rng) } else { shift(o2(rng), no) }),
        arrow_sampler: Arc::new(move |rng| if pick2(rng) { a1(rng) } else { shift(a2(rng), na) }),
        pair_sampler: Arc::new(move |rng| {
            if pick2(rng) {
                p1(rng)
            } else {
                let (g, h) = p2(rng);
                (shift(g, na), shift(h, na))
            }
        }),
        sfiber_sampler: Arc::new(move |x, rng| if x.patch < no { f1(x, rng) } else { f2(&back(x, no), rng).map(|g| shift(g, na)) }),
        tfiber_quadrature: quadrature,
        path_pair: Arc::new(move |g, h, rng, speed| {
            if g.patch < na {
                pp1(g, h, rng, speed)
            } else {
                let (c, e) = pp2(&back(g, na), &back(h, na), rng, speed);
                (relabel_path(c), relabel_path(e))
            }
        }),
        meta: GroupoidMeta {
            proper: g1.meta.proper && g2.meta.proper,
            source_proper: g1.meta.source_proper && g2.meta.source_proper,
            source_connected: g1.meta.source_connected && g2.meta.source_connected,
            is_unit: g1.meta.is_unit && g2.meta.is_unit,
        },
    }
}

/// Pullback groupoid `M ×_{π₀,t} H ×_{s,π₀} M` for `M = N × F` and `π₀` the projection.
/// Arrows are `(f, h, f')` with `s = (s_H h, f')` and `t = (t_H h, f)`.
/// `H` must have a single object patch.
pub fn pullback(h: &Groupoid, fiber: Patch) -> Groupoid {
    assert_eq!(h.objects.patches.len(), 1, "pullback expects a single object patch");
    let df = fiber.dim();
    let dn = h.objects.dim(0);
    let objects = Arc::new(h.objects.product(&Space::single(fiber.clone())));
    let arrows = Arc::new(Space::new(h.arrows.patches.iter().map(|p| fiber.product(p).product(&fiber)).collect()));
    let parts = move |g: &Point| {
        let n = g.coords.len();
        (g.coords[..df].to_vec(), Point::new(g.patch, g.coords[df..n - df].to_vec()), g.coords[n - df..].to_vec())
    };
    let obj = |n: Point, f: Vec<f64>| Point::new(n.patch, [n.coords, f].concat());
    let arrow = |f: Vec<f64>, h: Point, f2: Vec<f64>| Point::new(h.patch, [f, h.coords, f2].concat());
    let split_obj = move |x: &Point| (Point::new(0, x.coords[..dn].to_vec()), x.coords[dn..].to_vec());

    let (hs, ht, hu, hi, hm) = (h.src.clone(), h.tgt.clone(), h.unit.clone(), h.inv.clone(), h.mul.clone());
    let (hs2, ht2, hu2, hi2, hm2) = (h.src.clone(), h.tgt.clone(), h.unit.clone(), h.inv.clone(), h.mul.clone());
    let fd = 1e-6;
    let dh_of = move |g: &Point| g.coords.len() - 2 * df;

    let (fa, fb, fc, fe) = (fiber.clone(), fiber.clone(), fiber.clone(), fiber.clone());
    let (hsamp, hpair, hfib, hobj) = (h.arrow_sampler.clone(), h.pair_sampler.clone(), h.sfiber_sampler.clone(), h.object_sampler.clone());
    let hpp = h.path_pair.clone();
    let arr = arrows.clone();
    let fspace = Arc::new(Space::single(fiber.clone()));

    Groupoid {
        name: format!("pullback({}, {})", h.name, fiber.label),
        objects: objects.clone(),
        arrows: arrows.clone(),
        src: SmoothMap::new(arrows.clone(), objects.clone(), move |g| {
            let (_, hh, f2) = parts(g);
            obj(hs.eval(&hh), f2)
        })
        .with_jacobian(move |g| {
            let (_, hh, _) = parts(g);
            let dh = dh_of(g);
            let j = hs2.jacobian(&hh, fd).unwrap();
            blocks(&[vec![zeros(dn, df), j, zeros(dn, df)], vec![zeros(df, df), zeros(df, dh), eye(df)]])
        }),
        tgt: SmoothMap::new(arrows.clone(), objects.clone(), move |g| {
            let (f, hh, _) = parts(g);
            obj(ht.eval(&hh), f)
        })
        .with_jacobian(move |g| {
            let (_, hh, _) = parts(g);
            let dh = dh_of(g);
            let j = ht2.jacobian(&hh, fd).unwrap();
            blocks(&[vec![zeros(dn, df), j, zeros(dn, df)], vec![eye(df), zeros(df, dh), zeros(df, df)]])
        }),
        unit: SmoothMap::new(objects.clone(), arrows.clone(), move |x| {
            let (n, f) = split_obj(x);
            arrow(f.clone(), hu.eval(&n), f)
        })
        .with_jacobian(move |x| {
            let (n, _) = split_obj(x);
            let j = hu2.jacobian(&n, fd).unwrap();
            let dh = j.nrows();
            blocks(&[vec![zeros(df, dn), eye(df)], vec![j, zeros(dh, df)], vec![zeros(df, dn), eye(df)]])
        }),
        inv: SmoothMap::new(arrows.clone(), arrows.clone(), move |g| {
            let (f, hh, f2) = parts(g);
            arrow(f2, hi.eval(&hh), f)
        })
        .with_jacobian(move |g| {
            let (_, hh, _) = parts(g);
            let dh = dh_of(g);
            let j = hi2.jacobian(&hh, fd).unwrap();
            blocks(&[
                vec![zeros(df, df), zeros(df, dh), eye(df)],
                vec![zeros(dh, df), j, zeros(dh, df)],
                vec![eye(df), zeros(df, dh), zeros(df, df)],
            ])
        }),
        mul: MulMap::new(arrows.clone(), move |g, k| {
            let (f, h1, _) = parts(g);
            let (_, h2, f3) = parts(k);
            arrow(f, hm.eval(&h1, &h2), f3)
        })
        .with_jacobian(move |g, k| {
            let (_, h1, _) = parts(g);
            let (_, h2, _) = parts(k);
            let (jg, jk) = hm2.jacobians(&h1, &h2, fd).unwrap();
            let (dg, dk, dout) = (dh_of(g), dh_of(k), jg.nrows());
            (
                blocks(&[
                    vec![eye(df), zeros(df, dg), zeros(df, df)],
                    vec![zeros(dout, df), jg, zeros(dout, df)],
                    vec![zeros(df, df), zeros(df, dg), zeros(df, df)],
                ]),
                blocks(&[
                    vec![zeros(df, df), zeros(df, dk), zeros(df, df)],
                    vec![zeros(dout, df), jk, zeros(dout, df)],
                    vec![zeros(df, df), zeros(df, dk), eye(df)],
                ]),
            )
        }),
        object_sampler: Arc::new(move |rng| {
            let n = hobj(rng);
            obj(n, sample_in_patch(&fa, rng))
        }),
        arrow_sampler: Arc::new(move |rng| {
            let hh = hsamp(rng);
            let f = sample_in_patch(&fb, rng);
            arrow(f, hh, sample_in_patch(&fb, rng))
        }),
        pair_sampler: Arc::new(move |rng| {
            let (h1, h2) = hpair(rng);
            let f1 = sample_in_patch(&fc, rng);
            let f2 = sample_in_patch(&fc, rng);
            let f3 = sample_in_patch(&fc, rng);
            (arrow(f1, h1, f2.clone()), arrow(f2, h2, f3))
        }),
        sfiber_sampler: Arc::new(move |x, rng| {
            let (n, f2) = split_obj(x);
            let hh = hfib(&n, rng)?;
            Some(arrow(sample_in_patch(&fe, rng), hh, f2))
        }),
        tfiber_quadrature: None,
        path_pair: Arc::new(move |g, k, rng, speed| {
            let (f, h1, f2) = parts(g);
            let (_, h2, f3) = parts(k);
            let (ch, eh) = hpp(&h1, &h2, rng, speed);
            let line = |start: Vec<f64>, rng: &mut SampleRng| {
                BasePath::linear(fspace.clone(), Point::new(0, start), random_velocity(df, rng, speed))
            };
            let (pf, pf2, pf3) = (line(f, rng), line(f2, rng), line(f3, rng));
            (
                BasePath::combine(arr.clone(), vec![pf, ch, pf2.clone()], |ps| ps[1]),
                BasePath::combine(arr.clone(), vec![pf2, eh, pf3], |ps| ps[1]),
            )
        }),
        meta: GroupoidMeta {
            proper: h.meta.proper && fiber.excluded.is_empty() && fiber.kinds.iter().all(|k| *k == CoordKind::Angle),
            source_proper: h.meta.source_proper && fiber.excluded.is_empty() && fiber.kinds.iter().all(|k| *k == CoordKind::Angle),
            source_connected: h.meta.source_connected && fiber.excluded.is_empty(),
            is_unit: false,
        },
    }
}

// ---------------------------------------------------------------------------
// morphisms

fn coordinate_projection(domain: Arc<Space>, codomain: Arc<Space>, split: Split) -> SmoothMap {
    let s2 = split.clone();
    SmoothMap::new(domain, codomain, move |p| split.split(p).0).with_jacobian(move |p| {
        let (a, b) = s2.split(p);
        blocks(&[vec![eye(a.dim()), zeros(a.dim(), b.dim())]])
    })
}

/// Projection `G₁ × G₂ → G₁`. Its kernel is `unit(M₁) × G₂`; it is a family when `G₁` is a
/// unit groupoid.
pub fn projection_morphism(g1: Arc<Groupoid>, g2: Arc<Groupoid>) -> GroupoidMorphism {
    let total = Arc::new(product(&g1, &g2));
    let arrow_map = coordinate_projection(total.arrows.clone(), g1.arrows.clone(), Split::new(&g1.arrows, &g2.arrows));
    let object_map = coordinate_projection(total.objects.clone(), g1.objects.clone(), Split::new(&g1.objects, &g2.objects));
    let family = g1.meta.is_unit;
    let kernel = if family {
        None
    } else {
        let k = projection_morphism(Arc::new(unit_groupoid(g1.objects.clone())), g2.clone());
        let embed = product_map(&g1.unit, &SmoothMap::identity(g2.arrows.clone()), k.total.arrows.clone(), total.arrows.clone());
        let chart = product_map(&g1.tgt, &SmoothMap::identity(g2.arrows.clone()), total.arrows.clone(), k.total.arrows.clone());
        Some(Arc::new(KernelData { family: Arc::new(k), embed, chart }))
    };
    GroupoidMorphism {
        name: format!("{} -> {}", total.name, g1.name),
        total,
        base: g1.clone(),
        arrow_map,
        object_map,
        kind: if family { MorphismKind::Family } else { MorphismKind::Projection },
        kernel,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: g2.meta.source_connected },
    }
}

/// Trivial family `N × 𝓕 → N` for a fiber groupoid `𝓕`.
pub fn trivial_family(base: Patch, fiber: Arc<Groupoid>) -> GroupoidMorphism {
    projection_morphism(Arc::new(unit_groupoid(Arc::new(Space::single(base)))), fiber)
}

/// Projection `H × P → H` for a manifold `P` (a fibration that is not uniform when `dim P > 0`).
pub fn product_with_manifold(h: Arc<Groupoid>, manifold: Patch) -> GroupoidMorphism {
    projection_morphism(h, Arc::new(unit_groupoid(Arc::new(Space::single(manifold)))))
}

/// Pair-groupoid fibration `Pair(N × F) ≅ Pair(N) × Pair(F) → Pair(N)`.
/// Arrow coordinates are `(n₁, n₂, f₁, f₂)`.
pub fn pair_fibration(base: Patch, fiber: Patch) -> GroupoidMorphism {
    projection_morphism(Arc::new(pair_groupoid(base)), Arc::new(pair_groupoid(fiber)))
}

/// Projection `π₀*H → H`, `(f, h, f') ↦ h`, with kernel `unit(N) × Pair(F)`.
pub fn morita_projection(h: Arc<Groupoid>, fiber: Patch) -> GroupoidMorphism {
    let df = fiber.dim();
    let total = Arc::new(pullback(&h, fiber.clone()));
    let arrow_map = SmoothMap::new(total.arrows.clone(), h.arrows.clone(), move |g| {
        let n = g.coords.len();
        Point::new(g.patch, g.coords[df..n - df].to_vec())
    })
    .with_jacobian(move |g| {
        let dh = g.coords.len() - 2 * df;
        blocks(&[vec![zeros(dh, df), eye(dh), zeros(dh, df)]])
    });
    let dn = h.objects.dim(0);
    let object_map = SmoothMap::new(total.objects.clone(), h.objects.clone(), move |x| Point::new(x.patch, x.coords[..dn].to_vec()))
        .with_jacobian(move |_| blocks(&[vec![eye(dn), zeros(dn, df)]]));

    let kfam = projection_morphism(Arc::new(unit_groupoid(h.objects.clone())), Arc::new(pair_groupoid(fiber.clone())));
    let (hu, hu2, ht, ht2) = (h.unit.clone(), h.unit.clone(), h.tgt.clone(), h.tgt.clone());
    // kernel arrow coordinates are (n, f, f')
    let embed = SmoothMap::new(kfam.total.arrows.clone(), total.arrows.clone(), move |k| {
        let u = hu.eval(&Point::new(0, k.coords[..dn].to_vec()));
        Point::new(u.patch, [k.coords[dn..dn + df].to_vec(), u.coords, k.coords[dn + df..].to_vec()].concat())
    })
    .with_jacobian(move |k| {
        let j = hu2.jacobian(&Point::new(0, k.coords[..dn].to_vec()), 1e-6).unwrap();
        let dh = j.nrows();
        blocks(&[
            vec![zeros(df, dn), eye(df), zeros(df, df)],
            vec![j, zeros(dh, df), zeros(dh, df)],
            vec![zeros(df, dn), zeros(df, df), eye(df)],
        ])
    });
    let chart = SmoothMap::new(total.arrows.clone(), kfam.total.arrows.clone(), move |g| {
        let n = g.coords.len();
        let t = ht.eval(&Point::new(g.patch, g.coords[df..n - df].to_vec()));
        Point::new(0, [t.coords, g.coords[..df].to_vec(), g.coords[n - df..].to_vec()].concat())
    })
    .with_jacobian(move |g| {
        let n = g.coords.len();
        let dh = n - 2 * df;
        let j = ht2.jacobian(&Point::new(g.patch, g.coords[df..n - df].to_vec()), 1e-6).unwrap();
        blocks(&[
            vec![zeros(dn, df), j, zeros(dn, df)],
            vec![eye(df), zeros(df, dh), zeros(df, df)],
            vec![zeros(df, df), zeros(df, dh), eye(df)],
        ])
    });
    GroupoidMorphism {
        name: format!("{} -> {}", total.name, h.name),
        total,
        base: h,
        arrow_map,
        object_map,
        kind: MorphismKind::MoritaPullback,
        kernel: Some(Arc::new(KernelData { family: Arc::new(kfam), embed, chart })),
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: fiber.excluded.is_empty() },
    }
}

/// `ℝ² → S¹`, `(x, y) ↦ x mod 2π`, between abelian groups over a point.
pub fn plane_to_circle() -> GroupoidMorphism {
    let total = Arc::new(abelian_group("R2", vec![CoordKind::Line, CoordKind::Line]));
    let base = Arc::new(abelian_group("S1", vec![CoordKind::Angle]));
    GroupoidMorphism {
        name: "R2 -> S1".into(),
        arrow_map: SmoothMap::new(total.arrows.clone(), base.arrows.clone(), |g| Point::new(0, vec![g.coords[0]]))
            .with_jacobian(|_| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
        object_map: SmoothMap::identity(total.objects.clone()),
        total,
        base,
        kind: MorphismKind::Generic,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: true },
    }
}

/// `ℝ² → ℝ`, `(x, y) ↦ x`, between abelian groups over a point.
pub fn plane_to_line() -> GroupoidMorphism {
    let total = Arc::new(abelian_group("R2", vec![CoordKind::Line, CoordKind::Line]));
    let base = Arc::new(abelian_group("R", vec![CoordKind::Line]));
    GroupoidMorphism {
        name: "R2 -> R".into(),
        arrow_map: SmoothMap::new(total.arrows.clone(), base.arrows.clone(), |g| Point::new(0, vec![g.coords[0]]))
            .with_jacobian(|_| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
        object_map: SmoothMap::identity(total.objects.clone()),
        total,
        base,
        kind: MorphismKind::Generic,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: true },
    }
}

/// Action morphism `SO(2) ⋉ ℝ² → SO(2)`, `(θ, p) ↦ θ`.
pub fn so2_action_morphism(trivial: bool) -> GroupoidMorphism {
    let total = Arc::new(so2_action(trivial));
    let base = Arc::new(abelian_group("SO2", vec![CoordKind::Angle]));
    GroupoidMorphism {
        name: format!("{} -> SO2", total.name),
        arrow_map: SmoothMap::new(total.arrows.clone(), base.arrows.clone(), |g| Point::new(0, vec![g.coords[0]]))
            .with_jacobian(|_| DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])),
        object_map: to_point_map(total.objects.clone()),
        total,
        base,
        kind: MorphismKind::Action,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: true },
    }
}

/// Action morphism `Z_n ⋉ ℝ² → Z_n`.
pub fn cyclic_action_morphism(order: usize) -> GroupoidMorphism {
    let total = Arc::new(cyclic_action(order));
    let base = Arc::new(cyclic_group(order));
    GroupoidMorphism {
        name: format!("{} -> Z{order}", total.name),
        arrow_map: SmoothMap::new(total.arrows.clone(), base.arrows.clone(), |g| Point::new(g.patch, Vec::new()))
            .with_jacobian(|_| zeros(0, 2)),
        object_map: to_point_map(total.objects.clone()),
        total,
        base,
        kind: MorphismKind::Action,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: true },
    }
}

/// `H ⊔ H* → H` where `H = ℝ × Z_n` and `H*` is the same bundle punctured at `x0`.
/// The kernel is the unit groupoid of `ℝ ⊔ ℝ`; star-surjectivity fails over `x0` in `H*`.
pub fn covering_counterexample(order: usize, x0: f64, delta: f64) -> GroupoidMorphism {
    let base = Arc::new(group_bundle(Patch::lines("x", 1), &cyclic_group(order)));
    let punctured = punctured_group_bundle(order, x0, delta);
    let total = Arc::new(disjoint_union(&base, &punctured));
    let arrow_map = SmoothMap::new(total.arrows.clone(), base.arrows.clone(), move |g| Point::new(g.patch % order, g.coords.clone()))
        .with_jacobian(|_| eye(1));
    let object_map = SmoothMap::new(total.objects.clone(), base.objects.clone(), |x| Point::new(0, x.coords.clone())).with_jacobian(|_| eye(1));

    let kunit = Arc::new(unit_groupoid(total.objects.clone()));
    let kbase = Arc::new(unit_groupoid(base.objects.clone()));
    let family = GroupoidMorphism {
        name: "unit(R+R) -> unit(R)".into(),
        arrow_map: SmoothMap::new(kunit.arrows.clone(), kbase.arrows.clone(), |x| Point::new(0, x.coords.clone())).with_jacobian(|_| eye(1)),
        object_map: SmoothMap::new(kunit.objects.clone(), kbase.objects.clone(), |x| Point::new(0, x.coords.clone())).with_jacobian(|_| eye(1)),
        total: kunit.clone(),
        base: kbase,
        kind: MorphismKind::Family,
        kernel: None,
        meta: MorphismMeta { probe_objects: Vec::new(), source_connected_kernel: true },
    };
    let embed = SmoothMap::new(kunit.arrows.clone(), total.arrows.clone(), move |x| Point::new(x.patch * order, x.coords.clone()))
        .with_jacobian(|_| eye(1));
    let chart = SmoothMap::new(total.arrows.clone(), kunit.arrows.clone(), move |g| Point::new(g.patch / order, g.coords.clone()))
        .with_jacobian(|_| eye(1));
    GroupoidMorphism {
        name: format!("{} -> {}", total.name, base.name),
        total,
        base,
        arrow_map,
        object_map,
        kind: MorphismKind::Generic,
        kernel: Some(Arc::new(KernelData { family: Arc::new(family), embed, chart })),
        meta: MorphismMeta { probe_objects: vec![Point::new(1, vec![x0])], source_connected_kernel: true },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid_core::{check_axioms, morphism_check};
    use crate::Tolerances;

    fn all_entries() -> Vec<CatalogEntry> {
        let mut out = Vec::new();
        let variants: Vec<(&str, Params)> = vec![
            ("pair", Params::new()),
            ("pair", Params::new().with("space", "circle")),
            ("pair", Params::new().with("space", "plane")),
            ("pair", Params::new().with("space", "punctured_line")),
            ("action", Params::new()),
            ("action", Params::new().with("trivial", 1)),
            ("action", Params::new().with("group", "cyclic").with("order", 3)),
            ("group_bundle", Params::new()),
            ("group_bundle", Params::new().with("group", "circle")),
            ("punctured_group_bundle", Params::new().with("order", 3)),
            ("pullback", Params::new()),
            ("pullback", Params::new().with("base", "circle_bundle").with("fiber", "punctured_line")),
            ("trivial_family", Params::new()),
            ("trivial_family", Params::new().with("fiber", "so2_action")),
            ("trivial_family", Params::new().with("fiber", "pair_line")),
            ("disjoint_union", Params::new()),
            ("product_with_manifold", Params::new()),
            ("product_with_manifold", Params::new().with("base", "circle_bundle").with("dim", 2)),
        ];
        for (name, p) in variants {
            out.push(catalog(name, &p).unwrap());
        }
        out
    }

    #[test]
    fn every_entry_satisfies_the_axioms() {
        let tol = Tolerances::default();
        for e in all_entries() {
            for g in e.groupoids() {
                let r = check_axioms(&g, 200, 11, &tol).unwrap();
                assert!(r.passed, "{r}");
            }
            if let Some(m) = e.morphism() {
                let r = morphism_check(m, 100, 5, &tol).unwrap();
                assert!(r.passed, "{r}");
            }
        }
    }

    #[test]
    fn extra_builders_satisfy_the_axioms() {
        let tol = Tolerances::default();
        for m in [plane_to_circle(), plane_to_line(), so2_action_morphism(false), cyclic_action_morphism(4), punctured_family(2, 0.0, 1e-3)] {
            assert!(check_axioms(&m.total, 200, 3, &tol).unwrap().passed);
            assert!(morphism_check(&m, 100, 3, &tol).unwrap().passed);
        }
        let f = pair_fibration(Patch::new("th", vec![CoordKind::Angle]), punctured_line(0.0, 1e-3));
        assert!(check_axioms(&f.total, 200, 3, &tol).unwrap().passed);
        assert!(morphism_check(&f, 100, 3, &tol).unwrap().passed);
    }

    #[test]
    fn pair_line_multiplication() {
        let e = catalog("pair", &Params::new()).unwrap();
        let g = e.groupoid().unwrap();
        let ab = Point::new(0, vec![1.0, 2.0]);
        let bc = Point::new(0, vec![2.0, 5.0]);
        assert_eq!(g.m(&ab, &bc).coords, vec![1.0, 5.0]);
    }

    #[test]
    fn group_bundle_adds_mod_two() {
        let g = group_bundle(Patch::lines("x", 1), &cyclic_group(2));
        let a = Point::new(1, vec![0.5]);
        assert_eq!(g.m(&a, &a), Point::new(0, vec![0.5]));
        assert_eq!(g.arrows.patches.len(), 2);
    }

    #[test]
    fn circle_pullback_over_a_line() {
        let m = morita_projection(Arc::new(abelian_group("S1", vec![CoordKind::Angle])), Patch::lines("x", 1));
        let g = &m.total;
        let a = Point::new(0, vec![1.0, 0.5, 2.0]);
        let b = Point::new(0, vec![2.0, 0.25, -3.0]);
        let ab = g.m(&a, &b);
        assert_eq!(ab.coords, vec![1.0, 0.75, -3.0]);
        assert_eq!(g.s(&a).coords, vec![2.0]);
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let tol = Tolerances::default();
        for e in all_entries() {
            for g in e.groupoids() {
                let mut rng = crate::rng::rng_for(4, 0);
                for _ in 0..5 {
                    let a = g.sample_arrow(&mut rng);
                    for map in [&g.src, &g.tgt, &g.inv] {
                        if let (Some(j), Ok(fd)) = (map.analytic_jacobian(&a), map.fd_jacobian(&a, tol.fd_step)) {
                            assert!((j - fd).amax() < 1e-5, "{}", g.name);
                        }
                    }
                    let x = g.sample_object(&mut rng);
                    if let (Some(j), Ok(fd)) = (g.unit.analytic_jacobian(&x), g.unit.fd_jacobian(&x, tol.fd_step)) {
                        assert!((j - fd).amax() < 1e-5, "{}", g.name);
                    }
                }
            }
        }
    }

    #[test]
    fn path_pairs_are_composable_and_differentiable() {
        for e in all_entries() {
            for g in e.groupoids() {
                let mut rng = crate::rng::rng_for(9, 0);
                let (a, b) = g.sample_pair(&mut rng);
                let (c, d) = (g.path_pair)(&a, &b, &mut rng, 0.5);
                assert!(g.arrows.dist(&c.point(0.0), &a) < 1e-12, "{}", g.name);
                assert!(g.arrows.dist(&d.point(0.0), &b) < 1e-9, "{}", g.name);
                for t in [0.2, 0.7, 1.0] {
                    assert!(g.objects.dist(&g.s(&c.point(t)), &g.t(&d.point(t))) < 1e-9, "{}", g.name);
                }
                assert!(c.derivative_defect(8, 1e-6) < 1e-5, "{}", g.name);
                assert!(d.derivative_defect(8, 1e-6) < 1e-5, "{}", g.name);
            }
        }
    }

    #[test]
    fn quadrature_nodes_lie_in_target_fibers() {
        for e in all_entries() {
            for g in e.groupoids() {
                if let Some(q) = &g.tfiber_quadrature {
                    let mut rng = crate::rng::rng_for(2, 0);
                    let x = g.sample_object(&mut rng);
                    let nodes = q(&x, 16);
                    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                    for (h, _) in nodes {
                        assert!(g.objects.dist(&g.t(&h), &x) < 1e-12, "{}", g.name);
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(catalog("torus", &Params::new()), Err(Error::UnknownName(_))));
        assert!(matches!(catalog("pair", &Params::new().with("space", "klein")), Err(Error::InvalidParams(_))));
        assert!(matches!(catalog("action", &Params::new().with("group", "cyclic").with("order", 0)), Err(Error::InvalidParams(_))));
    }
}
