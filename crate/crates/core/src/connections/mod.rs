//! Ehresmann connections on groupoid submersions, represented by their horizontal lift.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::groupoid_core::{Groupoid, GroupoidMorphism, MorphismKind};
use crate::numeric_core::linalg::{column_space, lstsq, matrix_from_columns, projection_residual};
use crate::numeric_core::{min_principal_angle, null_space, rank, subspace_residual, Point};
use crate::report::{ser_num, CheckReport, MultVerdict, Witness};
use crate::rng::{rng_for, symmetric, SampleRng};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// `(point, base tangent) ↦ lifted tangent`; `None` where the lift is undefined.
pub type HorFn = dyn Fn(&Point, &DVector<f64>) -> Option<DVector<f64>> + Send + Sync;
pub type VectorField = Arc<dyn Fn(&Point) -> Option<DVector<f64>> + Send + Sync>;

#[derive(Clone)]
pub struct Connection {
    pub morphism: Arc<GroupoidMorphism>,
    pub hor: Arc<HorFn>,
    pub hor0: Arc<HorFn>,
    pub claimed_multiplicative: bool,
    pub provenance: String,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection")
            .field("morphism", &self.morphism.name)
            .field("claimed_multiplicative", &self.claimed_multiplicative)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl Connection {
    pub fn new(
        morphism: Arc<GroupoidMorphism>,
        hor: impl Fn(&Point, &DVector<f64>) -> Option<DVector<f64>> + Send + Sync + 'static,
        hor0: impl Fn(&Point, &DVector<f64>) -> Option<DVector<f64>> + Send + Sync + 'static,
        provenance: impl Into<String>,
    ) -> Self {
        Self { morphism, hor: Arc::new(hor), hor0: Arc::new(hor0), claimed_multiplicative: false, provenance: provenance.into() }
    }

    pub fn claimed(mut self, multiplicative: bool) -> Self {
        self.claimed_multiplicative = multiplicative;
        self
    }

    pub fn total(&self) -> &Arc<Groupoid> {
        &self.morphism.total
    }

    pub fn base(&self) -> &Arc<Groupoid> {
        &self.morphism.base
    }

    pub fn lift(&self, g: &Point, a: &DVector<f64>) -> Result<DVector<f64>> {
        (self.hor)(g, a).ok_or_else(|| Error::EvaluationOutsideDomain(format!("horizontal lift undefined at {g:?}")))
    }

    pub fn lift0(&self, x: &Point, w: &DVector<f64>) -> Result<DVector<f64>> {
        (self.hor0)(x, w).ok_or_else(|| Error::EvaluationOutsideDomain(format!("base lift undefined at {x:?}")))
    }

    /// Matrix of `hor(g, ·)` on the coordinate basis of `T_{π(g)}H`.
    pub fn lift_matrix(&self, g: &Point) -> Result<DMatrix<f64>> {
        let d = self.base().arrows.dim(self.morphism.pi(g).patch);
        let cols = (0..d).map(|i| self.lift(g, &basis_vector(d, i))).collect::<Result<Vec<_>>>()?;
        Ok(matrix_from_columns(g.dim(), &cols))
    }

    pub fn lift0_matrix(&self, x: &Point) -> Result<DMatrix<f64>> {
        let d = self.base().objects.dim(self.morphism.pi0(x).patch);
        let cols = (0..d).map(|i| self.lift0(x, &basis_vector(d, i))).collect::<Result<Vec<_>>>()?;
        Ok(matrix_from_columns(x.dim(), &cols))
    }
}

pub fn random_tangent(dim: usize, rng: &mut SampleRng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| symmetric(rng, 1.0))
}

pub fn basis_vector(d: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// Given `a ∈ T_{p}H`, a random `b ∈ T_{q}H` with `Ts(a) = Tt(b)` (least-squares correction of a
/// random draw).
pub fn composable_tangent(
    h: &Groupoid,
    p: &Point,
    q: &Point,
    a: &DVector<f64>,
    rng: &mut SampleRng,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let ds = h.src.jacobian(p, tol.fd_step)?;
    let dt = h.tgt.jacobian(q, tol.fd_step)?;
    let b0 = random_tangent(q.dim(), rng);
    let target = &ds * a;
    let b = &b0 + lstsq(&dt, &(&target - &dt * &b0), tol.rank_tol);
    let gap = (&dt * &b - target).norm();
    if gap > tol.rank_tol.max(1e-9) * (1.0 + a.norm()) {
        return Err(Error::SamplerFailure(format!("no composable tangent (constraint residual {gap:e})")));
    }
    Ok(b)
}

// ---------------------------------------------------------------------------
// complement

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplementReport {
    pub check: CheckReport,
    #[serde(serialize_with = "ser_num")]
    pub min_angle: f64,
    pub dimensions_add_up: bool,
}

/// `Tπ ∘ hor = id`, linearity, `dim im hor + dim ker Tπ = dim TG`, and a positive angle between
/// `im hor` and `ker Tπ`.
pub fn complement_check(c: &Connection, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<ComplementReport> {
    let g_ = c.total();
    let mut rep = CheckReport::new(format!("complement({})", c.provenance), n_samples, seed);
    let mut min_angle = std::f64::consts::FRAC_PI_2;
    let mut dims_ok = true;
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let g = g_.sample_arrow(&mut rng);
        let dpi = c.morphism.arrow_map.jacobian(&g, tol.fd_step)?;
        let hm = c.lift_matrix(&g)?;
        let dh = hm.ncols();
        if rank(&hm, tol.rank_tol) < dh {
            return Err(Error::RankDeficientLift(format!("lift at {g:?} has rank below {dh}")));
        }
        let right_inverse = (&dpi * &hm - DMatrix::identity(dh, dh)).amax();
        let a = random_tangent(dh, &mut rng);
        let b = random_tangent(dh, &mut rng);
        let alpha = symmetric(&mut rng, 2.0);
        let lin = (c.lift(&g, &(&a * alpha + &b))? - (c.lift(&g, &a)? * alpha + c.lift(&g, &b)?)).amax();
        rep.observe(right_inverse.max(lin), || Witness::points("right inverse / linearity", &[&g]));
        let ker = null_space(&dpi, tol.rank_tol);
        if rank(&hm, tol.rank_tol) + ker.ncols() != g.dim() {
            dims_ok = false;
        }
        let angle = min_principal_angle(&hm, &ker, tol.rank_tol);
        min_angle = min_angle.min(angle);
    }
    let mut check = rep.finish(tol.tol_alg);
    check.passed = check.passed && dims_ok && min_angle > tol.angle_tol;
    Ok(ComplementReport { check, min_angle, dimensions_add_up: dims_ok })
}

// ---------------------------------------------------------------------------
// multiplicativity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResidual {
    pub clause: String,
    #[serde(serialize_with = "ser_num")]
    pub residual: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicativityReport {
    pub clauses: Vec<ClauseResidual>,
    pub verdict: MultVerdict,
    pub samples: usize,
    /// Samples skipped because a lift or transport was undefined.
    pub inconclusive_samples: usize,
    pub seed: u64,
}

impl MultiplicativityReport {
    pub fn new(clauses: &[&str], samples: usize, seed: u64) -> Self {
        Self {
            clauses: clauses.iter().map(|c| ClauseResidual { clause: c.to_string(), residual: 0.0, witness: None }).collect(),
            verdict: MultVerdict::Inconclusive,
            samples,
            inconclusive_samples: 0,
            seed,
        }
    }

    pub fn observe(&mut self, clause: &str, residual: f64, witness: impl FnOnce() -> Witness) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        let entry = self.clauses.iter_mut().find(|c| c.clause == clause).expect("declared clause");
        if r > entry.residual {
            entry.residual = r;
            entry.witness = Some(witness());
        }
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResidual> {
        self.clauses.iter().find(|c| c.clause == name)
    }

    pub fn worst(&self) -> f64 {
        self.clauses.iter().fold(0.0, |m, c| m.max(c.residual))
    }

    pub fn finish(mut self, tol_mult: f64) -> Self {
        self.verdict = if self.inconclusive_samples >= self.samples && self.samples > 0 {
            MultVerdict::Inconclusive
        } else {
            MultVerdict::from_residual(self.worst(), tol_mult)
        };
        self
    }
}

pub const POINTWISE_CLAUSES: [&str; 6] = ["source", "target", "unit", "inverse", "product", "base_restriction"];

/// Flat-gauge residual of `Tm(hor_g a, hor_h b) = hor_{gh}(Tm_H(a, b))`.
pub fn product_clause_residual(c: &Connection, g: &Point, h: &Point, a: &DVector<f64>, b: &DVector<f64>, tol: &Tolerances) -> Result<f64> {
    let (gr, base) = (c.total(), c.base());
    let (jg, jh) = gr.mul.jacobians(g, h, tol.fd_step)?;
    let lhs = jg * c.lift(g, a)? + jh * c.lift(h, b)?;
    let (pg, ph) = (c.morphism.pi(g), c.morphism.pi(h));
    let (bg, bh) = base.mul.jacobians(&pg, &ph, tol.fd_step)?;
    let rhs = c.lift(&gr.m(g, h), &(bg * a + bh * b))?;
    Ok((lhs - rhs).norm())
}

fn base_restriction_residual(c: &Connection, x: &Point, tol: &Tolerances) -> Result<f64> {
    let gr = c.total();
    let ux = gr.u(x);
    let a = c.lift_matrix(&ux)?;
    let b = gr.unit.jacobian(x, tol.fd_step)?;
    let expected = &b * c.lift0_matrix(x)?;
    let n = ux.dim();
    let mut stacked = DMatrix::zeros(n, a.ncols() + b.ncols());
    stacked.view_mut((0, 0), (n, a.ncols())).copy_from(&a);
    stacked.view_mut((0, a.ncols()), (n, b.ncols())).copy_from(&(-&b));
    let coeffs = null_space(&stacked, tol.rank_tol);
    let inter = &a * coeffs.rows(0, a.ncols());
    let qi = column_space(&inter, tol.rank_tol);
    let qe = column_space(&expected, tol.rank_tol);
    let mut worst = 0.0f64;
    for j in 0..expected.ncols() {
        worst = worst.max(projection_residual(&expected.column(j).into_owned(), &qi));
    }
    for j in 0..qi.ncols() {
        worst = worst.max(projection_residual(&qi.column(j).into_owned(), &qe));
    }
    Ok(worst)
}

/// Pointwise clauses of a multiplicative connection at sampled arrows, pairs and objects.
pub fn multiplicativity_check_pointwise(c: &Connection, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<MultiplicativityReport> {
    let (gr, base, pi) = (c.total(), c.base(), &c.morphism);
    let fd = tol.fd_step;
    let mut rep = MultiplicativityReport::new(&POINTWISE_CLAUSES, n_samples, seed);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let (g, h) = gr.sample_pair(&mut rng);
        let (pg, ph) = (pi.pi(&g), pi.pi(&h));
        let a = random_tangent(pg.dim(), &mut rng);
        let b = composable_tangent(base, &pg, &ph, &a, &mut rng, tol)?;
        let x = gr.sample_object(&mut rng);
        let w = random_tangent(pi.pi0(&x).dim(), &mut rng);
        let sample = (|| -> Result<[f64; 6]> {
            let hg = c.lift(&g, &a)?;
            let src = (gr.src.jacobian(&g, fd)? * &hg - c.lift0(&gr.s(&g), &(base.src.jacobian(&pg, fd)? * &a))?).norm();
            let tgt = (gr.tgt.jacobian(&g, fd)? * &hg - c.lift0(&gr.t(&g), &(base.tgt.jacobian(&pg, fd)? * &a))?).norm();
            let inv = (gr.inv.jacobian(&g, fd)? * &hg - c.lift(&gr.i(&g), &(base.inv.jacobian(&pg, fd)? * &a))?).norm();
            let px = pi.pi0(&x);
            let unit = (c.lift(&gr.u(&x), &(base.unit.jacobian(&px, fd)? * &w))? - gr.unit.jacobian(&x, fd)? * c.lift0(&x, &w)?).norm();
            let prod = product_clause_residual(c, &g, &h, &a, &b, tol)?;
            let restr = base_restriction_residual(c, &x, tol)?;
            Ok([src, tgt, unit, inv, prod, restr])
        })();
        match sample {
            Ok(r) => {
                let mut coords = a.iter().copied().collect::<Vec<_>>();
                coords.extend(b.iter().copied());
                for (name, value) in POINTWISE_CLAUSES.iter().zip(r) {
                    let wit = || match *name {
                        "unit" | "base_restriction" => Witness::points(*name, &[&x]),
                        "product" => {
                            let mut w = Witness::points("product (g, h, a, b)", &[&g, &h]);
                            w.coords.extend(coords.iter().copied());
                            w
                        }
                        _ => Witness::points(*name, &[&g]),
                    };
                    rep.observe(name, value, wit);
                }
            }
            Err(Error::EvaluationOutsideDomain(_)) => rep.inconclusive_samples += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(rep.finish(tol.tol_mult))
}

/// Product clause evaluated at one explicit witness `(g, h, a, b)`.
pub fn multiplicativity_at(c: &Connection, g: &Point, h: &Point, a: &DVector<f64>, b: &DVector<f64>, tol: &Tolerances) -> Result<MultiplicativityReport> {
    let mut rep = MultiplicativityReport::new(&["product"], 1, 0);
    let r = product_clause_residual(c, g, h, a, b, tol)?;
    let mut coords = Vec::new();
    coords.extend(a.iter().copied());
    coords.extend(b.iter().copied());
    rep.observe("product", r, || {
        let mut w = Witness::points("product (g, h, a, b)", &[g, h]);
        w.coords.extend(coords);
        w
    });
    Ok(rep.finish(tol.tol_mult))
}

// ---------------------------------------------------------------------------
// kernel, composition

/// Restriction `hor^K(k, w) = hor(k, Tu_H w)` to the kernel family `K = π⁻¹(u(N))`.
/// The report records the tangency residual of the lift to `K`.
pub fn kernel_connection(c: &Connection, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<(Connection, CheckReport)> {
    if c.morphism.is_family() {
        let rep = CheckReport::new("kernel tangency (family)", 0, seed).finish(tol.tol_alg);
        return Ok((c.clone(), rep));
    }
    let kd = c.morphism.kernel.clone().ok_or_else(|| Error::KernelNotExposed(c.morphism.name.clone()))?;
    let (base, fd) = (c.base().clone(), tol.fd_step);
    let fam = kd.family.clone();
    let (hor, hor0) = (c.hor.clone(), c.hor0.clone());
    let (embed, chart) = (kd.embed.clone(), kd.chart.clone());
    let kfam = fam.clone();
    let lift = move |k: &Point, w: &DVector<f64>| -> Option<DVector<f64>> {
        let n = kfam.pi(k);
        let g = embed.eval(k);
        let tu = base.unit.jacobian(&n, fd).ok()?;
        let v = hor(&g, &(tu * w))?;
        Some(chart.jacobian(&g, fd).ok()? * v)
    };
    let kc = Connection::new(fam.clone(), lift, move |x, w| hor0(x, w), format!("kernel({})", c.provenance))
        .claimed(c.claimed_multiplicative);

    let mut rep = CheckReport::new("kernel tangency", n_samples, seed);
    for i in 0..n_samples {
        let mut rng = rng_for(seed, i as u64);
        let k = fam.total.sample_arrow(&mut rng);
        let w = random_tangent(fam.pi(&k).dim(), &mut rng);
        let g = kd.embed.eval(&k);
        let n = fam.pi(&k);
        let v = c.lift(&g, &(c.base().unit.jacobian(&n, fd)? * &w))?;
        let back = kd.embed.jacobian(&k, fd)? * (kd.chart.jacobian(&g, fd)? * &v);
        rep.observe((back - &v).norm(), || Witness::points("kernel tangency", &[&k]));
    }
    Ok((kc, rep.finish(tol.tol_mult)))
}

/// Composite lift `hor(g, a) = hor¹(g, hor²(π¹ g, a))` on `π² ∘ π¹`.
pub fn compose_connections(c1: &Connection, c2: &Connection) -> Result<Connection> {
    let mid_a = &c1.morphism.base;
    let mid_b = &c2.morphism.total;
    if !(Arc::ptr_eq(mid_a, mid_b) || (mid_a.arrows == mid_b.arrows && mid_a.objects == mid_b.objects)) {
        return Err(Error::IncompatibleMorphisms(format!("{} then {}", c1.morphism.name, c2.morphism.name)));
    }
    let m = Arc::new(c1.morphism.then(&c2.morphism));
    let (p1, h1, h2) = (c1.morphism.clone(), c1.hor.clone(), c2.hor.clone());
    let (q1, k1, k2) = (c1.morphism.clone(), c1.hor0.clone(), c2.hor0.clone());
    Ok(Connection::new(
        m,
        move |g, a| h1(g, &h2(&p1.pi(g), a)?),
        move |x, w| k1(x, &k2(&q1.pi0(x), w)?),
        format!("{} then {}", c1.provenance, c2.provenance),
    )
    .claimed(c1.claimed_multiplicative && c2.claimed_multiplicative))
}

// ---------------------------------------------------------------------------
// action morphisms

#[derive(Debug, Clone)]
pub enum ActionOutcome {
    Accepted { connection: Connection, invariance: CheckReport },
    Rejected { invariance: CheckReport },
}

impl ActionOutcome {
    pub fn invariance(&self) -> &CheckReport {
        match self {
            ActionOutcome::Accepted { invariance, .. } | ActionOutcome::Rejected { invariance } => invariance,
        }
    }
}

/// Candidate lift `hor((h, x), a) = (a, hor0(x, Ts_H a))` on an action morphism `H ⋉ M → H`,
/// accepted only if `Hor₀` is invariant under the tangent action (including the generators of
/// the Lie algebra at `probe_points`).
pub fn action_connection(
    am: Arc<GroupoidMorphism>,
    hor0: Arc<HorFn>,
    n_samples: usize,
    seed: u64,
    probe_points: &[Point],
    tol: &Tolerances,
) -> Result<ActionOutcome> {
    if am.kind != MorphismKind::Action {
        return Err(Error::NotAnActionMorphism(am.name.clone()));
    }
    let (total, base, fd) = (am.total.clone(), am.base.clone(), tol.fd_step);
    let (m2, h0, tot) = (am.clone(), hor0.clone(), total.clone());
    let lift = move |g: &Point, a: &DVector<f64>| -> Option<DVector<f64>> {
        let pg = m2.pi(g);
        let ts = m2.base.src.jacobian(&pg, fd).ok()?;
        let v = h0(&tot.s(g), &(ts * a))?;
        Some(DVector::from_iterator(a.len() + v.len(), a.iter().chain(v.iter()).copied()))
    };
    let h0c = hor0.clone();
    let candidate = Connection::new(am.clone(), lift, move |x, w| h0c(x, w), "action candidate").claimed(true);

    let hor0_basis = |x: &Point| -> Result<Vec<DVector<f64>>> {
        let cols = candidate.lift0_matrix(x)?;
        Ok((0..cols.ncols()).map(|j| cols.column(j).into_owned()).filter(|v| v.norm() > 0.0).collect())
    };
    let mut rep = CheckReport::new("action invariance", n_samples + probe_points.len(), seed);
    // infinitesimal clause: generators ξ ∈ ker Ts_H at units act by Tt ∘ hor(u(x), ξ)
    let mut points: Vec<Point> = probe_points.to_vec();
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        points.push(total.sample_object(&mut rng));
    }
    for x in &points {
        let ux = total.u(x);
        let pu = am.pi(&ux);
        let ker = null_space(&base.src.jacobian(&pu, fd)?, tol.rank_tol);
        let tt = total.tgt.jacobian(&ux, fd)?;
        let basis = hor0_basis(x)?;
        for j in 0..ker.ncols() {
            let rho = &tt * candidate.lift(&ux, &ker.column(j).into_owned())?;
            rep.observe(subspace_residual(&rho, &basis, tol.rank_tol)?, || Witness::points("generator", &[x]));
        }
    }
    // finite clause: Tt maps horizontal lifts into Hor₀ at the target
    for k in 0..n_samples {
        let mut rng = rng_for(seed ^ 0xac7, k as u64);
        let g = total.sample_arrow(&mut rng);
        let a = random_tangent(am.pi(&g).dim(), &mut rng);
        let v = total.tgt.jacobian(&g, fd)? * candidate.lift(&g, &a)?;
        let basis = hor0_basis(&total.t(&g))?;
        rep.observe(subspace_residual(&v, &basis, tol.rank_tol)?, || Witness::points("tangent action", &[&g]));
    }
    let invariance = rep.finish(tol.tol_mult);
    Ok(if invariance.passed {
        ActionOutcome::Accepted { connection: candidate, invariance }
    } else {
        ActionOutcome::Rejected { invariance }
    })
}

/// Worst residual of the identities `Ts X = X_M ∘ s`, `Tt X = X_M ∘ t`, `Tm(X, X) = X ∘ m`
/// for a vector field on `G` and its base field on `M`.
pub fn multiplicative_field_residual(
    gr: &Groupoid,
    field: &VectorField,
    base_field: &VectorField,
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<CheckReport> {
    let fd = tol.fd_step;
    let undefined = |p: &Point| Error::EvaluationOutsideDomain(format!("vector field undefined at {p:?}"));
    let mut rep = CheckReport::new("multiplicative vector field", n_samples, seed);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let (g, h) = gr.sample_pair(&mut rng);
        let xg = field(&g).ok_or_else(|| undefined(&g))?;
        let xh = field(&h).ok_or_else(|| undefined(&h))?;
        let gh = gr.m(&g, &h);
        let xgh = field(&gh).ok_or_else(|| undefined(&gh))?;
        let (sg, tg) = (gr.s(&g), gr.t(&g));
        let ms = (gr.src.jacobian(&g, fd)? * &xg - base_field(&sg).ok_or_else(|| undefined(&sg))?).norm();
        let mt = (gr.tgt.jacobian(&g, fd)? * &xg - base_field(&tg).ok_or_else(|| undefined(&tg))?).norm();
        let (jg, jh) = gr.mul.jacobians(&g, &h, fd)?;
        let mm = (jg * &xg + jh * &xh - xgh).norm();
        rep.observe(ms.max(mt).max(mm), || Witness::points("multiplicative field", &[&g, &h]));
    }
    Ok(rep.finish(tol.tol_mult))
}

/// Horizontal lift `g ↦ hor(g, X_{π(g)})` of a vector field on the base of a family.
pub fn multiplicative_vf_lift(
    c: &Connection,
    base_field: Arc<dyn Fn(&Point) -> DVector<f64> + Send + Sync>,
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<(VectorField, CheckReport)> {
    if !c.morphism.is_family() {
        return Err(Error::NotAFamily(c.morphism.name.clone()));
    }
    let (m1, h1, x1) = (c.morphism.clone(), c.hor.clone(), base_field.clone());
    let field: VectorField = Arc::new(move |g: &Point| h1(g, &x1(&m1.pi(g))));
    let (m2, h2, x2) = (c.morphism.clone(), c.hor0.clone(), base_field);
    let on_objects: VectorField = Arc::new(move |x: &Point| h2(x, &x2(&m2.pi0(x))));
    let rep = multiplicative_field_residual(c.total(), &field, &on_objects, n_samples, seed, tol)?;
    Ok((field, rep))
}

/// `hor(g, a) = P_g a` for a linear lift given by a matrix-valued function of the arrow.
pub fn linear_lift(
    morphism: Arc<GroupoidMorphism>,
    lift: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    lift0: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    provenance: &str,
) -> Connection {
    Connection::new(morphism, move |g, a| Some(lift(g) * a), move |x, w| Some(lift0(x) * w), provenance)
}

/// Flat lift `(w, 0)` for a projection whose first coordinates are the base coordinates.
pub fn flat_projection_connection(morphism: Arc<GroupoidMorphism>) -> Connection {
    let pad = |p: &Point, w: &DVector<f64>| {
        let mut v = DVector::zeros(p.dim());
        v.rows_mut(0, w.len()).copy_from(w);
        Some(v)
    };
    Connection::new(morphism, pad, pad, "flat product").claimed(true)
}

/// Product lift `hor((x, y), (a, b)) = (hor0(x, a), hor0(y, b))` on a pair fibration
/// `Pair(N × F) → Pair(N)` with arrow coordinates `(n₁, n₂, f₁, f₂)`.
pub fn pair_connection(morphism: Arc<GroupoidMorphism>, hor0: Arc<HorFn>, provenance: &str) -> Connection {
    let dn = morphism.base.objects.dim(0);
    let df = morphism.total.objects.dim(0) - dn;
    let h = hor0.clone();
    let lift = move |g: &Point, a: &DVector<f64>| -> Option<DVector<f64>> {
        let c = &g.coords;
        let x = Point::new(0, c[0..dn].iter().chain(&c[2 * dn..2 * dn + df]).copied().collect());
        let y = Point::new(0, c[dn..2 * dn].iter().chain(&c[2 * dn + df..]).copied().collect());
        let vx = h(&x, &a.rows(0, dn).into_owned())?;
        let vy = h(&y, &a.rows(dn, dn).into_owned())?;
        let mut v = DVector::zeros(g.dim());
        v.rows_mut(0, dn).copy_from(&vx.rows(0, dn));
        v.rows_mut(dn, dn).copy_from(&vy.rows(0, dn));
        v.rows_mut(2 * dn, df).copy_from(&vx.rows(dn, df));
        v.rows_mut(2 * dn + df, df).copy_from(&vy.rows(dn, df));
        Some(v)
    };
    Connection::new(morphism, lift, move |x, w| hor0(x, w), provenance).claimed(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid_core::catalog::{self, plane_to_circle, so2_action_morphism, trivial_family, Params};
    use crate::numeric_core::Patch;

    fn luca() -> Connection {
        let m = Arc::new(plane_to_circle());
        Connection::new(
            m,
            |g, a| Some(DVector::from_vec(vec![a[0], g.coords[0] * g.coords[0] * a[0]])),
            |_, _| Some(DVector::zeros(0)),
            "luca",
        )
    }

    #[test]
    fn luca_is_a_complement_but_not_multiplicative() {
        let tol = Tolerances::default();
        let c = luca();
        assert!(complement_check(&c, 50, 1, &tol).unwrap().check.passed);
        let rep = multiplicativity_check_pointwise(&c, 50, 1, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::NotMultiplicative);
        let one = DVector::from_vec(vec![1.0]);
        let g = Point::new(0, vec![1.0, 0.0]);
        let at = multiplicativity_at(&c, &g, &g, &one, &one, &tol).unwrap();
        assert!((at.clause("product").unwrap().residual - 6.0).abs() < 1e-12);
    }

    #[test]
    fn flat_family_is_multiplicative() {
        let tol = Tolerances::default();
        let m = Arc::new(trivial_family(Patch::lines("n", 1), Arc::new(catalog::so2_action(false))));
        let c = flat_projection_connection(m);
        assert!(complement_check(&c, 50, 2, &tol).unwrap().check.passed);
        let rep = multiplicativity_check_pointwise(&c, 50, 2, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative);
        assert!(rep.worst() < 1e-10);
        let (k, _) = kernel_connection(&c, 10, 2, &tol).unwrap();
        assert_eq!(k.provenance, c.provenance);
        let field: Arc<dyn Fn(&Point) -> DVector<f64> + Send + Sync> = Arc::new(|_| DVector::from_vec(vec![1.0]));
        let (_, r) = multiplicative_vf_lift(&c, field, 30, 2, &tol).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn rotation_action_is_rejected_and_trivial_action_accepted() {
        let tol = Tolerances::default();
        let zero: Arc<HorFn> = Arc::new(|_, _| Some(DVector::zeros(2)));
        let x = Point::new(0, vec![1.0, 0.0]);
        let rot = action_connection(Arc::new(so2_action_morphism(false)), zero.clone(), 20, 1, &[x.clone()], &tol).unwrap();
        assert!(matches!(rot, ActionOutcome::Rejected { .. }));
        assert!((rot.invariance().worst_residual - 1.0).abs() < 1e-6);
        let triv = action_connection(Arc::new(so2_action_morphism(true)), zero, 20, 1, &[x], &tol).unwrap();
        match triv {
            ActionOutcome::Accepted { connection, .. } => {
                let rep = multiplicativity_check_pointwise(&connection, 50, 1, &tol).unwrap();
                assert!(rep.worst() < 1e-9, "{rep:?}");
            }
            ActionOutcome::Rejected { invariance } => panic!("{invariance}"),
        }
    }

    #[test]
    fn finite_action_candidate_is_accepted() {
        let tol = Tolerances::default();
        let zero: Arc<HorFn> = Arc::new(|_, _| Some(DVector::zeros(2)));
        let out = action_connection(Arc::new(catalog::cyclic_action_morphism(3)), zero, 20, 1, &[], &tol).unwrap();
        assert!(matches!(out, ActionOutcome::Accepted { .. }));
    }

    #[test]
    fn composition_with_identity_keeps_the_lift() {
        let tol = Tolerances::default();
        let c = luca();
        let id = Arc::new(GroupoidMorphism::identity(c.base().clone()));
        let idc = Connection::new(id, |_, a| Some(a.clone()), |_, w| Some(w.clone()), "id");
        let comp = compose_connections(&c, &idc).unwrap();
        let g = Point::new(0, vec![0.7, -1.0]);
        let a = DVector::from_vec(vec![0.3]);
        assert_eq!(comp.lift(&g, &a).unwrap(), c.lift(&g, &a).unwrap());
        assert!(complement_check(&comp, 10, 0, &tol).unwrap().check.passed);
        assert!(compose_connections(&idc, &c).is_err());
        let _ = catalog::catalog("pair", &Params::new()).unwrap();
    }
}
