//! Parallel transport along base paths, holonomy, completeness probes, and path-level
//! multiplicativity.

pub mod path;

pub use path::BasePath;

use crate::config::Tolerances;
use crate::connections::{Connection, HorFn, MultiplicativityReport};
use crate::error::{Error, Result};
use crate::groupoid_core::{fibration_probe, FibrationVerdict, GroupoidMorphism};
use crate::numeric_core::{integrate, EscapeReason, OdeSettings, Point, SmoothMap, Space, TrajectoryOutcome, TrajectoryStatus};
use crate::report::{ser_num, CheckReport, Witness};
use crate::rng::{rng_for, symmetric, SampleRng};
use nalgebra::DVector;
use serde::Serialize;
use std::sync::Arc;

/// Typical base-path speed used by probes.
pub const PROBE_SPEED: f64 = 4.0;
/// Interior times at which path-level identities are compared, besides the endpoint.
pub const CHECK_TIMES: [f64; 3] = [0.25, 0.5, 1.0];

/// A horizontal-lift problem: lifts of paths in `base` to `space`, projecting by `proj`.
#[derive(Clone)]
pub struct LiftSystem {
    pub space: Arc<Space>,
    pub base: Arc<Space>,
    pub proj: SmoothMap,
    pub lift: Arc<HorFn>,
}

impl LiftSystem {
    /// Lifts of paths in `H` to arrows of `G`.
    pub fn arrows(c: &Connection) -> Self {
        Self { space: c.total().arrows.clone(), base: c.base().arrows.clone(), proj: c.morphism.arrow_map.clone(), lift: c.hor.clone() }
    }

    /// Lifts of paths in `N` to objects of `M`.
    pub fn objects(c: &Connection) -> Self {
        Self { space: c.total().objects.clone(), base: c.base().objects.clone(), proj: c.morphism.object_map.clone(), lift: c.hor0.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOutcome {
    pub trajectory: TrajectoryOutcome,
    /// Worst distance between the projected lift and the base path on the sample grid.
    pub drift: f64,
}

impl TransportOutcome {
    pub fn is_completed(&self) -> bool {
        self.trajectory.is_completed()
    }

    pub fn end(&self) -> Option<&Point> {
        self.is_completed().then(|| self.trajectory.end())
    }

    pub fn at(&self, t: f64, tol: &Tolerances) -> Option<&Point> {
        self.trajectory.sample_at(t, tol.tol_time)
    }
}

/// Integrates `τ' = lift(τ, γ')` from `start` over `[0, t1]`.
pub fn lift_path(sys: &LiftSystem, gamma: &BasePath, start: &Point, t1: f64, tol: &Tolerances) -> Result<TransportOutcome> {
    let gap = sys.base.dist(&sys.proj.eval(start), &gamma.point(0.0));
    if !(gap <= tol.tol_compose) {
        return Err(Error::StartFiberMismatch(gap));
    }
    let patch = sys.space.patch(start.patch);
    let (lift, space) = (sys.lift.clone(), sys.space.clone());
    let field = |t: f64, y: &[f64]| -> Option<Vec<f64>> {
        let mut p = Point::new(start.patch, y.to_vec());
        space.normalize(&mut p);
        let v = lift(&p, &gamma.velocity(t))?;
        Some(v.iter().copied().collect())
    };
    let trajectory = integrate(field, patch, start, t1, &OdeSettings::from_tolerances(tol))?;
    let drift = trajectory
        .samples
        .iter()
        .map(|(t, p)| sys.base.dist(&sys.proj.eval(p), &gamma.point(*t)))
        .fold(0.0f64, |m, d| m.max(if d.is_nan() { f64::INFINITY } else { d }));
    Ok(TransportOutcome { trajectory, drift })
}

/// Parallel transport of the arrow `g` along `γ` in the base groupoid, starting at `π(g) = γ(0)`.
pub fn parallel_transport(c: &Connection, gamma: &BasePath, g: &Point, t1: f64, tol: &Tolerances) -> Result<TransportOutcome> {
    lift_path(&LiftSystem::arrows(c), gamma, g, t1, tol)
}

/// Transport of an object of `M` along a path in `N` by the base lift.
pub fn object_transport(c: &Connection, delta: &BasePath, x: &Point, t1: f64, tol: &Tolerances) -> Result<TransportOutcome> {
    lift_path(&LiftSystem::objects(c), delta, x, t1, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub starts: Vec<Point>,
    /// Image of each start, `None` when its transport escaped.
    pub images: Vec<Option<Point>>,
    #[serde(serialize_with = "ser_num")]
    pub worst_displacement: f64,
    /// Transport around the loop and back again, compared with the start.
    #[serde(serialize_with = "ser_num")]
    pub roundtrip_residual: f64,
    #[serde(serialize_with = "ser_num")]
    pub worst_drift: f64,
    pub escaped: usize,
}

/// Holonomy of a loop in `H` on the given fiber points.
pub fn holonomy(c: &Connection, gamma: &BasePath, starts: &[Point], tol: &Tolerances) -> Result<HolonomyReport> {
    let space = &c.base().arrows;
    let gap = space.dist(&gamma.point(0.0), &gamma.point(1.0));
    if !(gap <= tol.tol_compose) {
        return Err(Error::NotALoop(gap));
    }
    let back = gamma.reverse();
    let arrows = &c.total().arrows;
    let mut rep = HolonomyReport {
        starts: starts.to_vec(),
        images: Vec::new(),
        worst_displacement: 0.0,
        roundtrip_residual: 0.0,
        worst_drift: 0.0,
        escaped: 0,
    };
    for g in starts {
        let fwd = parallel_transport(c, gamma, g, 1.0, tol)?;
        rep.worst_drift = rep.worst_drift.max(fwd.drift);
        let Some(end) = fwd.end().cloned() else {
            rep.escaped += 1;
            rep.images.push(None);
            continue;
        };
        rep.worst_displacement = rep.worst_displacement.max(arrows.dist(&end, g));
        // the reversed loop starts where the forward one ended (the same base point)
        let ret = parallel_transport(c, &back, &end, 1.0, tol)?;
        match ret.end() {
            Some(r) => rep.roundtrip_residual = rep.roundtrip_residual.max(arrows.dist(r, g)),
            None => rep.escaped += 1,
        }
        rep.images.push(Some(end));
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CompletenessVerdict {
    /// No escape among `budget` sampled paths. Not a proof of completeness.
    NoCounterexampleFound { budget: usize, seed: u64 },
    IncompleteWitness {
        path_index: usize,
        start: Point,
        #[serde(serialize_with = "ser_num")]
        escape_time: f64,
        reason: EscapeReason,
    },
}

impl CompletenessVerdict {
    pub fn found_witness(&self) -> bool {
        matches!(self, CompletenessVerdict::IncompleteWitness { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CompletenessVerdict::NoCounterexampleFound { .. } => "NoCounterexampleFound",
            CompletenessVerdict::IncompleteWitness { .. } => "IncompleteWitness",
        }
    }
}

/// Draws a base path and a start point over its initial point.
pub type PathFamily = dyn Fn(&mut SampleRng) -> (BasePath, Point) + Send + Sync;

/// Transports along `budget` sampled paths; reports the first escape found.
pub fn completeness_probe(sys: &LiftSystem, family: &PathFamily, budget: usize, seed: u64, tol: &Tolerances) -> Result<CompletenessVerdict> {
    for k in 0..budget {
        let mut rng = rng_for(seed, k as u64);
        let (gamma, start) = family(&mut rng);
        let out = lift_path(sys, &gamma, &start, 1.0, tol)?;
        if out.trajectory.status == TrajectoryStatus::Escaped {
            return Ok(CompletenessVerdict::IncompleteWitness {
                path_index: k,
                start,
                escape_time: out.trajectory.escape_time.unwrap_or(0.0),
                reason: out.trajectory.escape_reason.unwrap_or(EscapeReason::ExcludedPoint),
            });
        }
    }
    Ok(CompletenessVerdict::NoCounterexampleFound { budget, seed })
}

/// Random arrow of `G` and a random path in `H` through its image.
pub fn arrow_path_family(morphism: Arc<GroupoidMorphism>, speed: f64) -> Arc<PathFamily> {
    Arc::new(move |rng| {
        let g = morphism.total.sample_arrow(rng);
        let gamma = morphism.base.path_through(&morphism.pi(&g), rng, speed);
        (gamma, g)
    })
}

/// Random object of `M` and a straight path in `N` from its image.
pub fn object_path_family(morphism: Arc<GroupoidMorphism>, speed: f64) -> Arc<PathFamily> {
    Arc::new(move |rng| {
        let x = morphism.total.sample_object(rng);
        let n = morphism.pi0(&x);
        let v = DVector::from_fn(n.dim(), |_, _| symmetric(rng, speed));
        (BasePath::linear(morphism.base.objects.clone(), n, v), x)
    })
}

// ---------------------------------------------------------------------------
// path-level multiplicativity

pub const PATH_CLAUSES: [&str; 5] = ["source", "target", "unit", "inverse", "product"];

struct Legs {
    outcomes: Vec<TransportOutcome>,
}

impl Legs {
    fn at(&self, i: usize, t: f64, tol: &Tolerances) -> Option<&Point> {
        self.outcomes[i].at(t, tol)
    }
}

/// Transport identities `m(τ_γ g, τ_η h) = τ_{γη}(gh)`, `s(τ_γ g) = τ_{sγ}(s g)`,
/// `t(τ_γ g) = τ_{tγ}(t g)`, `i(τ_γ g) = τ_{iγ}(i g)`, `u(τ_δ x) = τ_{uδ}(u x)` over sampled
/// composable pairs and path pairs, at the times in `CHECK_TIMES`. Samples with an escaped leg
/// are counted as inconclusive.
pub fn transport_multiplicativity_check(c: &Connection, n_pairs: usize, seed: u64, speed: f64, tol: &Tolerances) -> Result<MultiplicativityReport> {
    let (gr, h) = (c.total(), c.base());
    let fd = tol.fd_step;
    let mut rep = MultiplicativityReport::new(&PATH_CLAUSES, n_pairs, seed);
    for k in 0..n_pairs {
        let mut rng = rng_for(seed, k as u64);
        let (g, hh) = gr.sample_pair(&mut rng);
        let (pg, ph) = (c.morphism.pi(&g), c.morphism.pi(&hh));
        let (gamma, eta) = (h.path_pair)(&pg, &ph, &mut rng, speed);
        let prod = BasePath::product(&gamma, &eta, &h.mul, fd);
        let s_path = gamma.mapped(&h.src, fd);
        let t_path = gamma.mapped(&h.tgt, fd);
        let i_path = gamma.mapped(&h.inv, fd);
        let u_path = s_path.mapped(&h.unit, fd);
        let x = gr.s(&g);
        let legs = Legs {
            outcomes: vec![
                parallel_transport(c, &gamma, &g, 1.0, tol)?,
                parallel_transport(c, &eta, &hh, 1.0, tol)?,
                parallel_transport(c, &prod, &gr.m(&g, &hh), 1.0, tol)?,
                object_transport(c, &s_path, &x, 1.0, tol)?,
                object_transport(c, &t_path, &gr.t(&g), 1.0, tol)?,
                parallel_transport(c, &i_path, &gr.i(&g), 1.0, tol)?,
                parallel_transport(c, &u_path, &gr.u(&x), 1.0, tol)?,
            ],
        };
        if legs.outcomes.iter().any(|o| !o.is_completed()) {
            rep.inconclusive_samples += 1;
            continue;
        }
        let wit = |name: &str| Witness::points(name, &[&g, &hh]);
        for &t in &CHECK_TIMES {
            let p = |i| legs.at(i, t, tol).ok_or_else(|| Error::EvaluationOutsideDomain(format!("no sample at t = {t}")));
            let (tg, th, tgh, ts, tt, ti, tu) = (p(0)?, p(1)?, p(2)?, p(3)?, p(4)?, p(5)?, p(6)?);
            rep.observe("product", gr.arrows.dist(&gr.m(tg, th), tgh), || wit("product"));
            rep.observe("source", gr.objects.dist(&gr.s(tg), ts), || wit("source"));
            rep.observe("target", gr.objects.dist(&gr.t(tg), tt), || wit("target"));
            rep.observe("inverse", gr.arrows.dist(&gr.i(tg), ti), || wit("inverse"));
            rep.observe("unit", gr.arrows.dist(&gr.u(ts), tu), || wit("unit"));
        }
    }
    Ok(rep.finish(tol.tol_mult))
}

/// `dist(m(τ_γ g, τ_η h), τ_{γη}(gh))` at time `t1` for explicit arrows and paths;
/// `None` when a leg escapes.
pub fn transport_product_residual(c: &Connection, g: &Point, h: &Point, gamma: &BasePath, eta: &BasePath, t1: f64, tol: &Tolerances) -> Result<Option<f64>> {
    let gr = c.total();
    let prod = BasePath::product(gamma, eta, &c.base().mul, tol.fd_step);
    let a = parallel_transport(c, gamma, g, t1, tol)?;
    let b = parallel_transport(c, eta, h, t1, tol)?;
    let ab = parallel_transport(c, &prod, &gr.m(g, h), t1, tol)?;
    Ok(match (a.end(), b.end(), ab.end()) {
        (Some(x), Some(y), Some(z)) => Some(gr.arrows.dist(&gr.m(x, y), z)),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentGroupoidReport {
    pub check: CheckReport,
    /// Transports ran to completion for every sample, so the map `τ ↦ (π∘τ, τ(0))` is onto
    /// on the sampled paths.
    pub surjectivity_applicable: bool,
    pub escaped: usize,
}

/// Consistency of the horizontal-path description: projected lifts follow the base path,
/// restarting halfway reproduces the lift, and reversing returns to the start.
pub fn current_groupoid_check(c: &Connection, n_samples: usize, seed: u64, speed: f64, tol: &Tolerances) -> Result<CurrentGroupoidReport> {
    let arrows = &c.total().arrows;
    let mut rep = CheckReport::new("horizontal paths", n_samples, seed);
    let mut escaped = 0;
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let g = c.total().sample_arrow(&mut rng);
        let gamma = c.base().path_through(&c.morphism.pi(&g), &mut rng, speed);
        let full = parallel_transport(c, &gamma, &g, 1.0, tol)?;
        let (Some(mid), Some(end)) = (full.at(0.5, tol).cloned(), full.end().cloned()) else {
            escaped += 1;
            continue;
        };
        let rest = parallel_transport(c, &gamma.segment(0.5, 1.0), &mid, 1.0, tol)?;
        let back = parallel_transport(c, &gamma.reverse(), &end, 1.0, tol)?;
        let (Some(rest_end), Some(back_end)) = (rest.end(), back.end()) else {
            escaped += 1;
            continue;
        };
        let r = full.drift.max(arrows.dist(rest_end, &end)).max(arrows.dist(back_end, &g));
        rep.observe(r, || Witness::points("horizontal path", &[&g]));
    }
    Ok(CurrentGroupoidReport { check: rep.finish(tol.drift_tol), surjectivity_applicable: escaped == 0, escaped })
}

// ---------------------------------------------------------------------------
// completeness relations between total, kernel and base

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub fibration: FibrationVerdict,
    pub total: CompletenessVerdict,
    pub kernel: CompletenessVerdict,
    pub base: CompletenessVerdict,
    pub source_connected_kernel: bool,
    /// Implications whose hypotheses hold and whose conclusion the probes contradict.
    pub violations: Vec<String>,
    /// Implications skipped because their hypotheses fail.
    pub skipped: Vec<String>,
    pub consistent: bool,
}

/// Probes total, kernel and base completeness and compares them with the implications that
/// hold for fibrations: total complete iff kernel complete; with source-connected kernel,
/// total complete iff base complete. For any submersion, total complete implies kernel
/// complete. Since probes can only falsify, a violation is an escape on one side with none on
/// the other.
pub fn theorem_crosscheck_kernel(c: &Connection, budget: usize, seed: u64, speed: f64, tol: &Tolerances) -> Result<ConsistencyReport> {
    let (kc, _) = crate::connections::kernel_connection(c, 0, seed, tol)?;
    let fibration = fibration_probe(&c.morphism, 64, seed, tol)?;
    if !fibration.submersion_ok {
        return Err(Error::NotAFibration(format!("{} is not a submersion", c.morphism.name)));
    }
    let total = completeness_probe(&LiftSystem::arrows(c), arrow_path_family(c.morphism.clone(), speed).as_ref(), budget, seed, tol)?;
    let kernel = completeness_probe(&LiftSystem::arrows(&kc), arrow_path_family(kc.morphism.clone(), speed).as_ref(), budget, seed ^ 0x4b, tol)?;
    let base = completeness_probe(&LiftSystem::objects(c), object_path_family(c.morphism.clone(), speed).as_ref(), budget, seed ^ 0xba5e, tol)?;
    let sck = c.morphism.meta.source_connected_kernel;
    let (t, k, b) = (!total.found_witness(), !kernel.found_witness(), !base.found_witness());
    let mut violations = Vec::new();
    let mut skipped = Vec::new();
    if t && !k {
        violations.push("total complete but kernel incomplete".to_string());
    }
    if fibration.is_fibration() {
        if k && !t {
            violations.push("fibration with complete kernel but incomplete total".to_string());
        }
        if sck {
            if t && !b {
                violations.push("source-connected kernel: total complete but base incomplete".to_string());
            }
            if b && !t {
                violations.push("source-connected kernel: base complete but total incomplete".to_string());
            }
        } else {
            skipped.push("total iff base: kernel not source-connected".to_string());
        }
    } else {
        skipped.push("kernel iff total: not a fibration (star-surjectivity fails)".to_string());
        skipped.push("total iff base: not a fibration".to_string());
    }
    let consistent = violations.is_empty();
    Ok(ConsistencyReport { fibration, total, kernel, base, source_connected_kernel: sck, violations, skipped, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::{flat_projection_connection, pair_connection, HorFn};
    use crate::groupoid_core::catalog::{catalog, pair_fibration, plane_to_circle, punctured_family, punctured_line, Params};
    use crate::numeric_core::{CoordKind, Patch};
    use crate::report::MultVerdict;
    use std::f64::consts::TAU;

    fn luca() -> Connection {
        Connection::new(
            Arc::new(plane_to_circle()),
            |g, a| Some(DVector::from_vec(vec![a[0], g.coords[0] * g.coords[0] * a[0]])),
            |_, _| Some(DVector::zeros(0)),
            "luca",
        )
    }

    fn circle_line(fiber: Patch) -> Connection {
        flat_projection_connection(Arc::new(pair_fibration(Patch::new("th", vec![CoordKind::Angle]), fiber)))
    }

    /// `Hor₀ × Hor₀` with `hor0((θ, f), w) = (w, w)`: the fiber coordinate drifts with the angle.
    fn drifting(fiber: Patch) -> Connection {
        let hor0: Arc<HorFn> = Arc::new(|_, w| Some(DVector::from_vec(vec![w[0], w[0]])));
        pair_connection(Arc::new(pair_fibration(Patch::new("th", vec![CoordKind::Angle]), fiber)), hor0, "drifting")
    }

    fn punctured() -> Connection {
        flat_projection_connection(Arc::new(punctured_family(2, 0.0, 1e-3)))
    }

    #[test]
    fn unit_path_is_stationary() {
        let tol = Tolerances::default();
        let c = circle_line(Patch::lines("f", 1));
        let g = Point::new(0, vec![0.3, 1.0, -0.5, 2.0]);
        let gamma = BasePath::constant(c.base().arrows.clone(), c.morphism.pi(&g));
        let out = parallel_transport(&c, &gamma, &g, 1.0, &tol).unwrap();
        assert_eq!(out.end(), Some(&g));
        assert_eq!(out.drift, 0.0);
    }

    #[test]
    fn start_outside_fiber_is_rejected() {
        let tol = Tolerances::default();
        let c = luca();
        let gamma = BasePath::constant(c.base().arrows.clone(), Point::new(0, vec![0.5]));
        let g = Point::new(0, vec![1.0, 0.0]);
        assert!(matches!(parallel_transport(&c, &gamma, &g, 1.0, &tol), Err(Error::StartFiberMismatch(_))));
    }

    #[test]
    fn luca_transport_matches_cubic_oracle() {
        let tol = Tolerances::default();
        let c = luca();
        for (x0, y0, v) in [(1.0, 0.0, 1.0), (-0.5, 2.0, 2.5), (0.2, -1.0, -3.0)] {
            let g = Point::new(0, vec![x0, y0]);
            let gamma = BasePath::linear(c.base().arrows.clone(), c.morphism.pi(&g), DVector::from_vec(vec![v]));
            let out = parallel_transport(&c, &gamma, &g, 1.0, &tol).unwrap();
            let end = out.end().unwrap();
            let x1: f64 = x0 + v;
            let expected = y0 + (x1.powi(3) - x0 * x0 * x0) / 3.0;
            assert!((end.coords[0] - x1).abs() < 1e-9);
            assert!((end.coords[1] - expected).abs() < 1e-6, "{} vs {expected}", end.coords[1]);
            assert!(out.drift < tol.drift_tol);
        }
    }

    #[test]
    fn luca_fails_path_multiplicativity() {
        let tol = Tolerances::default();
        let c = luca();
        let g = Point::new(0, vec![1.0, 0.0]);
        let lp = BasePath::linear(c.base().arrows.clone(), Point::new(0, vec![1.0]), DVector::from_vec(vec![TAU])).tagged(false, true);
        let r = transport_product_residual(&c, &g, &g, &lp, &lp, 1.0, &tol).unwrap().unwrap();
        assert!(r >= 0.5, "{r}");
        let rep = transport_multiplicativity_check(&c, 10, 1, 1.0, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::NotMultiplicative);
        assert!(rep.clause("product").unwrap().residual > 0.5);
    }

    #[test]
    fn flat_transport_is_multiplicative_and_complete() {
        let tol = Tolerances::default();
        let c = circle_line(Patch::lines("f", 1));
        let rep = transport_multiplicativity_check(&c, 8, 2, 1.0, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative);
        assert!(rep.worst() < 1e-7);
        let probe = completeness_probe(&LiftSystem::arrows(&c), arrow_path_family(c.morphism.clone(), PROBE_SPEED).as_ref(), 20, 2, &tol).unwrap();
        assert!(!probe.found_witness());
        let cur = current_groupoid_check(&c, 8, 2, 1.0, &tol).unwrap();
        assert!(cur.check.passed && cur.surjectivity_applicable, "{cur:?}");
        assert!(cur.check.worst_residual < 1e-7);
    }

    #[test]
    fn drifting_pair_connection_is_multiplicative() {
        let tol = Tolerances::default();
        let c = drifting(Patch::lines("f", 1));
        let rep = crate::connections::multiplicativity_check_pointwise(&c, 50, 4, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative, "{rep:?}");
        let path = transport_multiplicativity_check(&c, 6, 4, 1.0, &tol).unwrap();
        assert_eq!(path.verdict, MultVerdict::Multiplicative, "{path:?}");
    }

    #[test]
    fn flat_holonomy_is_trivial() {
        let tol = Tolerances::default();
        let c = circle_line(Patch::lines("f", 1));
        let start = Point::new(0, vec![0.5, 1.5]);
        let loop_path = BasePath::linear(c.base().arrows.clone(), start.clone(), DVector::from_vec(vec![TAU, -TAU])).tagged(false, true);
        let g = Point::new(0, vec![0.5, 1.5, 0.25, -1.0]);
        let rep = holonomy(&c, &loop_path, &[g], &tol).unwrap();
        assert!(rep.worst_displacement < 1e-8 && rep.roundtrip_residual < 1e-8, "{rep:?}");
        let open = BasePath::linear(c.base().arrows.clone(), start, DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(holonomy(&c, &open, &[], &tol), Err(Error::NotALoop(_))));
    }

    #[test]
    fn punctured_bundle_escapes() {
        let tol = Tolerances::default();
        let c = punctured();
        let g = Point::new(1, vec![-1.0]);
        let gamma = BasePath::linear(c.base().arrows.clone(), Point::new(0, vec![-1.0]), DVector::from_vec(vec![2.0]));
        let out = parallel_transport(&c, &gamma, &g, 1.0, &tol).unwrap();
        assert_eq!(out.trajectory.escape_reason, Some(EscapeReason::ExcludedPoint));
        assert!(out.trajectory.escape_time.unwrap() < 1.0);
        let probe = completeness_probe(&LiftSystem::arrows(&c), arrow_path_family(c.morphism.clone(), PROBE_SPEED).as_ref(), 50, 1, &tol).unwrap();
        match probe {
            CompletenessVerdict::IncompleteWitness { escape_time, .. } => assert!(escape_time < 1.0),
            other => panic!("{other:?}"),
        }
        let cur = current_groupoid_check(&c, 20, 1, PROBE_SPEED, &tol).unwrap();
        assert!(cur.escaped > 0 && !cur.surjectivity_applicable);
        assert!(cur.check.passed);
    }

    #[test]
    fn crosscheck_on_pair_fibrations() {
        let tol = Tolerances::default();
        let rep = theorem_crosscheck_kernel(&circle_line(Patch::lines("f", 1)), 20, 1, PROBE_SPEED, &tol).unwrap();
        assert!(rep.consistent && !rep.total.found_witness() && !rep.kernel.found_witness() && !rep.base.found_witness(), "{rep:?}");
        let rep = theorem_crosscheck_kernel(&drifting(Patch::lines("f", 1)), 20, 1, PROBE_SPEED, &tol).unwrap();
        assert!(rep.consistent && !rep.total.found_witness(), "{rep:?}");
        let rep = theorem_crosscheck_kernel(&drifting(punctured_line(0.0, 1e-3)), 60, 1, PROBE_SPEED, &tol).unwrap();
        assert!(rep.consistent && rep.total.found_witness() && rep.kernel.found_witness(), "{rep:?}");
    }

    #[test]
    fn crosscheck_on_covering_example() {
        let tol = Tolerances::default();
        let m = catalog("disjoint_union", &Params::new()).unwrap().morphism().unwrap().clone();
        let rep = theorem_crosscheck_kernel(&flat_projection_connection(m), 60, 1, PROBE_SPEED, &tol).unwrap();
        assert!(!rep.fibration.is_fibration());
        assert!(rep.total.found_witness() && !rep.kernel.found_witness(), "{rep:?}");
        assert!(rep.consistent && !rep.skipped.is_empty());
    }
}
