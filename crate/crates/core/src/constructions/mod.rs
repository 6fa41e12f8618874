//! Constructive existence of multiplicative connections: pullbacks, gluing of locally trivial
//! families, Haar averaging, and complete connections with interval-arithmetic certificates.

pub mod atlas;
pub mod averaging;
pub mod builder;
pub mod exhaustion;
pub mod levels;

pub use atlas::{glue_local_trivial, subordinate_partition, FiberShift, PartitionFn, TrivializingAtlas, Window};
pub use averaging::{haar_average, proper_family_connection, AveragedField};
pub use builder::{complete_connection_builder, flatness_certificate_check, CertificateVerdict, CompletenessCertificate};
pub use exhaustion::{invariant_exhaustion, Exhaustion, ExhaustionReport};
pub use levels::{level_schedule, verify_disjointness, LevelSchedule};

use crate::config::Tolerances;
use crate::connections::{Connection, HorFn};
use crate::error::{Error, Result};
use crate::groupoid_core::{GroupoidMorphism, MorphismKind};
use crate::numeric_core::linalg::min_singular_value;
use crate::numeric_core::Point;
use crate::report::{CheckReport, Witness};
use crate::rng::rng_for;
use nalgebra::DVector;
use std::sync::Arc;

/// Bisection depth for cover checks and grid refinement of base boxes.
pub(crate) const BOX_SPLIT_DEPTH: usize = 8;

/// `0` for `t ≤ 0`, `1` for `t ≥ 1`, smooth in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = ((-1.0 / t).exp(), (-1.0 / (1.0 - t)).exp());
        a / (a + b)
    }
}

/// Smooth, `1` on `[lo, hi]`, `0` outside `[lo − r, hi + r]`.
pub fn plateau(x: f64, lo: f64, hi: f64, r: f64) -> f64 {
    smooth_step((x - lo + r) / r) * smooth_step((hi + r - x) / r)
}

/// Smooth, positive exactly on `(lo, hi)`.
pub(crate) fn open_bump(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        0.0
    } else {
        (-(hi - lo) / ((x - lo) * (hi - x))).exp()
    }
}

/// On the pullback `π₀*H → H` (arrows `(f, h, f')`, `M = N × F`):
/// `hor((f, h, f'), a) = (hor0((t h, f), Tt a)_F, a, hor0((s h, f'), Ts a)_F)`.
pub fn morita_connection(pi: Arc<GroupoidMorphism>, hor0: Arc<HorFn>, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<Connection> {
    if pi.kind != MorphismKind::MoritaPullback {
        return Err(Error::IncompatibleMorphisms(format!("{} is not a pullback projection", pi.name)));
    }
    let h = pi.base.clone();
    let dn = h.objects.dim(0);
    let df = pi.total.objects.dim(0) - dn;
    for k in 0..n_samples {
        let x = pi.total.sample_object(&mut rng_for(seed, k as u64));
        let j = pi.object_map.jacobian(&x, tol.fd_step)?;
        if dn > 0 && min_singular_value(&j) <= tol.sv_tol {
            return Err(Error::NotASubmersion(format!("object map degenerate at {x:?}")));
        }
    }
    let hb = h.clone();
    let h0 = hor0.clone();
    let fd = tol.fd_step;
    let lift = move |g: &Point, a: &DVector<f64>| -> Option<DVector<f64>> {
        let n = g.coords.len();
        let hp = Point::new(g.patch, g.coords[df..n - df].to_vec());
        let (sa, ta) = (hb.src.jacobian(&hp, fd).ok()? * a, hb.tgt.jacobian(&hp, fd).ok()? * a);
        let x = Point::new(0, [hb.t(&hp).coords, g.coords[..df].to_vec()].concat());
        let y = Point::new(0, [hb.s(&hp).coords, g.coords[n - df..].to_vec()].concat());
        let (vx, vy) = (h0(&x, &ta)?, h0(&y, &sa)?);
        Some(DVector::from_iterator(n, vx.rows(dn, df).iter().chain(a.iter()).chain(vy.rows(dn, df).iter()).copied()))
    };
    Ok(Connection::new(pi, lift, move |x, w| hor0(x, w), "pullback connection").claimed(true))
}

/// Worst `|hor_user − hor_pullback|` at sampled arrows and base tangents.
pub fn morita_uniqueness_residual(user: &Connection, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<CheckReport> {
    let reference = morita_connection(user.morphism.clone(), user.hor0.clone(), 0, seed, tol)?;
    let mut rep = CheckReport::new("pullback uniqueness", n_samples, seed);
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let g = user.total().sample_arrow(&mut rng);
        let a = crate::connections::random_tangent(user.base().arrows.dim(user.morphism.pi(&g).patch), &mut rng);
        let r = (user.lift(&g, &a)? - reference.lift(&g, &a)?).amax();
        rep.observe(r, || Witness::points("arrow", &[&g]));
    }
    Ok(rep.finish(tol.tol_alg))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::groupoid_core::catalog::{abelian_group, cyclic_group, group_bundle, morita_projection, punctured_line, trivial_family};
    use crate::groupoid_core::Groupoid;
    use crate::interval::Interval;
    use crate::numeric_core::{CoordKind, Patch};
    use crate::report::MultVerdict;
    use crate::transport::{arrow_path_family, completeness_probe, parallel_transport, BasePath, LiftSystem, PROBE_SPEED};
    use crate::connections::multiplicativity_check_pointwise;
    use std::f64::consts::TAU;

    /// `N × (ℝ × Z₂ ⇉ ℝ) → N`, arrows `(n, x)` on patch `k`.
    pub(crate) fn z2_family() -> (Arc<GroupoidMorphism>, Arc<Groupoid>) {
        let fiber = Arc::new(group_bundle(Patch::lines("x", 1), &cyclic_group(2)));
        (Arc::new(trivial_family(Patch::lines("n", 1), fiber.clone())), fiber)
    }

    pub(crate) fn two_window_atlas() -> TrivializingAtlas {
        let (family, fiber) = z2_family();
        TrivializingAtlas::new(
            family,
            fiber,
            vec![Window::interval((-7.5, 0.5), (-8.0, 1.0)), Window::interval((-0.5, 7.5), (-1.0, 8.0))],
            vec![FiberShift::new(0.5, 0.3, 0.0), FiberShift::new(-0.2, -0.25, 0.05)],
            0,
            vec![Interval::new(-7.0, 7.0)],
            vec![Interval::new(-8.0, 8.0)],
        )
        .unwrap()
    }

    #[test]
    fn plateau_and_step_shapes() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(plateau(0.3, 0.0, 1.0, 0.1), 1.0);
        assert_eq!(plateau(1.2, 0.0, 1.0, 0.1), 0.0);
        assert!(plateau(1.05, 0.0, 1.0, 0.1) > 0.0 && plateau(1.05, 0.0, 1.0, 0.1) < 1.0);
    }

    fn zero_base_lift(df: usize) -> Arc<HorFn> {
        Arc::new(move |_: &Point, _: &DVector<f64>| Some(DVector::zeros(df)))
    }

    #[test]
    fn point_base_lift_is_vertical_in_the_group() {
        let pi = Arc::new(morita_projection(Arc::new(abelian_group("S1", vec![CoordKind::Angle])), Patch::lines("f", 1)));
        let c = morita_connection(pi, zero_base_lift(1), 10, 1, &Tolerances::default()).unwrap();
        let g = Point::new(0, vec![0.3, 1.0, -2.0]);
        assert_eq!(c.lift(&g, &DVector::from_vec(vec![1.7])).unwrap(), DVector::from_vec(vec![0.0, 1.7, 0.0]));
    }

    #[test]
    fn circle_loop_returns_to_the_start() {
        let pi = Arc::new(morita_projection(Arc::new(abelian_group("S1", vec![CoordKind::Angle])), Patch::lines("f", 1)));
        let tol = Tolerances::default();
        let c = morita_connection(pi.clone(), zero_base_lift(1), 10, 1, &tol).unwrap();
        let gamma = BasePath::linear(pi.base.arrows.clone(), Point::new(0, vec![0.0]), DVector::from_vec(vec![TAU]));
        let start = Point::new(0, vec![0.4, 0.0, -1.1]);
        let out = parallel_transport(&c, &gamma, &start, 1.0, &tol).unwrap();
        let end = out.end().unwrap();
        assert!(pi.total.arrows.dist(end, &start) < 1e-8, "{end:?}");
        let half = out.at(0.5, &tol).unwrap();
        assert!((half.coords[1] - std::f64::consts::PI).abs() < 1e-8);
    }

    fn bundle_pullback(fiber: Patch) -> Arc<GroupoidMorphism> {
        let base = group_bundle(Patch::lines("n", 1), &abelian_group("S1", vec![CoordKind::Angle]));
        Arc::new(morita_projection(Arc::new(base), fiber))
    }

    fn drifting() -> Arc<HorFn> {
        Arc::new(|x: &Point, w: &DVector<f64>| Some(DVector::from_vec(vec![w[0], (0.3 * x.coords[1] + 1.0) * w[0]])))
    }

    #[test]
    fn pullback_connection_is_multiplicative_and_unique() {
        let tol = Tolerances::default();
        let c = morita_connection(bundle_pullback(Patch::lines("f", 1)), drifting(), 20, 1, &tol).unwrap();
        let rep = multiplicativity_check_pointwise(&c, 100, 2, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative, "{rep:?}");
        // an independently written copy of the same lift
        let copy = Connection::new(
            c.morphism.clone(),
            |g, a| {
                let f_dot = |f: f64| (0.3 * f + 1.0) * a[0];
                Some(DVector::from_vec(vec![f_dot(g.coords[0]), a[0], a[1], f_dot(g.coords[3])]))
            },
            |x, w| drifting()(x, w),
            "hand-written",
        );
        let u = morita_uniqueness_residual(&copy, 200, 3, &tol).unwrap();
        assert!(u.passed, "{u}");
    }

    #[test]
    fn pullback_completeness_follows_the_base_lift() {
        let tol = Tolerances::default();
        let flat: Arc<HorFn> = Arc::new(|_: &Point, w: &DVector<f64>| Some(DVector::from_vec(vec![w[0], 0.0])));
        let complete = morita_connection(bundle_pullback(punctured_line(0.0, 1e-3)), flat, 10, 1, &tol).unwrap();
        let fam = arrow_path_family(complete.morphism.clone(), PROBE_SPEED);
        assert!(!completeness_probe(&LiftSystem::arrows(&complete), &*fam, 100, 2, &tol).unwrap().found_witness());
        let punctured = morita_connection(bundle_pullback(punctured_line(0.0, 1e-3)), drifting(), 10, 1, &tol).unwrap();
        let fam = arrow_path_family(punctured.morphism.clone(), PROBE_SPEED);
        assert!(completeness_probe(&LiftSystem::arrows(&punctured), &*fam, 500, 2, &tol).unwrap().found_witness());
    }

    #[test]
    fn non_pullback_is_rejected() {
        let (family, _) = z2_family();
        assert!(matches!(morita_connection(family, zero_base_lift(1), 1, 1, &Tolerances::default()), Err(Error::IncompatibleMorphisms(_))));
    }
}
