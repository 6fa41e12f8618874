use super::{mult_verdict_at, CheckSpec, Observation, Recorder, Scenario};
use crate::connections::{
    action_connection, complement_check, flat_projection_connection, multiplicativity_at, multiplicativity_check_pointwise, pair_connection, ActionOutcome,
    Connection, HorFn, VectorField,
};
use crate::constructions::{
    complete_connection_builder, flatness_certificate_check, haar_average, invariant_exhaustion, level_schedule, morita_connection, morita_uniqueness_residual,
    proper_family_connection, FiberShift, TrivializingAtlas, Window,
};
use crate::error::{Error, Result};
use crate::groupoid_core::catalog::{
    abelian_group, covering_counterexample, group_bundle, cyclic_group, morita_projection, pair_fibration, product_with_manifold, punctured_family, punctured_line,
    so2_action, so2_action_morphism, trivial_family, pair_groupoid,
};
use crate::groupoid_core::{fibration_probe, Groupoid, GroupoidMorphism};
use crate::interval::Interval;
use crate::numeric_core::linalg::pinv;
use crate::numeric_core::{null_space, CoordKind, Patch, Point};
use crate::report::{MultVerdict, Witness};
use crate::rng::{rng_for, symmetric};
use crate::tangent_vb::{horizontal_frames, splitting_correspondence, SplittingGiven, VbFiberData};
use crate::transport::{
    arrow_path_family, completeness_probe, object_path_family, parallel_transport, theorem_crosscheck_kernel, transport_multiplicativity_check, BasePath,
    ConsistencyReport, LiftSystem, CHECK_TIMES, PROBE_SPEED,
};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Base speed of the paths used by the path-level multiplicativity check.
const PATH_SPEED: f64 = 1.0;
/// Samples for fibration-class probes.
const FIBRATION_SAMPLES: usize = 64;

fn spec(pairs: &[(&'static str, &'static str)]) -> Vec<CheckSpec> {
    pairs.iter().map(|&(name, expected)| CheckSpec { name, expected }).collect()
}

pub(super) fn all() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "luca_r2_s1",
            description: "lift hor_(x,y)(a) = (a, x²a) on the group morphism ℝ² → S¹",
            anchor: "a linear complement to ker Tπ need not be multiplicative (b = x²a)",
            checks: spec(&[
                ("complement", "Pass"),
                ("pointwise multiplicativity", "NotMultiplicative"),
                ("product clause at g = h = (1,0), a = b = 1", "NotMultiplicative"),
                ("path multiplicativity", "NotMultiplicative"),
                ("pointwise/path agreement", "Agree"),
            ]),
            run: luca,
        },
        Scenario {
            name: "so2_action_no_mec",
            description: "action morphism SO(2) ⋉ ℝ² → SO(2) with Hor₀ = 0, rotating and trivial action",
            anchor: "an action morphism with Hor₀ = 0 admits a multiplicative connection only if the action is trivial",
            checks: spec(&[
                ("action criterion (rotation)", "Rejected"),
                ("invariance residual at (1,0)", "Pass"),
                ("pointwise multiplicativity (rotation candidate)", "NotMultiplicative"),
                ("path multiplicativity (rotation candidate)", "NotMultiplicative"),
                ("pointwise/path agreement (rotation candidate)", "Agree"),
                ("action criterion (trivial action)", "Accepted"),
                ("multiplicativity at 1e-9 (trivial action)", "Multiplicative"),
                ("pointwise multiplicativity (trivial action)", "Multiplicative"),
                ("path multiplicativity (trivial action)", "Multiplicative"),
                ("pointwise/path agreement (trivial action)", "Agree"),
            ]),
            run: so2_action_no_mec,
        },
        Scenario {
            name: "punctured_group_bundle",
            description: "family ℝ × Z₂ with the non-identity arrow over 0 removed, flat connection",
            anchor: "source-connected kernel is needed for base completeness to give total completeness",
            checks: spec(&[
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
                ("total completeness probe", "IncompleteWitness"),
                ("base completeness probe", "NoCounterexampleFound"),
                ("theorem consistency", "Consistent"),
            ]),
            run: punctured_bundle,
        },
        Scenario {
            name: "disjoint_union_cover",
            description: "H ⊔ H* → H for H = ℝ × Γ and H* punctured at 0, with Γ = Z₂ and Z₃",
            anchor: "a complete kernel does not give a complete total connection without star-surjectivity",
            checks: spec(&[
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
                ("star-surjectivity (Z2)", "false"),
                ("kernel probe (Z2)", "NoCounterexampleFound"),
                ("total probe (Z2)", "IncompleteWitness"),
                ("theorem consistency (Z2)", "Consistent"),
                ("star-surjectivity (Z3)", "false"),
                ("kernel probe (Z3)", "NoCounterexampleFound"),
                ("total probe (Z3)", "IncompleteWitness"),
                ("theorem consistency (Z3)", "Consistent"),
            ]),
            run: disjoint_union_cover,
        },
        Scenario {
            name: "morita_pullback",
            description: "pullback π₀*H → H of the circle bundle ℝ × S¹ along ℝ × F → ℝ",
            anchor: "a pullback projection carries a unique multiplicative connection, complete iff the base lift is",
            checks: spec(&[
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
                ("transport vs closed form", "Pass"),
                ("uniqueness against an independent formula", "Pass"),
                ("perturbed lift uniqueness residual", "Fail"),
                ("perturbed lift multiplicativity", "NotMultiplicative"),
                ("total probe (line fiber)", "NoCounterexampleFound"),
                ("base lift probe (line fiber)", "NoCounterexampleFound"),
                ("total probe (punctured fiber)", "IncompleteWitness"),
                ("base lift probe (punctured fiber)", "IncompleteWitness"),
                ("theorem consistency", "Consistent"),
            ]),
            run: morita_pullback,
        },
        Scenario {
            name: "pair_fibration_kernel_thm",
            description: "Pair(S¹ × F) → Pair(S¹) with a drifting product lift, F = ℝ and ℝ ∖ {0}",
            anchor: "for fibrations the total connection is complete iff its kernel connection is",
            checks: spec(&[
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
                ("theorem consistency (S1 x R)", "Consistent"),
                ("total probe (S1 x R)", "NoCounterexampleFound"),
                ("kernel probe (S1 x R)", "NoCounterexampleFound"),
                ("base probe (S1 x R)", "NoCounterexampleFound"),
                ("theorem consistency (punctured)", "Consistent"),
                ("total probe (punctured)", "IncompleteWitness"),
                ("kernel probe (punctured)", "IncompleteWitness"),
                ("base probe (punctured)", "IncompleteWitness"),
            ]),
            run: pair_fibration_kernel,
        },
        Scenario {
            name: "proper_average",
            description: "Haar averaging on the family ℝ × (SO(2) ⋉ ℝ²) → ℝ",
            anchor: "families with proper total groupoid admit multiplicative connections, by averaging",
            checks: spec(&[
                ("fixed point", "Pass"),
                ("averaged skewed field", "Multiplicative"),
                ("quadrature convergence 256 vs 1024", "Pass"),
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
            ]),
            run: proper_average,
        },
        Scenario {
            name: "sproper_complete_family",
            description: "two-window family ℝ × (ℝ × Z₂ ⇉ ℝ) with polynomial fiber shifts",
            anchor: "source-proper locally trivial families admit a complete multiplicative connection",
            checks: spec(&[
                ("invariant exhaustion", "Pass"),
                ("level schedule disjointness", "Pass"),
                ("certificate", "CertifiedComplete"),
                ("certificate recheck", "CertifiedComplete"),
                ("completeness probe", "NoCounterexampleFound"),
                ("injected overlapping schedule", "CertificateFailure"),
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
            ]),
            run: sproper_complete_family,
        },
        Scenario {
            name: "product_not_uniform",
            description: "projection Pair(ℝ) × ℝ → Pair(ℝ)",
            anchor: "a fibration need not be uniform",
            checks: spec(&[
                ("fibration", "true"),
                ("uniform", "false"),
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
                ("theorem consistency", "Consistent"),
            ]),
            run: product_not_uniform,
        },
        Scenario {
            name: "splitting_fixture",
            description: "splittings of 0 → A → B → C → 0, random and from a connection on Pair(S¹ × ℝ)",
            anchor: "right splittings, left splittings and complements of the core correspond",
            checks: spec(&[
                ("random exact sequences", "Pass"),
                ("connection splittings", "Pass"),
                ("horizontal VB-subgroupoid", "Multiplicative"),
                ("pointwise multiplicativity", "Multiplicative"),
                ("path multiplicativity", "Multiplicative"),
                ("pointwise/path agreement", "Agree"),
            ]),
            run: splitting_fixture,
        },
    ]
}

// ---------------------------------------------------------------------------
// shared checks

/// Pointwise and path-level multiplicativity on the scenario budgets, and whether they agree.
fn multiplicativity_pair(r: &mut Recorder, suffix: &str, c: &Connection) {
    multiplicativity_pair_with_step(r, suffix, c, None)
}

/// As `multiplicativity_pair`, with the path check started from macro step `h_ode` (the
/// integrator still refines against `ode_tol`).
fn multiplicativity_pair_with_step(r: &mut Recorder, suffix: &str, c: &Connection, h_ode: Option<f64>) {
    let mut pointwise = None;
    let mut path = None;
    r.check(&format!("pointwise multiplicativity{suffix}"), |cfg| {
        let rep = multiplicativity_check_pointwise(c, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        pointwise = Some(rep.verdict);
        Ok(Observation::from_mult(&rep))
    });
    r.check(&format!("path multiplicativity{suffix}"), |cfg| {
        let mut tol = cfg.tol.clone();
        if let Some(h) = h_ode {
            tol.h_ode = h;
        }
        let rep = transport_multiplicativity_check(c, cfg.budget(cfg.tol.path_pairs), cfg.seed, PATH_SPEED, &tol)?;
        path = Some(rep.verdict);
        Ok(Observation::from_mult(&rep).num("h_ode", tol.h_ode))
    });
    r.check(&format!("pointwise/path agreement{suffix}"), |_| {
        let (Some(p), Some(q)) = (pointwise, path) else {
            return Err(Error::InvalidParams("a multiplicativity check did not run".into()));
        };
        let agree = p == q && p != MultVerdict::Inconclusive;
        Ok(Observation::new(if agree { "Agree" } else { "Disagree" }).detail("pointwise", p.as_str()).detail("path", q.as_str()))
    });
}

/// Total, kernel and base probes against the completeness implications; records the named
/// probe checks that the scenario registers.
fn crosscheck(r: &mut Recorder, suffix: &str, c: &Connection, probes: &[(&str, &str)]) -> Option<ConsistencyReport> {
    let mut out = None;
    r.check(&format!("theorem consistency{suffix}"), |cfg| {
        let rep = theorem_crosscheck_kernel(c, cfg.budget(cfg.tol.crosscheck_budget), cfg.seed, PROBE_SPEED, &cfg.tol)?;
        let mut o = Observation::new(if rep.consistent { "Consistent" } else { "Inconsistent" })
            .detail("total", rep.total.label())
            .detail("kernel", rep.kernel.label())
            .detail("base", rep.base.label())
            .detail("fibration", rep.fibration.is_fibration())
            .detail("source_connected_kernel", rep.source_connected_kernel);
        for (i, v) in rep.violations.iter().enumerate() {
            o = o.detail(&format!("violation.{i}"), v);
        }
        for (i, v) in rep.skipped.iter().enumerate() {
            o = o.detail(&format!("skipped.{i}"), v);
        }
        out = Some(rep);
        Ok(o)
    });
    for (name, which) in probes {
        r.check(name, |cfg| {
            let rep = out.as_ref().ok_or_else(|| Error::InvalidParams("crosscheck did not run".into()))?;
            let v = match *which {
                "total" => &rep.total,
                "kernel" => &rep.kernel,
                _ => &rep.base,
            };
            Ok(Observation::from_probe(v, cfg.budget(cfg.tol.crosscheck_budget)))
        });
    }
    out
}

// ---------------------------------------------------------------------------
// scenarios

fn luca_connection() -> Connection {
    Connection::new(
        Arc::new(crate::groupoid_core::catalog::plane_to_circle()),
        |g, a| Some(DVector::from_vec(vec![a[0], g.coords[0] * g.coords[0] * a[0]])),
        |_, _| Some(DVector::zeros(0)),
        "(a, x²a)",
    )
}

fn luca(r: &mut Recorder) -> Result<()> {
    let c = luca_connection();
    r.check("complement", |cfg| {
        let rep = complement_check(&c, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        Ok(Observation::from_check(&rep.check).num("min_angle", rep.min_angle))
    });
    multiplicativity_pair_split(r, &c, |r| {
        r.check("product clause at g = h = (1,0), a = b = 1", |cfg| {
            let g = Point::new(0, vec![1.0, 0.0]);
            let one = DVector::from_vec(vec![1.0]);
            let at = multiplicativity_at(&c, &g, &g, &one, &one, &cfg.tol)?;
            let (gr, h) = (c.total(), c.base());
            let (jl, jr) = gr.mul.jacobians(&g, &g, cfg.tol.fd_step)?;
            let produced = jl * c.lift(&g, &one)? + jr * c.lift(&g, &one)?;
            let pg = c.morphism.pi(&g);
            let (bl, br) = h.mul.jacobians(&pg, &pg, cfg.tol.fd_step)?;
            let required = c.lift(&gr.m(&g, &g), &(bl * &one + br * &one))?;
            let residual = at.clause("product").map_or(f64::INFINITY, |cl| cl.residual);
            let verdict = MultVerdict::from_residual(residual, cfg.tol.tol_mult);
            Ok(Observation::new(verdict.as_str())
                .residual(residual)
                .witness(Some(Witness::new("g, h, a, b", vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0])))
                .samples(1)
                .detail("produced", format_vec(&produced))
                .detail("required", format_vec(&required)))
        });
    });
    // one loop transport for the dump directory
    let start = Point::new(0, vec![1.0, 0.0]);
    let loop_path = BasePath::linear(c.base().arrows.clone(), Point::new(0, vec![1.0]), DVector::from_vec(vec![TAU])).tagged(false, true);
    if let Ok(out) = parallel_transport(&c, &loop_path, &start, 1.0, r.tol()) {
        r.dump("loop_from_1_0", &out.trajectory);
    }
    Ok(())
}

/// Like `multiplicativity_pair` with no suffix, running `between` after the pointwise check.
fn multiplicativity_pair_split(r: &mut Recorder, c: &Connection, between: impl FnOnce(&mut Recorder)) {
    let mut pointwise = None;
    r.check("pointwise multiplicativity", |cfg| {
        let rep = multiplicativity_check_pointwise(c, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        pointwise = Some(rep.verdict);
        Ok(Observation::from_mult(&rep))
    });
    between(r);
    let mut path = None;
    r.check("path multiplicativity", |cfg| {
        let rep = transport_multiplicativity_check(c, cfg.budget(cfg.tol.path_pairs), cfg.seed, PATH_SPEED, &cfg.tol)?;
        path = Some(rep.verdict);
        Ok(Observation::from_mult(&rep))
    });
    r.check("pointwise/path agreement", |_| {
        let (Some(p), Some(q)) = (pointwise, path) else {
            return Err(Error::InvalidParams("a multiplicativity check did not run".into()));
        };
        let agree = p == q && p != MultVerdict::Inconclusive;
        Ok(Observation::new(if agree { "Agree" } else { "Disagree" }).detail("pointwise", p.as_str()).detail("path", q.as_str()))
    });
}

fn format_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| crate::report_number(*x)).collect();
    format!("({})", parts.join(", "))
}

fn so2_action_no_mec(r: &mut Recorder) -> Result<()> {
    let zero: Arc<HorFn> = Arc::new(|_, _| Some(DVector::zeros(2)));
    let x = Point::new(0, vec![1.0, 0.0]);
    let rotation = Arc::new(so2_action_morphism(false));
    r.check("action criterion (rotation)", |cfg| {
        let out = action_connection(rotation.clone(), zero.clone(), cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &[x.clone()], &cfg.tol)?;
        let verdict = match out {
            ActionOutcome::Accepted { .. } => "Accepted",
            ActionOutcome::Rejected { .. } => "Rejected",
        };
        let inv = out.invariance();
        Ok(Observation::new(verdict).residual(inv.worst_residual).witness(inv.witness.clone()).samples(inv.samples))
    });
    r.check("invariance residual at (1,0)", |cfg| {
        // only the generator clause at the one point
        let out = action_connection(rotation.clone(), zero.clone(), 0, cfg.seed, &[x.clone()], &cfg.tol)?;
        let rho = out.invariance().worst_residual;
        Ok(Observation::pass_if(rho >= 0.9).residual(rho).samples(1).witness(Some(Witness::points("object", &[&x]))))
    });
    // the rejected candidate itself, (θ, p; a) ↦ (a, 0, 0)
    let candidate = Connection::new(rotation.clone(), |_, a| Some(DVector::from_vec(vec![a[0], 0.0, 0.0])), |_, _| Some(DVector::zeros(2)), "rotation candidate");
    multiplicativity_pair(r, " (rotation candidate)", &candidate);

    let mut accepted = None;
    r.check("action criterion (trivial action)", |cfg| {
        let out = action_connection(Arc::new(so2_action_morphism(true)), zero.clone(), cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &[x.clone()], &cfg.tol)?;
        let inv = out.invariance().clone();
        let verdict = match out {
            ActionOutcome::Accepted { connection, .. } => {
                accepted = Some(connection);
                "Accepted"
            }
            ActionOutcome::Rejected { .. } => "Rejected",
        };
        Ok(Observation::new(verdict).residual(inv.worst_residual).witness(inv.witness).samples(inv.samples))
    });
    let Some(c) = accepted else {
        return Err(Error::InvalidParams("trivial action candidate was rejected".into()));
    };
    r.check("multiplicativity at 1e-9 (trivial action)", |cfg| {
        let rep = multiplicativity_check_pointwise(&c, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        Ok(Observation::from_mult(&rep).with_verdict(mult_verdict_at(&rep, 1e-9).as_str()))
    });
    multiplicativity_pair(r, " (trivial action)", &c);
    Ok(())
}

impl Observation {
    fn with_verdict(mut self, v: &str) -> Self {
        self.verdict = v.to_string();
        self
    }
}

fn punctured_bundle(r: &mut Recorder) -> Result<()> {
    let c = flat_projection_connection(Arc::new(punctured_family(2, 0.0, 1e-3)));
    multiplicativity_pair(r, "", &c);
    r.check("total completeness probe", |cfg| {
        let budget = cfg.budget(cfg.tol.probe_budget);
        let v = completeness_probe(&LiftSystem::arrows(&c), &*arrow_path_family(c.morphism.clone(), PROBE_SPEED), budget, cfg.seed, &cfg.tol)?;
        Ok(Observation::from_probe(&v, budget))
    });
    r.check("base completeness probe", |cfg| {
        let budget = cfg.budget(cfg.tol.probe_budget);
        let v = completeness_probe(&LiftSystem::objects(&c), &*object_path_family(c.morphism.clone(), PROBE_SPEED), budget, cfg.seed, &cfg.tol)?;
        Ok(Observation::from_probe(&v, budget))
    });
    // the escaping transport through the removed arrow, for the dump directory
    let gamma = BasePath::linear(c.base().arrows.clone(), Point::new(0, vec![-1.0]), DVector::from_vec(vec![2.0]));
    if let Ok(out) = parallel_transport(&c, &gamma, &Point::new(1, vec![-1.0]), 1.0, r.tol()) {
        r.dump("escape_through_0", &out.trajectory);
    }
    crosscheck(r, "", &c, &[]);
    Ok(())
}

fn disjoint_union_cover(r: &mut Recorder) -> Result<()> {
    let c2 = flat_projection_connection(Arc::new(covering_counterexample(2, 0.0, 1e-3)));
    multiplicativity_pair(r, "", &c2);
    for order in [2usize, 3] {
        let c = if order == 2 { c2.clone() } else { flat_projection_connection(Arc::new(covering_counterexample(order, 0.0, 1e-3))) };
        let suffix = format!(" (Z{order})");
        let kernel = format!("kernel probe{suffix}");
        let total = format!("total probe{suffix}");
        let rep = crosscheck_named(r, &suffix, &c, &[(&kernel, "kernel"), (&total, "total")]);
        r.check(&format!("star-surjectivity{suffix}"), |_| {
            let rep = rep.as_ref().ok_or_else(|| Error::InvalidParams("crosscheck did not run".into()))?;
            let f = &rep.fibration;
            Ok(Observation::new(f.star_surjective_heuristic.to_string())
                .residual(f.worst_uncovered_distance)
                .witness(f.uncovered_witness.clone())
                .samples(f.samples))
        });
    }
    Ok(())
}

fn crosscheck_named(r: &mut Recorder, suffix: &str, c: &Connection, probes: &[(&String, &str)]) -> Option<ConsistencyReport> {
    let probes: Vec<(&str, &str)> = probes.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    crosscheck(r, suffix, c, &probes)
}

/// `ḟ = (0.3 f + 1) ṅ`, so `0.3 f + 1` grows like `exp(0.3 n)`.
fn drifting_hor0() -> Arc<HorFn> {
    Arc::new(|x: &Point, w: &DVector<f64>| Some(DVector::from_vec(vec![w[0], (0.3 * x.coords[1] + 1.0) * w[0]])))
}

fn drift_closed_form(f0: f64, dn: f64) -> f64 {
    ((0.3 * f0 + 1.0) * (0.3 * dn).exp() - 1.0) / 0.3
}

fn circle_bundle_pullback(fiber: Patch) -> Arc<GroupoidMorphism> {
    let base = group_bundle(Patch::lines("n", 1), &abelian_group("S1", vec![CoordKind::Angle]));
    Arc::new(morita_projection(Arc::new(base), fiber))
}

fn morita_pullback(r: &mut Recorder) -> Result<()> {
    let tol = r.tol().clone();
    let c = morita_connection(circle_bundle_pullback(Patch::lines("f", 1)), drifting_hor0(), 20, r.seed(), &tol)?;
    multiplicativity_pair(r, "", &c);
    let mut first_path = None;
    r.check("transport vs closed form", |cfg| {
        // arrows (f, n, θ, f'); the base path moves (n, θ) linearly
        let n_pairs = cfg.budget(50.0);
        let mut worst = 0.0f64;
        let mut witness = None;
        for k in 0..n_pairs {
            let mut rng = rng_for(cfg.seed ^ 0x3011, k as u64);
            let g = c.total().sample_arrow(&mut rng);
            let v = DVector::from_vec(vec![symmetric(&mut rng, 2.0), symmetric(&mut rng, 2.0 * TAU)]);
            let gamma = BasePath::linear(c.base().arrows.clone(), c.morphism.pi(&g), v.clone());
            let out = parallel_transport(&c, &gamma, &g, 1.0, &cfg.tol)?;
            if k == 0 {
                first_path = Some(out.trajectory.clone());
            }
            for t in CHECK_TIMES {
                let Some(p) = out.at(t, &cfg.tol) else {
                    return Err(Error::InvalidParams(format!("transport {k} escaped on a complete fiber")));
                };
                let (f, n, th, f2) = (g.coords[0], g.coords[1], g.coords[2], g.coords[3]);
                let expected = Point::new(p.patch, vec![drift_closed_form(f, v[0] * t), n + v[0] * t, th + v[1] * t, drift_closed_form(f2, v[0] * t)]);
                let d = c.total().arrows.dist(p, &expected);
                if d > worst || witness.is_none() {
                    worst = worst.max(d);
                    witness = Some(Witness::points("start arrow", &[&g]));
                }
            }
        }
        Ok(Observation::pass_if(worst < 1e-6).residual(worst).witness(witness).samples(n_pairs))
    });
    if let Some(traj) = &first_path {
        r.dump("closed_form_path_0", traj);
    }
    r.check("uniqueness against an independent formula", |cfg| {
        let copy = Connection::new(
            c.morphism.clone(),
            |g, a| {
                let rate = |f: f64| (0.3 * f + 1.0) * a[0];
                Some(DVector::from_vec(vec![rate(g.coords[0]), a[0], a[1], rate(g.coords[3])]))
            },
            |x, w| drifting_hor0()(x, w),
            "independent formula",
        );
        Ok(Observation::from_check(&morita_uniqueness_residual(&copy, cfg.budget(200.0), cfg.seed, &cfg.tol)?))
    });
    let hor = c.hor.clone();
    let perturbed = Connection::new(
        c.morphism.clone(),
        move |g, a| {
            let mut v = hor(g, a)?;
            v[0] += 1e-3 * a[1];
            Some(v)
        },
        |x, w| drifting_hor0()(x, w),
        "vertically skewed",
    );
    r.check("perturbed lift uniqueness residual", |cfg| Ok(Observation::from_check(&morita_uniqueness_residual(&perturbed, cfg.budget(200.0), cfg.seed, &cfg.tol)?)));
    r.check("perturbed lift multiplicativity", |cfg| {
        Ok(Observation::from_mult(&multiplicativity_check_pointwise(&perturbed, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?))
    });
    let punctured = morita_connection(circle_bundle_pullback(punctured_line(0.0, 1e-3)), drifting_hor0(), 20, r.seed(), &tol)?;
    for (label, conn) in [("line fiber", &c), ("punctured fiber", &punctured)] {
        r.check(&format!("total probe ({label})"), |cfg| {
            let budget = cfg.budget(cfg.tol.probe_budget);
            let v = completeness_probe(&LiftSystem::arrows(conn), &*arrow_path_family(conn.morphism.clone(), PROBE_SPEED), budget, cfg.seed, &cfg.tol)?;
            Ok(Observation::from_probe(&v, budget))
        });
        r.check(&format!("base lift probe ({label})"), |cfg| {
            let budget = cfg.budget(cfg.tol.probe_budget);
            let v = completeness_probe(&LiftSystem::objects(conn), &*object_path_family(conn.morphism.clone(), PROBE_SPEED), budget, cfg.seed, &cfg.tol)?;
            Ok(Observation::from_probe(&v, budget))
        });
    }
    crosscheck(r, "", &c, &[]);
    Ok(())
}

fn drifting_pair(fiber: Patch) -> Connection {
    let hor0: Arc<HorFn> = Arc::new(|_, w| Some(DVector::from_vec(vec![w[0], w[0]])));
    pair_connection(Arc::new(pair_fibration(Patch::new("th", vec![CoordKind::Angle]), fiber)), hor0, "drifting product lift")
}

fn pair_fibration_kernel(r: &mut Recorder) -> Result<()> {
    let complete = drifting_pair(Patch::lines("f", 1));
    multiplicativity_pair(r, "", &complete);
    crosscheck(
        r,
        " (S1 x R)",
        &complete,
        &[("total probe (S1 x R)", "total"), ("kernel probe (S1 x R)", "kernel"), ("base probe (S1 x R)", "base")],
    );
    let punctured = drifting_pair(punctured_line(0.0, 1e-3));
    crosscheck(
        r,
        " (punctured)",
        &punctured,
        &[("total probe (punctured)", "total"), ("kernel probe (punctured)", "kernel"), ("base probe (punctured)", "base")],
    );
    Ok(())
}

fn so2_family() -> Arc<GroupoidMorphism> {
    Arc::new(trivial_family(Patch::lines("n", 1), Arc::new(so2_action(false))))
}

fn field_distance(a: &VectorField, b: &VectorField, gr: &Groupoid, n: usize, seed: u64) -> (f64, Option<Witness>) {
    let mut worst = 0.0f64;
    let mut witness = None;
    for k in 0..n {
        let g = gr.sample_arrow(&mut rng_for(seed ^ 0xa7e, k as u64));
        let d = match (a(&g), b(&g)) {
            (Some(x), Some(y)) => (x - y).amax(),
            _ => f64::INFINITY,
        };
        if d > worst || witness.is_none() {
            worst = worst.max(d);
            witness = Some(Witness::points("arrow", &[&g]));
        }
    }
    (worst, witness)
}

fn proper_average(r: &mut Recorder) -> Result<()> {
    let fam = so2_family();
    let gr = fam.total.clone();
    // arrows (n, θ, x, y); the θ-component may be anything and stays source-projectable
    let skewed: VectorField = Arc::new(|g: &Point| {
        let c = &g.coords;
        Some(DVector::from_vec(vec![0.0, 0.3 * c[1].sin() + 0.2 * c[2] + 0.1 * c[0], 0.0, 1.0]))
    });
    r.check("fixed point", |cfg| {
        let n = cfg.budget(100.0);
        let x: VectorField = Arc::new(|_: &Point| Some(DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])));
        let avg = haar_average(gr.clone(), x.clone(), cfg.tol.quad_nodes as usize, n, cfg.seed, &cfg.tol)?;
        let (d, w) = field_distance(&avg.field, &x, &gr, n, cfg.seed);
        Ok(Observation::pass_if(d < 1e-9).residual(d).witness(w).samples(n))
    });
    let mut coarse = None;
    r.check("averaged skewed field", |cfg| {
        let avg = haar_average(gr.clone(), skewed.clone(), cfg.tol.quad_nodes as usize, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        let v = MultVerdict::from_residual(avg.report.worst_residual, cfg.tol.tol_mult);
        let o = Observation::from_check(&avg.report).with_verdict(v.as_str()).num("projectability_defect", avg.projectability_defect);
        coarse = Some(avg);
        Ok(o)
    });
    r.check("quadrature convergence 256 vs 1024", |cfg| {
        let coarse = coarse.as_ref().ok_or_else(|| Error::InvalidParams("coarse average did not run".into()))?;
        let nodes = (cfg.tol.quad_nodes * cfg.tol.quad_refine) as usize;
        let fine = haar_average(gr.clone(), skewed.clone(), nodes, 10, cfg.seed, &cfg.tol)?;
        let n = cfg.budget(100.0);
        let (d, w) = field_distance(&coarse.field, &fine.field, &gr, n, cfg.seed);
        Ok(Observation::pass_if(d < 1e-8).residual(d).witness(w).samples(n).detail("fine_nodes", nodes))
    });
    let hor0: Arc<HorFn> = Arc::new(|x: &Point, w: &DVector<f64>| {
        let c = &x.coords;
        Some(DVector::from_vec(vec![w[0], 0.2 * c[0].cos() * w[0], 0.1 * c[1] * w[0]]))
    });
    let hor_s: Arc<HorFn> = Arc::new(|g: &Point, v: &DVector<f64>| {
        let c = &g.coords;
        Some(DVector::from_vec(vec![v[0], 0.3 * c[1].sin() * v[0] + 0.2 * c[2] * v[2], v[1], v[2]]))
    });
    let c = proper_family_connection(fam, hor0, hor_s, r.tol().quad_nodes as usize, r.tol())?;
    multiplicativity_pair_with_step(r, "", &c, Some(AVERAGED_PATH_STEP));
    Ok(())
}

/// Initial macro step for transports of the averaged connection, whose every lift is a
/// quadrature sum; a multiple of the check times' spacing.
const AVERAGED_PATH_STEP: f64 = 0.05;

fn two_window_atlas() -> Result<TrivializingAtlas> {
    let fiber = Arc::new(group_bundle(Patch::lines("x", 1), &cyclic_group(2)));
    let family = Arc::new(trivial_family(Patch::lines("n", 1), fiber.clone()));
    TrivializingAtlas::new(
        family,
        fiber,
        vec![Window::interval((-7.5, 0.5), (-8.0, 1.0)), Window::interval((-0.5, 7.5), (-1.0, 8.0))],
        vec![FiberShift::new(0.5, 0.3, 0.0), FiberShift::new(-0.2, -0.25, 0.05)],
        0,
        vec![Interval::new(-7.0, 7.0)],
        vec![Interval::new(-8.0, 8.0)],
    )
}

/// Levels per window in the builder schedule.
const SCHEDULE_DEPTH: usize = 6;

fn sproper_complete_family(r: &mut Recorder) -> Result<()> {
    let atlas = two_window_atlas()?;
    let tol = r.tol().clone();
    let mut exhaustion = None;
    r.check("invariant exhaustion", |cfg| {
        let (f, rep) = invariant_exhaustion(&atlas.fiber, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        let ok = rep.invariance.passed && rep.growth.passed;
        let worst = rep.invariance.worst_residual.max(rep.growth.worst_residual);
        let o = Observation::pass_if(ok).residual(worst).samples(rep.invariance.samples).detail("function", &f.name);
        exhaustion = Some(f);
        Ok(o)
    });
    let f = exhaustion.ok_or_else(|| Error::NotSourceProper(atlas.fiber.name.clone()))?;
    let schedule = level_schedule(&atlas, &f, SCHEDULE_DEPTH, &tol)?;
    r.check("level schedule disjointness", |_| {
        let mut o = Observation::pass_if(schedule.disjoint).samples(schedule.pairs.len());
        for (a, ls) in schedule.levels.iter().enumerate() {
            o = o.detail(&format!("levels.window{a}"), format!("{ls:?}"));
        }
        Ok(o)
    });
    let mut built = None;
    r.check("certificate", |cfg| {
        let (c, cert) = complete_connection_builder(&atlas, &f, &schedule, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        let worst = cert.windows.iter().fold(0.0f64, |m, w| m.max(w.flat_residual));
        let o = Observation::new(if cert.is_certified() { "CertifiedComplete" } else { "NotCertified" })
            .residual(worst)
            .witness(cert.windows.iter().find_map(|w| w.flat_witness.clone()))
            .samples(cert.windows.iter().map(|w| w.flat_samples).sum())
            .detail("cover_ok", cert.cover_ok);
        built = Some(c);
        Ok(o)
    });
    let Some(c) = built else {
        return Err(Error::CertificateFailure("builder did not produce a connection".into()));
    };
    r.check("certificate recheck", |cfg| {
        let cert = flatness_certificate_check(&c, &atlas, &f, &schedule.level_values(), cfg.budget(cfg.tol.pointwise_samples), cfg.seed ^ 0x5eed, &cfg.tol)?;
        let worst = cert.windows.iter().fold(0.0f64, |m, w| m.max(w.flat_residual));
        Ok(Observation::new(if cert.is_certified() { "CertifiedComplete" } else { "NotCertified" })
            .residual(worst)
            .samples(cfg.budget(cfg.tol.pointwise_samples)))
    });
    r.check("completeness probe", |cfg| {
        let budget = cfg.budget(cfg.tol.probe_budget);
        let v = completeness_probe(&LiftSystem::arrows(&c), &*arrow_path_family(c.morphism.clone(), PROBE_SPEED), budget, cfg.seed, &cfg.tol)?;
        Ok(Observation::from_probe(&v, budget))
    });
    r.check("injected overlapping schedule", |cfg| {
        let mut bad = schedule.clone();
        bad.levels[1] = bad.levels[0].clone();
        Ok(match complete_connection_builder(&atlas, &f, &bad, cfg.budget(20.0), cfg.seed, &cfg.tol) {
            Err(Error::CertificateFailure(msg)) => Observation::new("CertificateFailure").detail("clause", msg),
            Err(e) => return Err(e),
            Ok(_) => Observation::new("CertifiedComplete"),
        })
    });
    multiplicativity_pair(r, "", &c);
    Ok(())
}

fn product_not_uniform(r: &mut Recorder) -> Result<()> {
    let pi = Arc::new(product_with_manifold(Arc::new(pair_groupoid(Patch::lines("n", 1))), Patch::lines("p", 1)));
    let mut probe = None;
    r.check("fibration", |cfg| {
        let v = fibration_probe(&pi, FIBRATION_SAMPLES, cfg.seed, &cfg.tol)?;
        let o = Observation::new(v.is_fibration().to_string())
            .samples(v.samples)
            .num("min_singular_value", v.min_singular_value)
            .num("worst_uncovered_distance", v.worst_uncovered_distance);
        probe = Some(v);
        Ok(o)
    });
    r.check("uniform", |_| {
        let v = probe.as_ref().ok_or_else(|| Error::InvalidParams("fibration probe did not run".into()))?;
        Ok(Observation::new(v.uniform_ok.to_string()).samples(v.samples).detail("uniform_rank_deficit", v.uniform_rank_deficit))
    });
    let c = flat_projection_connection(pi.clone());
    multiplicativity_pair(r, "", &c);
    crosscheck(r, "", &c, &[]);
    Ok(())
}

/// `ι` = first columns of an invertible matrix `B`, `π̃` = last rows of `B⁻¹`.
fn random_sequence(seed: u64, ka: usize, kc: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ka + kc;
    let mut rng = rng_for(seed, 0);
    let b = DMatrix::from_fn(n, n, |_, _| symmetric(&mut rng, 1.0)) + DMatrix::identity(n, n) * (n + 1) as f64;
    let iota = b.columns(0, ka).into_owned();
    let proj = b.try_inverse().expect("diagonally dominant").rows(ka, kc).into_owned();
    (iota, proj)
}

/// Worst residual over the three ways of supplying a splitting.
fn splitting_residual(iota: DMatrix<f64>, proj: DMatrix<f64>, h: DMatrix<f64>) -> Result<f64> {
    let kc = proj.nrows();
    let mut d = VbFiberData::new(iota, proj);
    d.right_splitting = Some(h.clone());
    let right = splitting_correspondence(&d, SplittingGiven::Right)?;
    let mut dl = VbFiberData::new(d.inclusion.clone(), d.projection.clone());
    dl.left_splitting = Some(right.left_splitting.clone());
    let left = splitting_correspondence(&dl, SplittingGiven::Left)?;
    let mut dc = VbFiberData::new(d.inclusion.clone(), d.projection.clone());
    dc.complement = Some(&h * DMatrix::from_fn(kc, kc, |i, j| if i == j { 1.5 } else { 0.1 }));
    let comp = splitting_correspondence(&dc, SplittingGiven::Complement)?;
    let agree = (&left.right_splitting - &h).amax().max((&comp.right_splitting - &h).amax());
    Ok(right.residuals.worst().max(left.residuals.worst()).max(comp.residuals.worst()).max(agree))
}

fn splitting_fixture(r: &mut Recorder) -> Result<()> {
    r.check("random exact sequences", |cfg| {
        let n = cfg.budget(50.0);
        let mut worst = 0.0f64;
        let mut witness = None;
        for k in 0..n {
            let fixture_seed = cfg.seed.wrapping_mul(1000).wrapping_add(k as u64);
            let (ka, kc) = (1 + k % 3, 1 + (k / 3) % 3);
            let (iota, proj) = random_sequence(fixture_seed, ka, kc);
            let mut rng = rng_for(fixture_seed, 1);
            let x = DMatrix::from_fn(ka, kc, |_, _| symmetric(&mut rng, 1.0));
            let h = pinv(&proj, 1e-14) + &iota * x;
            let res = splitting_residual(iota, proj, h)?;
            if res > worst || witness.is_none() {
                worst = worst.max(res);
                witness = Some(Witness::new("fixture seed, dim A, dim C", vec![fixture_seed as f64, ka as f64, kc as f64]));
            }
        }
        Ok(Observation::pass_if(worst < 1e-12).residual(worst).witness(witness).samples(n))
    });
    let c = drifting_pair(Patch::lines("f", 1));
    r.check("connection splittings", |cfg| {
        let n = cfg.budget(50.0);
        let mut worst = 0.0f64;
        let mut witness = None;
        for k in 0..n {
            let g = c.total().sample_arrow(&mut rng_for(cfg.seed ^ 0x5b1, k as u64));
            let proj = c.morphism.arrow_map.jacobian(&g, cfg.tol.fd_step)?;
            let iota = null_space(&proj, cfg.tol.rank_tol);
            let res = splitting_residual(iota, proj, c.lift_matrix(&g)?)?;
            if res > worst || witness.is_none() {
                worst = worst.max(res);
                witness = Some(Witness::points("arrow", &[&g]));
            }
        }
        Ok(Observation::pass_if(worst < 1e-12).residual(worst).witness(witness).samples(n))
    });
    r.check("horizontal VB-subgroupoid", |cfg| {
        let frames = horizontal_frames(&c);
        let rep = crate::tangent_vb::vb_subgroupoid_check(c.total(), &frames, cfg.budget(cfg.tol.pointwise_samples), cfg.seed, &cfg.tol)?;
        Ok(Observation::from_mult(&rep))
    });
    multiplicativity_pair(r, "", &c);
    Ok(())
}
