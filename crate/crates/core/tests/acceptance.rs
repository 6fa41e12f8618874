//! Acceptance suite: one line per criterion, non-zero exit if any criterion fails.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always printed:
//! `cargo test -p groupoid-conn --test acceptance`.

use groupoid_conn::groupoid_core::catalog::{catalog, Params, CATALOG_NAMES};
use groupoid_conn::groupoid_core::check_axioms;
use groupoid_conn::numeric_core::ode::{integrate, EscapeReason, OdeSettings, TrajectoryStatus};
use groupoid_conn::numeric_core::{Patch, Point};
use groupoid_conn::scenario_cli::{emit_report, parse_number, run_all, CheckEntry, Format, ReportDocument, RunConfig};
use groupoid_conn::Tolerances;
use std::process::ExitCode;
use std::time::Instant;

type Outcome = Result<String, String>;

struct Reports(Vec<ReportDocument>);

impl Reports {
    fn doc(&self, scenario: &str) -> Result<&ReportDocument, String> {
        self.0.iter().find(|d| d.scenario == scenario).ok_or_else(|| format!("scenario {scenario} missing"))
    }

    fn entry(&self, scenario: &str, check: &str) -> Result<&CheckEntry, String> {
        self.doc(scenario)?.check(check).ok_or_else(|| format!("{scenario}: check `{check}` missing"))
    }

    /// The entry, after requiring its verdict.
    fn expect(&self, scenario: &str, check: &str, verdict: &str) -> Result<&CheckEntry, String> {
        let e = self.entry(scenario, check)?;
        if e.verdict != verdict {
            return Err(format!("{scenario}: `{check}` gave {} instead of {verdict}", e.verdict));
        }
        Ok(e)
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    s.trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(|x| parse_number(x.trim()).ok_or_else(|| format!("bad number `{x}` in `{s}`")))
        .collect()
}

fn catalog_variants() -> Vec<(&'static str, Params)> {
    let p = Params::new;
    vec![
        ("pair", p().with("space", "line")),
        ("pair", p().with("space", "plane")),
        ("pair", p().with("space", "circle")),
        ("pair", p().with("space", "punctured_line")),
        ("action", p().with("group", "so2")),
        ("action", p().with("group", "so2").with("trivial", true)),
        ("action", p().with("group", "cyclic").with("order", 3)),
        ("group_bundle", p().with("group", "cyclic").with("order", 2)),
        ("group_bundle", p().with("group", "circle")),
        ("punctured_group_bundle", p().with("order", 2)),
        ("punctured_group_bundle", p().with("order", 3)),
        ("pullback", p().with("base", "circle_group").with("fiber", "line")),
        ("pullback", p().with("base", "circle_bundle").with("fiber", "punctured_line")),
        ("trivial_family", p().with("fiber", "cyclic")),
        ("trivial_family", p().with("fiber", "so2_action")),
        ("trivial_family", p().with("fiber", "pair_line")),
        ("disjoint_union", p().with("order", 2)),
        ("disjoint_union", p().with("order", 3)),
        ("product_with_manifold", p().with("base", "pair_line")),
        ("product_with_manifold", p().with("base", "circle_bundle").with("dim", 2)),
    ]
}

fn groupoid_axioms(tol: &Tolerances) -> Outcome {
    let variants = catalog_variants();
    for name in CATALOG_NAMES {
        require(variants.iter().any(|(n, _)| n == name), || format!("catalog entry {name} not exercised"))?;
    }
    let (mut count, mut worst) = (0, 0.0f64);
    for (name, params) in &variants {
        let entry = catalog(name, params).map_err(|e| format!("{name}: {e}"))?;
        for g in entry.groupoids() {
            let rep = check_axioms(&g, 200, 0, tol).map_err(|e| format!("{}: {e}", g.name))?;
            require(rep.worst_residual < 1e-9, || format!("{}: residual {:e} at {:?}", g.name, rep.worst_residual, rep.witness))?;
            worst = worst.max(rep.worst_residual);
            count += 1;
        }
    }
    Ok(format!("{count} groupoids, 200 samples each, worst residual {worst:.2e}"))
}

fn integrator_order() -> Outcome {
    let patch = Patch::lines("x", 1);
    let exact = 1f64.exp();
    // fixed steps: no refinement, so the step is exactly h / 2 (the kept half steps)
    let mut errors = Vec::new();
    for k in 0..5 {
        let h = 0.1 / 2f64.powi(k);
        let settings = OdeSettings { h, tol: f64::INFINITY, blowup: 1e12, tol_time: 1e-12, max_halvings: 0 };
        let out = integrate(|_, x: &[f64]| Some(vec![x[0]]), &patch, &Point::new(0, vec![1.0]), 1.0, &settings).map_err(|e| e.to_string())?;
        errors.push((out.end().coords[0] - exact).abs());
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    for o in &orders {
        require((3.7..=4.3).contains(o), || format!("orders {orders:?}"))?;
    }

    let settings = OdeSettings::default();
    let out = integrate(|_, x: &[f64]| Some(vec![x[0] * x[0]]), &patch, &Point::new(0, vec![2.0]), 1.0, &settings).map_err(|e| e.to_string())?;
    let t = out.escape_time.ok_or("x' = x² did not escape")?;
    require(out.status == TrajectoryStatus::Escaped && out.escape_reason == Some(EscapeReason::NormBlowup), || format!("{:?} {:?}", out.status, out.escape_reason))?;
    require((t - 0.5).abs() <= 0.05, || format!("escape time {t}"))?;
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    Ok(format!("orders [{}], blowup escape at {t:.6}", shown.join(", ")))
}

fn luca(r: &Reports) -> Outcome {
    let s = "luca_r2_s1";
    r.expect(s, "complement", "Pass")?;
    r.expect(s, "pointwise multiplicativity", "NotMultiplicative")?;
    let e = r.expect(s, "product clause at g = h = (1,0), a = b = 1", "NotMultiplicative")?;
    require(e.worst_residual >= 1.0, || format!("product residual {}", e.worst_residual))?;
    let produced = parse_vec(e.details.get("produced").ok_or("no produced value")?)?;
    let required = parse_vec(e.details.get("required").ok_or("no required value")?)?;
    let close = |v: &[f64], w: [f64; 2]| v.len() == 2 && v.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-6);
    require(close(&produced, [2.0, 2.0]) && close(&required, [2.0, 8.0]), || format!("produced {produced:?}, required {required:?}"))?;
    Ok(format!("product residual {:.3}, produced {produced:?} vs required {required:?}", e.worst_residual))
}

fn agreement(r: &Reports, tol: &Tolerances) -> Outcome {
    require(tol.pointwise_samples == 100.0 && tol.path_pairs == 25.0, || "budgets differ from 100 / 25".into())?;
    require(r.0.len() == 10, || format!("{} scenarios", r.0.len()))?;
    let mut n = 0;
    for d in &r.0 {
        let pairs: Vec<&CheckEntry> = d.checks.iter().filter(|c| c.name.starts_with("pointwise/path agreement")).collect();
        require(!pairs.is_empty(), || format!("{}: no agreement check", d.scenario))?;
        for c in pairs {
            require(c.verdict == "Agree", || format!("{}: {} {:?}", d.scenario, c.verdict, c.details))?;
            n += 1;
        }
    }
    Ok(format!("{n} connections across {} scenarios", r.0.len()))
}

fn morita(r: &Reports) -> Outcome {
    let s = "morita_pullback";
    let e = r.expect(s, "transport vs closed form", "Pass")?;
    require(e.worst_residual < 1e-6 && e.samples >= 50, || format!("residual {:e} over {} pairs", e.worst_residual, e.samples))?;
    r.expect(s, "uniqueness against an independent formula", "Pass")?;
    r.expect(s, "perturbed lift multiplicativity", "NotMultiplicative")?;
    Ok(format!("closed form residual {:.2e} over {} pairs; perturbed lift rejected", e.worst_residual, e.samples))
}

fn action(r: &Reports) -> Outcome {
    let s = "so2_action_no_mec";
    r.expect(s, "action criterion (rotation)", "Rejected")?;
    let e = r.expect(s, "invariance residual at (1,0)", "Pass")?;
    require((e.worst_residual - 1.0).abs() < 1e-6, || format!("invariance residual {}", e.worst_residual))?;
    r.expect(s, "action criterion (trivial action)", "Accepted")?;
    r.expect(s, "multiplicativity at 1e-9 (trivial action)", "Multiplicative")?;
    Ok(format!("invariance residual {:.9}; trivial action multiplicative at 1e-9", e.worst_residual))
}

fn escape_before_one(e: &CheckEntry) -> Result<f64, String> {
    let t = e.detail_f64("escape_time").ok_or_else(|| format!("`{}` has no escape time", e.name))?;
    require(t < 1.0, || format!("`{}` escaped at {t}", e.name))?;
    Ok(t)
}

fn completeness_counterexamples(r: &Reports) -> Outcome {
    let s = "punctured_group_bundle";
    r.expect(s, "pointwise multiplicativity", "Multiplicative")?;
    let t = escape_before_one(r.expect(s, "total completeness probe", "IncompleteWitness")?)?;
    let base = r.expect(s, "base completeness probe", "NoCounterexampleFound")?;
    require(base.samples >= 500, || format!("base probe used {} paths", base.samples))?;
    let s = "disjoint_union_cover";
    for order in ["Z2", "Z3"] {
        r.expect(s, &format!("star-surjectivity ({order})"), "false")?;
        r.expect(s, &format!("kernel probe ({order})"), "NoCounterexampleFound")?;
        escape_before_one(r.expect(s, &format!("total probe ({order})"), "IncompleteWitness")?)?;
    }
    Ok(format!("punctured bundle escapes at t = {t:.4}, base clean over {} paths; disjoint union Z2, Z3 as expected", base.samples))
}

fn kernel_theorem(r: &Reports) -> Outcome {
    let s = "pair_fibration_kernel_thm";
    for probe in ["total", "kernel", "base"] {
        r.expect(s, &format!("{probe} probe (S1 x R)"), "NoCounterexampleFound")?;
        r.expect(s, &format!("{probe} probe (punctured)"), "IncompleteWitness")?;
    }
    let mut n = 0;
    for d in &r.0 {
        for c in d.checks.iter().filter(|c| c.name.starts_with("theorem consistency")) {
            require(c.verdict == "Consistent", || format!("{}: `{}` {}", d.scenario, c.name, c.verdict))?;
            require(!c.details.keys().any(|k| k.starts_with("violation.")), || format!("{}: `{}` {:?}", d.scenario, c.name, c.details))?;
            n += 1;
        }
    }
    Ok(format!("{n} crosschecks, no implication violated"))
}

fn haar(r: &Reports) -> Outcome {
    let s = "proper_average";
    let fixed = r.expect(s, "fixed point", "Pass")?;
    require(fixed.worst_residual < 1e-9 && fixed.samples >= 100, || format!("fixed point {:e}", fixed.worst_residual))?;
    let avg = r.expect(s, "averaged skewed field", "Multiplicative")?;
    require(avg.worst_residual < 1e-6, || format!("averaged residual {:e}", avg.worst_residual))?;
    let quad = r.expect(s, "quadrature convergence 256 vs 1024", "Pass")?;
    require(quad.worst_residual < 1e-8, || format!("256 vs 1024 {:e}", quad.worst_residual))?;
    Ok(format!(
        "fixed point {:.1e}, averaged residual {:.1e}, 256 vs 1024 nodes {:.1e}",
        fixed.worst_residual, avg.worst_residual, quad.worst_residual
    ))
}

fn builder(r: &Reports) -> Outcome {
    let s = "sproper_complete_family";
    let cert = r.expect(s, "certificate", "CertifiedComplete")?;
    require(cert.details.get("cover_ok").map(String::as_str) == Some("true"), || format!("{:?}", cert.details))?;
    r.expect(s, "certificate recheck", "CertifiedComplete")?;
    let probe = r.expect(s, "completeness probe", "NoCounterexampleFound")?;
    require(probe.samples >= 500, || format!("probe used {} paths", probe.samples))?;
    r.expect(s, "injected overlapping schedule", "CertificateFailure")?;
    Ok(format!("certified, flatness residual {:.1e}, {} probe paths clean, overlap rejected", cert.worst_residual, probe.samples))
}

fn splitting(r: &Reports) -> Outcome {
    let s = "splitting_fixture";
    let random = r.expect(s, "random exact sequences", "Pass")?;
    require(random.worst_residual < 1e-12 && random.samples >= 50, || format!("{:e} over {}", random.worst_residual, random.samples))?;
    let conn = r.expect(s, "connection splittings", "Pass")?;
    require(conn.worst_residual < 1e-12, || format!("connection splittings {:e}", conn.worst_residual))?;
    Ok(format!("{} random fixtures {:.1e}, connection fixtures {:.1e}", random.samples, random.worst_residual, conn.worst_residual))
}

fn determinism(first: &Reports, cfg: &RunConfig) -> Outcome {
    let second = run_all(cfg);
    require(second.len() == first.0.len(), || "scenario count changed".into())?;
    for (a, b) in first.0.iter().zip(&second) {
        require(emit_report(a, Format::Json) == emit_report(b, Format::Json), || format!("{} differs between runs", a.scenario))?;
    }
    Ok(format!("{} reports byte-identical", second.len()))
}

fn main() -> ExitCode {
    let tol = Tolerances::default();
    let cfg = RunConfig::new(0);
    let started = Instant::now();
    let reports = Reports(run_all(&cfg));

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("groupoid axioms", Box::new(|| groupoid_axioms(&tol))),
        ("integrator order and blowup", Box::new(integrator_order)),
        ("non-multiplicative complement", Box::new(|| luca(&reports))),
        ("pointwise/path agreement", Box::new(|| agreement(&reports, &tol))),
        ("pullback transport and uniqueness", Box::new(|| morita(&reports))),
        ("action criterion", Box::new(|| action(&reports))),
        ("completeness counterexamples", Box::new(|| completeness_counterexamples(&reports))),
        ("kernel completeness consistency", Box::new(|| kernel_theorem(&reports))),
        ("Haar averaging", Box::new(|| haar(&reports))),
        ("complete connection builder", Box::new(|| builder(&reports))),
        ("splitting correspondence", Box::new(|| splitting(&reports))),
        ("determinism", Box::new(|| determinism(&reports, &cfg))),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    let mismatched: Vec<&str> = reports.0.iter().filter(|d| !d.passed).map(|d| d.scenario.as_str()).collect();
    if mismatched.is_empty() {
        println!("all {} scenarios match their expected verdicts", reports.0.len());
    } else {
        failed += 1;
        println!("scenarios with mismatched checks: {}", mismatched.join(", "));
    }
    println!("{} of {} criteria passed in {:.1} s", criteria.len() - failed.min(criteria.len()), criteria.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
