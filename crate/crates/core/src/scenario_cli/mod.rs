//! Named scenarios with expected verdicts, the report document, and its serialization.
//!
//! Each scenario builds its instances from the catalog and the constructions, then runs an
//! ordered list of checks. The expected verdict of every check is part of the registry, so
//! running all scenarios is the regression suite.

mod scenarios;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numeric_core::TrajectoryOutcome;
use crate::report::{ser_num, CheckReport, MultVerdict, Witness};
use crate::connections::MultiplicativityReport;
use crate::transport::CompletenessVerdict;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: &str = "groupoid-conn-report/1";

/// One check of a scenario and the verdict it must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSpec {
    pub name: &'static str,
    pub expected: &'static str,
}

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    /// The statement the scenario exercises.
    pub anchor: &'static str,
    pub checks: Vec<CheckSpec>,
    run: fn(&mut Recorder) -> Result<()>,
}

/// Inputs that fully determine a report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub tol: Tolerances,
    pub budget_scale: f64,
    /// Directory for trajectory dumps; nothing is written when `None`.
    pub dump_dir: Option<PathBuf>,
    /// Record wall times in the report (makes the JSON output time-dependent).
    pub timings: bool,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, tol: Tolerances::default(), budget_scale: 1.0, dump_dir: None, timings: false }
    }

    pub fn budget(&self, base: f64) -> usize {
        self.tol.scaled_budget(base, self.budget_scale)
    }
}

/// What a check observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub verdict: String,
    pub residual: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub details: BTreeMap<String, String>,
}

impl Observation {
    pub fn new(verdict: impl Into<String>) -> Self {
        Self { verdict: verdict.into(), residual: 0.0, witness: None, samples: 0, details: BTreeMap::new() }
    }

    pub fn pass_if(ok: bool) -> Self {
        Self::new(if ok { "Pass" } else { "Fail" })
    }

    pub fn residual(mut self, r: f64) -> Self {
        self.residual = r;
        self
    }

    pub fn witness(mut self, w: Option<Witness>) -> Self {
        self.witness = w;
        self
    }

    pub fn samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn detail(mut self, key: &str, value: impl ToString) -> Self {
        self.details.insert(key.to_string(), value.to_string());
        self
    }

    pub fn num(self, key: &str, value: f64) -> Self {
        self.detail(key, crate::report_number(value))
    }

    pub fn from_check(rep: &CheckReport) -> Self {
        Self::pass_if(rep.passed).residual(rep.worst_residual).witness(rep.witness.clone()).samples(rep.samples)
    }

    /// Verdict of a multiplicativity report, with per-clause residuals as details.
    pub fn from_mult(rep: &MultiplicativityReport) -> Self {
        let worst = rep.clauses.iter().max_by(|a, b| a.residual.total_cmp(&b.residual));
        let mut o = Self::new(rep.verdict.as_str())
            .residual(rep.worst())
            .witness(worst.and_then(|c| c.witness.clone()))
            .samples(rep.samples)
            .detail("inconclusive_samples", rep.inconclusive_samples);
        for c in &rep.clauses {
            o = o.num(&format!("clause.{}", c.clause), c.residual);
        }
        o
    }

    pub fn from_probe(v: &CompletenessVerdict, budget: usize) -> Self {
        match v {
            CompletenessVerdict::NoCounterexampleFound { .. } => Self::new(v.label()).samples(budget),
            CompletenessVerdict::IncompleteWitness { path_index, start, escape_time, reason } => Self::new(v.label())
                .samples(path_index + 1)
                .witness(Some(Witness::points(format!("start of path {path_index}"), &[start])))
                .num("escape_time", *escape_time)
                .detail("escape_reason", format!("{reason:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub expected: String,
    pub verdict: String,
    pub matched: bool,
    #[serde(serialize_with = "ser_num")]
    pub worst_residual: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub details: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<String>,
}

impl CheckEntry {
    pub fn detail_f64(&self, key: &str) -> Option<f64> {
        self.details.get(key).and_then(|v| parse_number(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub scenario: String,
    pub description: String,
    pub anchor: String,
    pub seed: u64,
    #[serde(serialize_with = "ser_num")]
    pub budget_scale: f64,
    pub tolerances: BTreeMap<String, String>,
    pub checks: Vec<CheckEntry>,
    pub passed: bool,
}

impl ReportDocument {
    pub fn check(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs the checks of one scenario in order and records what they observe.
pub struct Recorder {
    pub cfg: RunConfig,
    scenario: &'static str,
    specs: Vec<CheckSpec>,
    entries: Vec<CheckEntry>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into())
}

impl Recorder {
    pub fn tol(&self) -> &Tolerances {
        &self.cfg.tol
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    /// Runs `f` as the named check; errors and panics become failed entries.
    pub fn check(&mut self, name: &str, f: impl FnOnce(&RunConfig) -> Result<Observation>) {
        let expected = self.specs.iter().find(|s| s.name == name).map_or("<unregistered>", |s| s.expected);
        let start = Instant::now();
        let obs = match catch_unwind(AssertUnwindSafe(|| f(&self.cfg))) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Observation::new(format!("Error: {e}")).residual(f64::INFINITY),
            Err(p) => Observation::new(format!("Error: panic: {}", panic_message(p))).residual(f64::INFINITY),
        };
        let elapsed = start.elapsed().as_secs_f64();
        self.entries.push(CheckEntry {
            name: name.to_string(),
            expected: expected.to_string(),
            matched: obs.verdict == expected,
            verdict: obs.verdict,
            worst_residual: obs.residual,
            witness: obs.witness,
            samples: obs.samples,
            details: obs.details,
            wall_time_s: self.cfg.timings.then(|| format!("{elapsed:.3}")),
        });
    }

    /// Writes a trajectory as `t x1 x2 ...` lines to `<dump_dir>/<scenario>.<name>.dat`.
    pub fn dump(&self, name: &str, traj: &TrajectoryOutcome) {
        let Some(dir) = &self.cfg.dump_dir else { return };
        let file = dir.join(format!("{}.{}.dat", self.scenario, name.replace(|c: char| !c.is_ascii_alphanumeric(), "_")));
        let mut buf = Vec::new();
        if traj.write_records(&mut buf).is_ok() {
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&file, buf)) {
                eprintln!("warning: cannot write {}: {e}", file.display());
            }
        }
    }
}

pub fn registry() -> Vec<Scenario> {
    scenarios::all()
}

/// `(name, description, anchor)` in registry order.
pub fn list_scenarios() -> Vec<(&'static str, &'static str, &'static str)> {
    registry().iter().map(|s| (s.name, s.description, s.anchor)).collect()
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    registry().into_iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

pub fn run_scenario(name: &str, cfg: &RunConfig) -> Result<ReportDocument> {
    Ok(execute(&find_scenario(name)?, cfg))
}

pub fn execute(sc: &Scenario, cfg: &RunConfig) -> ReportDocument {
    let mut rec = Recorder { cfg: cfg.clone(), scenario: sc.name, specs: sc.checks.clone(), entries: Vec::new() };
    let setup = match catch_unwind(AssertUnwindSafe(|| (sc.run)(&mut rec))) {
        Ok(r) => r.err().map(|e| e.to_string()),
        Err(p) => Some(format!("panic: {}", panic_message(p))),
    };
    // checks that never ran are failures, in registry order
    for spec in &sc.checks {
        if !rec.entries.iter().any(|e| e.name == spec.name) {
            let why = setup.clone().unwrap_or_else(|| "check was not executed".into());
            rec.entries.push(CheckEntry {
                name: spec.name.into(),
                expected: spec.expected.into(),
                verdict: format!("NotRun: {why}"),
                matched: false,
                worst_residual: f64::INFINITY,
                witness: None,
                samples: 0,
                details: BTreeMap::new(),
                wall_time_s: None,
            });
        }
    }
    let passed = rec.entries.iter().all(|e| e.matched);
    ReportDocument {
        schema_version: SCHEMA_VERSION.into(),
        scenario: sc.name.into(),
        description: sc.description.into(),
        anchor: sc.anchor.into(),
        seed: cfg.seed,
        budget_scale: cfg.budget_scale,
        tolerances: cfg.tol.snapshot(),
        checks: rec.entries,
        passed,
    }
}

/// Runs every registered scenario concurrently; reports come back in registry order.
pub fn run_all(cfg: &RunConfig) -> Vec<ReportDocument> {
    let scenarios = registry();
    std::thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || execute(sc, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

pub fn emit_report(doc: &ReportDocument, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(doc).expect("report serializes"),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "{} (seed {}): {}", doc.scenario, doc.seed, if doc.passed { "PASS" } else { "FAIL" });
            let _ = writeln!(out, "  {}", doc.description);
            for c in &doc.checks {
                let _ = write!(
                    out,
                    "  [{}] {}: {} (expected {}), worst residual {}, {} samples",
                    if c.matched { "ok" } else { "MISMATCH" },
                    c.name,
                    c.verdict,
                    c.expected,
                    crate::report_number(c.worst_residual),
                    c.samples
                );
                if let Some(t) = &c.wall_time_s {
                    let _ = write!(out, ", {t} s");
                }
                let _ = writeln!(out);
            }
            out
        }
    }
}

/// Parses the report spelling of a number (`inf`, `-inf`, `nan` included).
pub fn parse_number(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

/// Outcome of re-running the scenario recorded in a JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub report: ReportDocument,
    /// `(check, recorded witness reproduced)` for every recorded witness.
    pub witnesses: Vec<(String, bool)>,
    pub verdicts_match: bool,
}

impl ReplayOutcome {
    pub fn reproduced(&self) -> bool {
        self.verdicts_match && self.witnesses.iter().all(|(_, ok)| *ok)
    }
}

/// Re-runs a report's scenario with its seed, budget scale and tolerance snapshot, and compares
/// the witnesses coordinate by coordinate.
pub fn replay(json: &str, dump_dir: Option<PathBuf>) -> Result<ReplayOutcome> {
    let bad = |what: &str| Error::Config(format!("report: {what}"));
    let v: serde_json::Value = serde_json::from_str(json).map_err(|e| bad(&e.to_string()))?;
    if v["schema_version"].as_str() != Some(SCHEMA_VERSION) {
        return Err(bad("unsupported schema_version"));
    }
    let name = v["scenario"].as_str().ok_or_else(|| bad("missing scenario"))?;
    let seed = v["seed"].as_u64().ok_or_else(|| bad("missing seed"))?;
    let budget_scale = v["budget_scale"].as_str().and_then(parse_number).ok_or_else(|| bad("missing budget_scale"))?;
    let mut tol = Tolerances::default();
    if let Some(map) = v["tolerances"].as_object() {
        for (k, val) in map {
            let x = val.as_str().and_then(parse_number).ok_or_else(|| bad(&format!("tolerance `{k}`")))?;
            tol.set(k, x)?;
        }
    }
    let cfg = RunConfig { seed, tol, budget_scale, dump_dir, timings: false };
    let report = run_scenario(name, &cfg)?;
    let mut witnesses = Vec::new();
    let mut verdicts_match = true;
    for old in v["checks"].as_array().ok_or_else(|| bad("missing checks"))? {
        let cname = old["name"].as_str().unwrap_or_default();
        let new = report.check(cname);
        verdicts_match &= new.map(|c| c.verdict.as_str()) == old["verdict"].as_str();
        if !old["witness"].is_null() {
            let same = new.and_then(|c| c.witness.as_ref()).is_some_and(|w| serde_json::to_value(w).ok().as_ref() == Some(&old["witness"]));
            witnesses.push((cname.to_string(), same));
        }
    }
    Ok(ReplayOutcome { report, witnesses, verdicts_match })
}

/// Reads `key = value` overrides from a file on top of the defaults.
pub fn load_config(path: &Path) -> Result<Tolerances> {
    Tolerances::load(path)
}

pub(crate) fn mult_verdict_at(rep: &MultiplicativityReport, tol: f64) -> MultVerdict {
    if rep.inconclusive_samples >= rep.samples && rep.samples > 0 {
        MultVerdict::Inconclusive
    } else {
        MultVerdict::from_residual(rep.worst(), tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Scenario {
        Scenario {
            name: "toy",
            description: "toy scenario on ℝ² → S¹",
            anchor: "none",
            checks: vec![CheckSpec { name: "one", expected: "Pass" }, CheckSpec { name: "two", expected: "Fail" }, CheckSpec { name: "three", expected: "Pass" }],
            run: |r| {
                r.check("one", |_| Ok(Observation::pass_if(true).residual(0.1)));
                r.check("two", |_| Err(Error::InvalidParams("boom".into())));
                Err(Error::InvalidParams("setup stopped".into()))
            },
        }
    }

    #[test]
    fn errors_become_failed_entries() {
        let doc = execute(&toy(), &RunConfig::new(1));
        assert!(!doc.passed);
        assert!(doc.checks[0].matched);
        assert!(doc.checks[1].verdict.starts_with("Error:") && !doc.checks[1].matched);
        assert!(doc.checks[2].verdict.contains("setup stopped"));
    }

    #[test]
    fn json_is_deterministic_and_keeps_unicode() {
        let doc = execute(&toy(), &RunConfig::new(5));
        let a = emit_report(&doc, Format::Json);
        assert_eq!(a, emit_report(&execute(&toy(), &RunConfig::new(5)), Format::Json));
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["description"], "toy scenario on ℝ² → S¹");
        assert_eq!(v["checks"][0]["worst_residual"], "1.0000000000000001e-1");
        assert!(v["checks"][0].get("wall_time_s").is_none());
    }

    #[test]
    fn text_has_one_line_per_check() {
        let doc = execute(&toy(), &RunConfig::new(5));
        let text = emit_report(&doc, Format::Text);
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with('[')).count(), 3);
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(run_scenario("nope", &RunConfig::new(0)), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn listing_is_stable_and_complete() {
        let names: Vec<_> = list_scenarios().into_iter().map(|(n, _, _)| n).collect();
        for required in [
            "luca_r2_s1",
            "so2_action_no_mec",
            "punctured_group_bundle",
            "disjoint_union_cover",
            "morita_pullback",
            "pair_fibration_kernel_thm",
            "proper_average",
            "sproper_complete_family",
            "product_not_uniform",
            "splitting_fixture",
        ] {
            assert!(names.contains(&required), "{required}");
        }
        assert_eq!(names, list_scenarios().into_iter().map(|(n, _, _)| n).collect::<Vec<_>>());
        for s in registry() {
            assert!(!s.anchor.is_empty());
            let mut seen = std::collections::BTreeSet::new();
            assert!(s.checks.iter().all(|c| seen.insert(c.name)), "duplicate check in {}", s.name);
        }
    }
}
