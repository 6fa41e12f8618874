//! Named tolerances and budgets, overridable from a line-oriented `key = value` file.
//!
//! Keys are namespaced by module, e.g. `transport.drift_tol = 1e-7`. Lines starting
//! with `#` and blank lines are ignored.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

macro_rules! tolerances {
    ($( $field:ident : $key:literal = $default:expr ),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct Tolerances {
            $( pub $field: f64, )*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl Tolerances {
            /// All keys with their current values, in declaration order.
            pub fn entries(&self) -> Vec<(&'static str, f64)> {
                vec![ $( ($key, self.$field), )* ]
            }

            pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
                match key {
                    $( $key => { self.$field = value; Ok(()) } )*
                    other => Err(Error::Config(format!("unknown key `{other}`"))),
                }
            }

            pub fn keys() -> &'static [&'static str] {
                &[ $( $key, )* ]
            }
        }
    };
}

tolerances! {
    tol_fd: "numeric.tol_fd" = 1e-5,
    fd_step: "numeric.fd_step" = 1e-6,
    ode_tol: "numeric.ode_tol" = 1e-8,
    h_ode: "numeric.h_ode" = 1e-3,
    blowup_bound: "numeric.blowup_bound" = 1e6,
    delta_excl: "numeric.delta_excl" = 1e-3,
    rank_tol: "numeric.rank_tol" = 1e-9,
    tol_time: "numeric.tol_time" = 1e-9,
    max_halvings: "numeric.max_halvings" = 40.0,
    tol_compose: "groupoid.tol_compose" = 1e-7,
    sv_tol: "groupoid.sv_tol" = 1e-6,
    cover_tol: "groupoid.cover_tol" = 1e-2,
    tol_alg: "groupoid.tol_alg" = 1e-9,
    sample_box: "groupoid.sample_box" = 2.0,
    tol_mult: "connections.tol_mult" = 1e-6,
    angle_tol: "connections.angle_tol" = 1e-6,
    drift_tol: "transport.drift_tol" = 1e-6,
    hol_tol: "transport.hol_tol" = 1e-6,
    quad_nodes: "constructions.quad_nodes" = 256.0,
    quad_refine: "constructions.quad_refine" = 4.0,
    quad_tol: "constructions.quad_tol" = 1e-10,
    atlas_margin: "constructions.atlas_margin" = 0.1,
    flat_tol: "constructions.flat_tol" = 1e-8,
    partition_tol: "constructions.partition_tol" = 1e-10,
    level_band: "constructions.level_band" = 0.25,
    axiom_samples: "scenario.axiom_samples" = 200.0,
    pointwise_samples: "scenario.pointwise_samples" = 100.0,
    path_pairs: "scenario.path_pairs" = 25.0,
    probe_budget: "scenario.probe_budget" = 500.0,
    crosscheck_budget: "scenario.crosscheck_budget" = 100.0,
}

impl Tolerances {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tol = Self::default();
        tol.apply(text)?;
        Ok(tol)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {}: `{}` is not a number", lineno + 1, value.trim())))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Snapshot with values rendered at 17 significant digits.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.entries().into_iter().map(|(k, v)| (k.to_string(), crate::report_number(v))).collect()
    }

    pub fn count(value: f64) -> usize {
        value.max(0.0).round() as usize
    }

    pub fn scaled_budget(&self, value: f64, scale: f64) -> usize {
        ((value * scale).round() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let t = Tolerances::default();
        assert_eq!(t.tol_fd, 1e-5);
        assert_eq!(t.h_ode, 1e-3);
        assert_eq!(t.tol_compose, 1e-7);
        assert_eq!(t.tol_mult, 1e-6);
    }

    #[test]
    fn overrides_and_comments() {
        let t = Tolerances::parse("# comment\n\ntransport.drift_tol = 2e-6  # inline\nnumeric.h_ode=0.01\n").unwrap();
        assert_eq!(t.drift_tol, 2e-6);
        assert_eq!(t.h_ode, 0.01);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(Tolerances::parse("foo.bar = 1"), Err(Error::Config(_))));
        assert!(matches!(Tolerances::parse("numeric.h_ode 1"), Err(Error::Config(_))));
    }
}
