//! Lie groupoids, Ehresmann connections on groupoid submersions, and parallel transport,
//! in an explicit coordinate model.
//!
//! The crate builds the standard catalog of groupoids and morphisms, checks whether a
//! connection is multiplicative (pointwise and along paths), integrates horizontal lifts,
//! probes completeness, and runs the constructive builders (pullback, gluing, Haar averaging,
//! complete connections with interval-arithmetic certificates). The `scenario_cli` module
//! binds all of this to named scenarios with expected verdicts.

pub mod config;
pub mod connections;
pub mod constructions;
pub mod error;
pub mod groupoid_core;
pub mod interval;
pub mod numeric_core;
pub mod report;
pub mod rng;
pub mod scenario_cli;
pub mod tangent_vb;
pub mod transport;

pub use config::Tolerances;
pub use error::{Error, Result};

/// Decimal rendering with 17 significant digits, used for every number in reports.
pub fn report_number(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}
