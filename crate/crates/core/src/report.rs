use serde::{Serialize, Serializer};
use std::fmt;

/// Serializes a float as its 17-significant-digit decimal string (`inf` and `nan` spelled out).
pub fn ser_num<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::report_number(*x))
}

pub fn ser_nums<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| crate::report_number(*x)))
}

/// Coordinates that locate a failure (possibly several points concatenated).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub label: String,
    #[serde(serialize_with = "ser_nums")]
    pub coords: Vec<f64>,
}

impl Witness {
    pub fn new(label: impl Into<String>, coords: Vec<f64>) -> Self {
        Self { label: label.into(), coords }
    }

    pub fn points(label: impl Into<String>, pts: &[&crate::numeric_core::Point]) -> Self {
        let mut coords = Vec::new();
        for p in pts {
            coords.push(p.patch as f64);
            coords.extend(p.coords.iter().copied());
        }
        Self::new(label, coords)
    }
}

/// Outcome of a sampled check: worst residual, where it occurred, and how many samples ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "ser_num")]
    pub worst_residual: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub seed: u64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, samples: usize, seed: u64) -> Self {
        Self { name: name.into(), passed: true, worst_residual: 0.0, witness: None, samples, seed }
    }

    /// Records a residual; the first strictly worst sample keeps the witness.
    pub fn observe(&mut self, residual: f64, witness: impl FnOnce() -> Witness) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if r > self.worst_residual || (self.witness.is_none() && r > 0.0 && r == self.worst_residual) {
            self.worst_residual = r;
            self.witness = Some(witness());
        }
    }

    pub fn finish(mut self, tol: f64) -> Self {
        self.passed = self.worst_residual < tol;
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (worst residual {:.3e}, {} samples, seed {})",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.worst_residual,
            self.samples,
            self.seed
        )
    }
}

/// Three-way classification used by multiplicativity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MultVerdict {
    Multiplicative,
    NotMultiplicative,
    Inconclusive,
}

impl MultVerdict {
    /// Pass below `tol`, fail above `10 tol`, inconclusive in between.
    pub fn from_residual(worst: f64, tol: f64) -> Self {
        if worst < tol {
            MultVerdict::Multiplicative
        } else if worst > 10.0 * tol {
            MultVerdict::NotMultiplicative
        } else {
            MultVerdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MultVerdict::Multiplicative => "Multiplicative",
            MultVerdict::NotMultiplicative => "NotMultiplicative",
            MultVerdict::Inconclusive => "Inconclusive",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_bands() {
        assert_eq!(MultVerdict::from_residual(1e-7, 1e-6), MultVerdict::Multiplicative);
        assert_eq!(MultVerdict::from_residual(5e-6, 1e-6), MultVerdict::Inconclusive);
        assert_eq!(MultVerdict::from_residual(2e-5, 1e-6), MultVerdict::NotMultiplicative);
    }

    #[test]
    fn first_worst_witness_kept() {
        let mut r = CheckReport::new("c", 3, 0);
        r.observe(0.5, || Witness::new("a", vec![1.0]));
        r.observe(0.5, || Witness::new("b", vec![2.0]));
        r.observe(0.1, || Witness::new("c", vec![3.0]));
        assert_eq!(r.witness.as_ref().unwrap().label, "a");
        assert!(!r.clone().finish(0.1).passed);
        assert!(r.finish(1.0).passed);
    }
}
