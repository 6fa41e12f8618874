//! Fixed-step classical RK4 with one level of Richardson refinement.
//!
//! Each macro step of size `h` is integrated twice, once as a single step and once as two
//! half steps. The half-step result is kept; the disagreement is the error estimate. When it
//! exceeds `tol` the step is halved, down to `h / 2^max_halvings`, below which the run is
//! reported as a `StepCollapse` escape. Samples are recorded at macro-step boundaries only,
//! so sample times are `k * horizon / n` regardless of internal refinement.

use super::space::{Patch, Point};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrajectoryStatus {
    Completed,
    Escaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EscapeReason {
    NormBlowup,
    ExcludedPoint,
    StepCollapse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub status: TrajectoryStatus,
    pub samples: Vec<(f64, Point)>,
    pub escape_time: Option<f64>,
    pub escape_reason: Option<EscapeReason>,
}

impl TrajectoryOutcome {
    pub fn end(&self) -> &Point {
        &self.samples.last().expect("trajectory has at least the initial sample").1
    }

    pub fn is_completed(&self) -> bool {
        self.status == TrajectoryStatus::Completed
    }

    /// Sample recorded at time `t` (macro-step grid), if any.
    pub fn sample_at(&self, t: f64, tol: f64) -> Option<&Point> {
        self.samples.iter().find(|(s, _)| (s - t).abs() <= tol.max(1e-12)).map(|(_, p)| p)
    }

    /// Line-oriented `t x1 x2 ...` records.
    pub fn write_records(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for (t, p) in &self.samples {
            write!(out, "{}", crate::report_number(*t))?;
            for x in &p.coords {
                write!(out, " {}", crate::report_number(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub h: f64,
    pub tol: f64,
    pub blowup: f64,
    pub tol_time: f64,
    pub max_halvings: u32,
}

impl OdeSettings {
    pub fn from_tolerances(t: &Tolerances) -> Self {
        Self {
            h: t.h_ode,
            tol: t.ode_tol,
            blowup: t.blowup_bound,
            tol_time: t.tol_time,
            max_halvings: t.max_halvings.max(0.0) as u32,
        }
    }
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self::from_tolerances(&Tolerances::default())
    }
}

/// Domain guard: given consecutive states, returns the entry fraction along the segment and
/// the reason when the trajectory leaves the admissible domain.
pub type Guard<'a> = dyn Fn(&[f64], &[f64]) -> Option<(f64, EscapeReason)> + 'a;

fn rk4_step<F>(field: &mut F, t: f64, y: &[f64], h: f64) -> Option<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Option<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect() };
    let k1 = field(t, y)?;
    let k2 = field(t + 0.5 * h, &axpy(0.5 * h, &k1))?;
    let k3 = field(t + 0.5 * h, &axpy(0.5 * h, &k2))?;
    let k4 = field(t + h, &axpy(h, &k3))?;
    Some(
        (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect(),
    )
}

/// Integrates `dy/dt = field(t, y)` on one patch from `p0` over `[0, horizon]`.
///
/// The default guard rejects exclusion-ball entry (tested along each accepted segment) and
/// coordinates beyond the blowup bound. `field` returning `None` means it is undefined at the
/// requested state, which is treated as leaving the domain.
pub fn integrate<F>(field: F, patch: &Patch, p0: &Point, horizon: f64, settings: &OdeSettings) -> Result<TrajectoryOutcome>
where
    F: FnMut(f64, &[f64]) -> Option<Vec<f64>>,
{
    let guard = |a: &[f64], b: &[f64]| patch.segment_entry(a, b).map(|l| (l, EscapeReason::ExcludedPoint));
    integrate_guarded(field, patch, p0, horizon, &guard, settings)
}

pub fn integrate_guarded<F>(
    mut field: F,
    patch: &Patch,
    p0: &Point,
    horizon: f64,
    guard: &Guard<'_>,
    settings: &OdeSettings,
) -> Result<TrajectoryOutcome>
where
    F: FnMut(f64, &[f64]) -> Option<Vec<f64>>,
{
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidHorizon(horizon));
    }
    let mut samples = vec![(0.0, p0.clone())];
    let escaped = |samples: Vec<(f64, Point)>, t: f64, reason| TrajectoryOutcome {
        status: TrajectoryStatus::Escaped,
        samples,
        escape_time: Some(t.min(horizon * (1.0 - 1e-15))),
        escape_reason: Some(reason),
    };
    if patch.is_excluded(&p0.coords) {
        return Ok(escaped(samples, 0.0, EscapeReason::ExcludedPoint));
    }
    let n_macro = ((horizon / settings.h) - settings.tol_time).ceil().max(1.0) as usize;
    let macro_h = horizon / n_macro as f64;
    let min_h = macro_h / 2f64.powi(settings.max_halvings as i32);
    let mut y = p0.coords.clone();
    let mut t = 0.0;
    for k in 1..=n_macro {
        let t_end = k as f64 * horizon / n_macro as f64;
        let mut step = macro_h;
        while t < t_end - settings.tol_time * 1e-3 {
            let h = step.min(t_end - t);
            let full = rk4_step(&mut field, t, &y, h);
            let half = rk4_step(&mut field, t, &y, 0.5 * h).and_then(|mid| rk4_step(&mut field, t + 0.5 * h, &mid, 0.5 * h));
            let (full, half) = match (full, half) {
                (Some(f), Some(hh)) => (f, hh),
                _ => return Ok(escaped(samples, t, EscapeReason::ExcludedPoint)),
            };
            if half.iter().any(|v| !v.is_finite() || v.abs() > settings.blowup) {
                return Ok(escaped(samples, t + h, EscapeReason::NormBlowup));
            }
            let scale = half.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = full.iter().zip(&half).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            if err > settings.tol {
                if 0.5 * step < min_h {
                    return Ok(escaped(samples, t, EscapeReason::StepCollapse));
                }
                step *= 0.5;
                continue;
            }
            if let Some((lambda, reason)) = guard(&y, &half) {
                return Ok(escaped(samples, t + lambda * h, reason));
            }
            y = half;
            patch.normalize(&mut y);
            t += h;
            if err < settings.tol / 32.0 && step < macro_h {
                step = (2.0 * step).min(macro_h);
            }
        }
        t = t_end;
        samples.push((t_end, Point::new(p0.patch, y.clone())));
    }
    Ok(TrajectoryOutcome { status: TrajectoryStatus::Completed, samples, escape_time: None, escape_reason: None })
}
