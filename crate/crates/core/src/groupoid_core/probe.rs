use super::GroupoidMorphism;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numeric_core::linalg::{lstsq, min_singular_value};
use crate::numeric_core::{null_space, rank, Point};
use crate::report::{ser_num, Witness};
use crate::rng::rng_for;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Number of target arrows drawn per sampled object in the star-surjectivity probe.
const TARGETS_PER_OBJECT: usize = 8;
/// Source-fiber candidates drawn per target before Newton refinement.
const CANDIDATES: usize = 8;
const NEWTON_STEPS: usize = 6;

/// Numeric evidence for the fibration classes of a morphism.
/// `star_surjective_heuristic` is a sampling heuristic, never a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibrationVerdict {
    pub submersion_ok: bool,
    #[serde(serialize_with = "ser_num")]
    pub min_singular_value: f64,
    pub shriek_submersion_ok: bool,
    #[serde(serialize_with = "ser_num")]
    pub shriek_min_singular_value: f64,
    pub star_surjective_heuristic: bool,
    #[serde(serialize_with = "ser_num")]
    pub worst_uncovered_distance: f64,
    pub uncovered_witness: Option<Witness>,
    pub uniform_ok: bool,
    /// Worst deficit `expected − rank` of `D(t, π, s)` over the samples.
    pub uniform_rank_deficit: usize,
    pub samples: usize,
    pub seed: u64,
}

impl FibrationVerdict {
    /// Submersion, with `π × s` a submersion and star-surjective.
    pub fn is_fibration(&self) -> bool {
        self.submersion_ok && self.shriek_submersion_ok && self.star_surjective_heuristic
    }
}

fn stack(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts[0].ncols();
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), (p.nrows(), cols)).copy_from(p);
        r += p.nrows();
    }
    out
}

/// `k`-th largest singular value (`∞` when `k = 0`, i.e. nothing to check).
fn singular_value(a: &DMatrix<f64>, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv.get(k - 1).copied().unwrap_or(0.0)
}

/// Sampled fibration-class probe of `π: G → H`.
pub fn fibration_probe(pi: &GroupoidMorphism, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<FibrationVerdict> {
    let (g, h) = (&pi.total, &pi.base);
    let fd = tol.fd_step;
    let mut min_sv = f64::INFINITY;
    let mut shriek_sv = f64::INFINITY;
    let mut deficit = 0usize;

    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let a = g.sample_arrow(&mut rng);
        let x = g.s(&a);
        let pa = pi.pi(&a);
        let dim_h = h.arrows.dim(pa.patch);
        let dim_m = g.objects.dim(x.patch);
        let dim_n = h.objects.dim(pi.pi0(&x).patch);
        let dpi = pi.arrow_map.jacobian(&a, fd)?;
        let ds = g.src.jacobian(&a, fd)?;
        let dt = g.tgt.jacobian(&a, fd)?;
        min_sv = min_sv.min(if dim_h == 0 { f64::INFINITY } else { min_singular_value(&dpi) });
        let shriek_rank = dim_h + dim_m - dim_n;
        shriek_sv = shriek_sv.min(singular_value(&stack(&[dpi.clone(), ds.clone()]), shriek_rank));
        let uniform_rank = 2 * dim_m + dim_h - 2 * dim_n;
        let r = if dt.ncols() == 0 { 0 } else { rank(&stack(&[dt, dpi, ds]), tol.sv_tol) };
        deficit = deficit.max(uniform_rank.saturating_sub(r));
    }

    let (worst, witness) = star_probe(pi, n_samples, seed, tol)?;
    Ok(FibrationVerdict {
        submersion_ok: min_sv > tol.sv_tol,
        min_singular_value: min_sv,
        shriek_submersion_ok: shriek_sv > tol.sv_tol,
        shriek_min_singular_value: shriek_sv,
        star_surjective_heuristic: worst < tol.cover_tol,
        worst_uncovered_distance: worst,
        uncovered_witness: witness,
        uniform_ok: deficit == 0,
        uniform_rank_deficit: deficit,
        samples: n_samples,
        seed,
    })
}

/// Worst over sampled `(x, h ∈ s⁻¹(π₀ x))` of the distance from `h` to `π(s⁻¹(x))`.
fn star_probe(pi: &GroupoidMorphism, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<(f64, Option<Witness>)> {
    let (g, h) = (&pi.total, &pi.base);
    let objects = n_samples.div_ceil(TARGETS_PER_OBJECT).max(1);
    let mut worst = 0.0f64;
    let mut witness = None;
    for k in 0..objects + pi.meta.probe_objects.len() {
        let mut rng = rng_for(seed ^ 0x5eed, k as u64);
        let x = match pi.meta.probe_objects.get(k) {
            Some(p) => p.clone(),
            None => g.sample_object(&mut rng),
        };
        let base_x = pi.pi0(&x);
        for _ in 0..TARGETS_PER_OBJECT {
            let target = h
                .sample_sfiber(&base_x, &mut rng)
                .ok_or_else(|| Error::SamplerFailure(format!("empty source fiber in {}", h.name)))?;
            let mut best = f64::INFINITY;
            for _ in 0..CANDIDATES {
                let Some(cand) = g.sample_sfiber(&x, &mut rng) else {
                    return Err(Error::SamplerFailure(format!("empty source fiber in {}", g.name)));
                };
                best = best.min(refine(pi, cand, &target, tol));
                if best < tol.cover_tol * 1e-3 {
                    break;
                }
            }
            if best > worst {
                worst = best;
                witness = Some(Witness::points("uncovered target", &[&x, &target]));
            }
        }
    }
    Ok((worst, witness))
}

/// Newton iteration on `π(g) = target` restricted to the source fiber (steps along `ker Ts`).
fn refine(pi: &GroupoidMorphism, mut cand: Point, target: &Point, tol: &Tolerances) -> f64 {
    let (g, h) = (&pi.total, &pi.base);
    let mut dist = h.arrows.dist(&pi.pi(&cand), target);
    for _ in 0..NEWTON_STEPS {
        if !dist.is_finite() || dist < 1e-12 || cand.dim() == 0 {
            break;
        }
        let (Ok(ds), Ok(dpi)) = (g.src.jacobian(&cand, tol.fd_step), pi.arrow_map.jacobian(&cand, tol.fd_step)) else {
            break;
        };
        let kernel = null_space(&ds, tol.rank_tol);
        if kernel.ncols() == 0 {
            break;
        }
        let Some(resid) = h.arrows.diff(target, &pi.pi(&cand)) else { break };
        let delta = lstsq(&(&dpi * &kernel), &resid, tol.rank_tol);
        let step: DVector<f64> = &kernel * delta;
        let mut next = Point::new(cand.patch, cand.coords.iter().zip(step.iter()).map(|(a, b)| a + b).collect());
        g.arrows.normalize(&mut next);
        if g.arrows.validate(&next).is_err() {
            break;
        }
        let d = h.arrows.dist(&pi.pi(&next), target);
        if d >= dist {
            break;
        }
        cand = next;
        dist = d;
    }
    dist
}
