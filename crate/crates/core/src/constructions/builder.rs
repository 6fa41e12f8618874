//! Complete connections on families with source-proper fibers: a partition that is identically
//! one on each window's level slabs makes the glued lift chart-flat over the level sets, and the
//! certificate checks that flatness together with interval bounds on the complementary components.

use super::atlas::{subordinate_partition, PartitionFn, TrivializingAtlas};
use super::exhaustion::Exhaustion;
use super::levels::{verify_disjointness, LevelSchedule};
use super::{plateau, BOX_SPLIT_DEPTH};
use crate::config::Tolerances;
use crate::connections::{basis_vector, Connection, HorFn};
use crate::error::{Error, Result};
use crate::interval::{DecimalBounds, Interval};
use crate::numeric_core::Point;
use crate::report::{ser_num, Witness};
use crate::rng::{rng_for, uniform};
use nalgebra::DVector;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentBound {
    /// The component lies in `f⁻¹([0, below_level])`.
    #[serde(serialize_with = "ser_num")]
    pub below_level: f64,
    pub enclosure: Vec<DecimalBounds>,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCertificate {
    pub window: usize,
    pub levels: Vec<f64>,
    /// Clause (1): worst `|Dψ^α hor − (w, 0)|` on `closure(U^α) × s⁻¹(S^α)`.
    #[serde(serialize_with = "ser_num")]
    pub flat_residual: f64,
    pub flat_samples: usize,
    pub flat_witness: Option<Witness>,
    pub flat_ok: bool,
    /// Clause (2): every component of `F ∖ S^α` meeting the fiber box is bounded.
    pub components: Vec<ComponentBound>,
    /// Enclosure of `f∘pr₂∘ψ^α₀` over the window (within the base box) times the fiber box.
    pub box_range: Option<DecimalBounds>,
    pub precompact_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CertificateVerdict {
    CertifiedComplete,
    NotCertified { clause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessCertificate {
    pub windows: Vec<WindowCertificate>,
    /// The inner windows cover the base box (checked by box subdivision).
    pub cover_ok: bool,
    pub verdict: CertificateVerdict,
    pub seed: u64,
}

impl CompletenessCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == CertificateVerdict::CertifiedComplete
    }
}

/// Whether the union of the inner window closures contains `cell`, splitting the widest axis
/// until each piece fits in one window.
fn covered(atlas: &TrivializingAtlas, cell: &[Interval], depth: usize) -> bool {
    let inside = |w: &super::atlas::Window| w.inner.iter().zip(cell).all(|(u, c)| u.0 <= c.lo && c.hi <= u.1);
    if atlas.windows.iter().any(inside) {
        return true;
    }
    if depth == 0 {
        return false;
    }
    let (axis, _) = cell.iter().enumerate().fold((0, -1.0), |(a, w), (i, c)| if c.width() > w { (i, c.width()) } else { (a, w) });
    let mid = 0.5 * (cell[axis].lo + cell[axis].hi);
    let (mut left, mut right) = (cell.to_vec(), cell.to_vec());
    left[axis] = Interval::new(cell[axis].lo, mid);
    right[axis] = Interval::new(mid, cell[axis].hi);
    covered(atlas, &left, depth - 1) && covered(atlas, &right, depth - 1)
}

fn within_box(inner: &[(f64, f64)], base_box: &[Interval]) -> Option<Vec<Interval>> {
    inner.iter().zip(base_box).map(|(u, b)| Interval::new(u.0, u.1).intersection(b)).collect()
}

fn flat_clause(c: &Connection, atlas: &TrivializingAtlas, f: &Exhaustion, alpha: usize, levels: &[f64], n_samples: usize, seed: u64, tol: &Tolerances) -> Result<(f64, usize, Option<Witness>)> {
    let total = c.total();
    let dn = atlas.base_dim();
    let (pa, po) = (atlas.chart_arrows(alpha), atlas.chart_objects(alpha));
    let Some(region) = within_box(&atlas.windows[alpha].inner, &atlas.base_box) else {
        return Ok((0.0, 0, None));
    };
    let nonempty: Vec<f64> = levels.iter().copied().filter(|l| f.level_point(*l, &mut rng_for(0, 0)).is_some()).collect();
    if nonempty.is_empty() {
        return Ok((0.0, 0, None));
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    for k in 0..n_samples {
        let mut rng = rng_for(seed ^ (alpha as u64) << 20, k as u64);
        let level = nonempty[k % nonempty.len()];
        let n: Vec<f64> = region.iter().map(|iv| uniform(&mut rng, iv.lo, iv.hi)).collect();
        let Some(chart_fiber) = f.level_point(level, &mut rng) else { continue };
        let x = atlas.chart_objects_inv(alpha).eval(&Point::new(0, [n.clone(), chart_fiber].concat()));
        let Some(g) = total.sample_sfiber(&x, &mut rng) else { continue };
        let (jg, jx) = (pa.jacobian(&g, tol.fd_step)?, po.jacobian(&x, tol.fd_step)?);
        let mut r = 0.0f64;
        for i in 0..dn {
            let w = basis_vector(dn, i);
            let flat = |dim: usize| {
                let mut v = DVector::zeros(dim);
                v.rows_mut(0, dn).copy_from(&w);
                v
            };
            r = r.max((&jg * c.lift(&g, &w)? - flat(g.dim())).amax());
            r = r.max((&jx * c.lift0(&x, &w)? - flat(x.dim())).amax());
        }
        if r > worst || witness.is_none() {
            worst = worst.max(r);
            witness = Some(Witness::points(format!("window {alpha}, level {level}"), &[&g]));
        }
    }
    Ok((worst, n_samples, witness))
}

fn precompact_clause(atlas: &TrivializingAtlas, f: &Exhaustion, alpha: usize, levels: &[f64]) -> (Vec<ComponentBound>, Option<DecimalBounds>, bool) {
    let mut sorted: Vec<f64> = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut components = Vec::new();
    let mut ok = true;
    for &l in &sorted {
        let boxes = f.level_boxes(Interval::new(0.0, l));
        let hull: Option<Vec<Interval>> = boxes.iter().cloned().reduce(|a, b| a.iter().zip(&b).map(|(x, y)| x.hull(y)).collect());
        let bounded = hull.as_ref().is_none_or(|h| h.iter().all(|iv| iv.is_bounded()));
        components.push(ComponentBound { below_level: l, enclosure: hull.unwrap_or_default().iter().map(|iv| iv.decimal()).collect(), bounded });
        ok &= bounded;
    }
    // the component above the top level must miss the truncation box
    let Some(region) = within_box(&atlas.windows[alpha].inner, &atlas.base_box) else {
        return (components, None, ok);
    };
    let shift = atlas.shifts[alpha].enclose(region[0]);
    let mut fiber = atlas.fiber_box.clone();
    fiber[atlas.shift_coord] = fiber[atlas.shift_coord] + shift;
    let range = f.enclose(&fiber);
    let top_ok = match sorted.last() {
        Some(top) => range.hi < *top,
        None => f.level_boxes(Interval::new(0.0, f64::INFINITY)).iter().all(|b| b.iter().all(|iv| iv.is_bounded())),
    };
    (components, Some(range.decimal()), ok && top_ok)
}

/// Checks the two clauses of windowed flatness for every window, with `S^α = f⁻¹(levels[α])`.
pub fn flatness_certificate_check(
    c: &Connection,
    atlas: &TrivializingAtlas,
    f: &Exhaustion,
    levels: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<CompletenessCertificate> {
    if !Arc::ptr_eq(&c.morphism, &atlas.family) && c.morphism.name != atlas.family.name {
        return Err(Error::AtlasMismatch(format!("connection on {} but atlas on {}", c.morphism.name, atlas.family.name)));
    }
    if levels.len() != atlas.windows.len() {
        return Err(Error::AtlasMismatch(format!("{} level lists for {} windows", levels.len(), atlas.windows.len())));
    }
    let cover_ok = covered(atlas, &atlas.base_box, BOX_SPLIT_DEPTH);
    let mut windows = Vec::new();
    let mut failed: Option<String> = (!cover_ok).then(|| "cover: inner windows do not cover the base box".to_string());
    for (alpha, ls) in levels.iter().enumerate() {
        let (flat_residual, flat_samples, flat_witness) = flat_clause(c, atlas, f, alpha, ls, n_samples, seed, tol)?;
        let flat_ok = flat_residual < tol.flat_tol;
        let (components, box_range, precompact_ok) = precompact_clause(atlas, f, alpha, ls);
        if failed.is_none() && !flat_ok {
            failed = Some(format!("clause (1) flatness on window {alpha}: residual {flat_residual:e}"));
        }
        if failed.is_none() && !precompact_ok {
            failed = Some(format!("clause (2) precompact components on window {alpha}"));
        }
        windows.push(WindowCertificate { window: alpha, levels: ls.clone(), flat_residual, flat_samples, flat_witness, flat_ok, components, box_range, precompact_ok });
    }
    let verdict = match failed {
        None => CertificateVerdict::CertifiedComplete,
        Some(clause) => CertificateVerdict::NotCertified { clause },
    };
    Ok(CompletenessCertificate { windows, cover_ok, verdict, seed })
}

/// Weights `w^α = σ^α + (1 − Σσ) ρ^α` on objects, where `σ^α` is one on the window-`α` slabs and
/// `ρ` the base partition.
fn slab_weights(atlas: TrivializingAtlas, f: Exhaustion, levels: Vec<Vec<f64>>, band: f64, pad: f64, base: Arc<PartitionFn>) -> impl Fn(&Point) -> Option<Vec<f64>> + Send + Sync {
    let half = 0.5 * band;
    move |x: &Point| {
        let dn = atlas.base_dim();
        let (n, fib) = x.coords.split_at(dn);
        let sigma: Vec<f64> = (0..atlas.windows.len())
            .map(|alpha| {
                let win = &atlas.windows[alpha];
                let nb: f64 = win.inner.iter().zip(n).map(|(u, v)| plateau(*v, u.0, u.1, pad)).product();
                if nb == 0.0 {
                    return 0.0;
                }
                let value = f.eval(&atlas.chart_fiber(alpha, n, fib));
                nb * levels[alpha].iter().map(|l| plateau(value, l - half, l + half, half)).sum::<f64>()
            })
            .collect();
        let rest = 1.0 - sigma.iter().sum::<f64>();
        let rho = base(n)?;
        Some(sigma.iter().zip(&rho).map(|(s, r)| s + rest * r).collect())
    }
}

/// Glues the chart-flat lifts with slab weights evaluated at the source, then certifies the result.
pub fn complete_connection_builder(
    atlas: &TrivializingAtlas,
    f: &Exhaustion,
    schedule: &LevelSchedule,
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<(Connection, CompletenessCertificate)> {
    let levels = schedule.level_values();
    if levels.len() != atlas.windows.len() {
        return Err(Error::AtlasMismatch(format!("schedule has {} windows, atlas {}", levels.len(), atlas.windows.len())));
    }
    let pairs = verify_disjointness(atlas, f, &levels, schedule.band, schedule.pad)?;
    if let Some(p) = pairs.iter().find(|p| !p.separated) {
        return Err(Error::CertificateFailure(format!(
            "clause (1) window exclusivity: slabs (step {}, window {}) and (step {}, window {}) may overlap",
            p.first.step, p.first.window, p.second.step, p.second.window
        )));
    }
    let weights = Arc::new(slab_weights(atlas.clone(), f.clone(), levels.clone(), schedule.band, schedule.pad, subordinate_partition(atlas)));
    let lift = |atlas: TrivializingAtlas, weights: Arc<dyn Fn(&Point) -> Option<Vec<f64>> + Send + Sync>, on_arrows: bool| -> Arc<HorFn> {
        let total = atlas.family.total.clone();
        Arc::new(move |p: &Point, w: &DVector<f64>| {
            let x = if on_arrows { total.s(p) } else { p.clone() };
            let ws = weights(&x)?;
            let mut v = DVector::zeros(p.dim());
            for (alpha, chi) in ws.iter().enumerate() {
                if *chi != 0.0 {
                    v += atlas.chart_lift(alpha, p, w) * *chi;
                }
            }
            Some(v)
        })
    };
    let hor = lift(atlas.clone(), weights.clone(), true);
    let hor0 = lift(atlas.clone(), weights, false);
    let c = Connection::new(atlas.family.clone(), move |g, w| hor(g, w), move |x, w| hor0(x, w), "complete connection builder").claimed(true);
    let cert = flatness_certificate_check(&c, atlas, f, &levels, n_samples, seed, tol)?;
    if let CertificateVerdict::NotCertified { clause } = &cert.verdict {
        return Err(Error::CertificateFailure(clause.clone()));
    }
    Ok((c, cert))
}
