//! Haar averaging over compact target fibers: multiplicative vector fields and connections on
//! families with proper total groupoid.

use crate::config::Tolerances;
use crate::connections::{multiplicative_field_residual, Connection, HorFn, VectorField};
use crate::error::{Error, Result};
use crate::groupoid_core::{FiberQuadrature, Groupoid, GroupoidMorphism};
use crate::numeric_core::Point;
use crate::report::CheckReport;
use crate::rng::rng_for;
use nalgebra::DVector;
use std::sync::Arc;

fn quadrature(gr: &Groupoid) -> Result<Arc<FiberQuadrature>> {
    gr.tfiber_quadrature.clone().ok_or_else(|| Error::QuadratureMissing(gr.name.clone()))
}

/// `Σ_j w_j Tm(X_{g h_j}, Ti X_{h_j})` over the nodes `h_j ∈ t⁻¹(s g)`.
fn average_at(gr: &Groupoid, quad: &FiberQuadrature, nodes: usize, g: &Point, field: &dyn Fn(&Point) -> Option<DVector<f64>>, fd: f64) -> Option<DVector<f64>> {
    let mut acc = DVector::zeros(g.dim());
    for (h, w) in quad(&gr.s(g), nodes) {
        let gh = gr.m(g, &h);
        let hinv = gr.i(&h);
        let (jl, jr) = gr.mul.jacobians(&gh, &hinv, fd).ok()?;
        let ti = gr.inv.jacobian(&h, fd).ok()?;
        acc += (jl * field(&gh)? + jr * (ti * field(&h)?)) * w;
    }
    Some(acc)
}

/// `Σ_j w_j Tt X_{h_j}` over `h_j ∈ t⁻¹(x)`: the base field of the average.
fn average_base(gr: &Groupoid, quad: &FiberQuadrature, nodes: usize, x: &Point, field: &dyn Fn(&Point) -> Option<DVector<f64>>, fd: f64) -> Option<DVector<f64>> {
    let mut acc = DVector::zeros(x.dim());
    for (h, w) in quad(x, nodes) {
        acc += gr.tgt.jacobian(&h, fd).ok()? * field(&h)? * w;
    }
    Some(acc)
}

/// Worst `|Ts X_g − Ts X_{g'}|` over sampled pairs in a common source fiber, relative to `1 + |Ts X_g|`.
pub fn projectability_defect(gr: &Groupoid, field: &VectorField, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<f64> {
    let undefined = |p: &Point| Error::EvaluationOutsideDomain(format!("vector field undefined at {p:?}"));
    let mut worst = 0.0f64;
    for k in 0..n_samples {
        let mut rng = rng_for(seed ^ 0x9e0, k as u64);
        let g = gr.sample_arrow(&mut rng);
        let Some(g2) = gr.sample_sfiber(&gr.s(&g), &mut rng) else { continue };
        let a = gr.src.jacobian(&g, tol.fd_step)? * field(&g).ok_or_else(|| undefined(&g))?;
        let b = gr.src.jacobian(&g2, tol.fd_step)? * field(&g2).ok_or_else(|| undefined(&g2))?;
        worst = worst.max((a.clone() - b).norm() / (1.0 + a.norm()));
    }
    Ok(worst)
}

pub struct AveragedField {
    pub field: VectorField,
    pub base_field: VectorField,
    pub projectability_defect: f64,
    pub report: CheckReport,
}

/// Haar average `X̂_g = Σ_j w_j Tm(X_{g h_j}, Ti X_{h_j})` of a source-projectable field, with the
/// multiplicative-field identities checked at samples.
pub fn haar_average(gr: Arc<Groupoid>, field: VectorField, nodes: usize, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<AveragedField> {
    let quad = quadrature(&gr)?;
    let defect = projectability_defect(&gr, &field, n_samples, seed, tol)?;
    if defect > tol.tol_alg {
        return Err(Error::NonProjectableInput(defect));
    }
    let fd = tol.fd_step;
    let (g1, q1, x1) = (gr.clone(), quad.clone(), field.clone());
    let avg: VectorField = Arc::new(move |g: &Point| average_at(&g1, &*q1, nodes, g, &*x1, fd));
    let (g2, q2, x2) = (gr.clone(), quad, field);
    let base: VectorField = Arc::new(move |x: &Point| average_base(&g2, &*q2, nodes, x, &*x2, fd));
    let report = multiplicative_field_residual(&gr, &avg, &base, n_samples, seed, tol)?;
    Ok(AveragedField { field: avg, base_field: base, projectability_defect: defect, report })
}

/// Averages the composite lift `hor̃(g, a) = hor_s(g, hor0(s g, a))` over the target fibers; the
/// base lift becomes `Σ_j w_j Tt hor̃(h_j, a)`.
pub fn proper_family_connection(family: Arc<GroupoidMorphism>, hor0: Arc<HorFn>, hor_s: Arc<HorFn>, nodes: usize, tol: &Tolerances) -> Result<Connection> {
    if !family.is_family() {
        return Err(Error::NotAFamily(family.name.clone()));
    }
    let gr = family.total.clone();
    let quad = quadrature(&gr)?;
    let fd = tol.fd_step;
    let composite = {
        let gr = gr.clone();
        move |g: &Point, a: &DVector<f64>| -> Option<DVector<f64>> { hor_s(g, &hor0(&gr.s(g), a)?) }
    };
    let composite = Arc::new(composite);
    let (gr1, q1, c1) = (gr.clone(), quad.clone(), composite.clone());
    let hor = move |g: &Point, a: &DVector<f64>| average_at(&gr1, &*q1, nodes, g, &|p: &Point| c1(p, a), fd);
    let (gr2, q2, c2) = (gr, quad, composite);
    let hor0_avg = move |x: &Point, a: &DVector<f64>| average_base(&gr2, &*q2, nodes, x, &|p: &Point| c2(p, a), fd);
    Ok(Connection::new(family, hor, hor0_avg, format!("Haar average ({nodes} nodes)")).claimed(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::{complement_check, multiplicativity_check_pointwise};
    use crate::groupoid_core::catalog::{cyclic_action, punctured_family, so2_action, trivial_family, pair_groupoid};
    use crate::numeric_core::Patch;
    use crate::report::MultVerdict;

    fn so2_family() -> Arc<GroupoidMorphism> {
        Arc::new(trivial_family(Patch::lines("n", 1), Arc::new(so2_action(false))))
    }

    /// Family arrows are `(n, θ, x, y)`; `Ts = (n, x, y)`, so any `θ̇` keeps the field projectable.
    fn skewed_field() -> VectorField {
        Arc::new(|g: &Point| {
            let c = &g.coords;
            Some(DVector::from_vec(vec![0.0, 0.3 * c[1].sin() + 0.2 * c[2] + 0.1 * c[0], 0.0, 1.0]))
        })
    }

    fn diff(a: &VectorField, b: &VectorField, gr: &Groupoid, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let g = gr.sample_arrow(&mut rng_for(77, k as u64));
                (a(&g).unwrap() - b(&g).unwrap()).amax()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn multiplicative_field_is_a_fixed_point() {
        let fam = so2_family();
        let tol = Tolerances::default();
        let x: VectorField = Arc::new(|_: &Point| Some(DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])));
        let avg = haar_average(fam.total.clone(), x.clone(), 256, 50, 1, &tol).unwrap();
        assert!(diff(&avg.field, &x, &fam.total, 50) < 1e-10);
    }

    #[test]
    fn skewed_lift_averages_to_a_multiplicative_field() {
        let fam = so2_family();
        let tol = Tolerances::default();
        let coarse = haar_average(fam.total.clone(), skewed_field(), 256, 100, 2, &tol).unwrap();
        assert!(coarse.report.passed && coarse.report.worst_residual < 1e-6, "{}", coarse.report);
        let fine = haar_average(fam.total.clone(), skewed_field(), 1024, 10, 2, &tol).unwrap();
        assert!(diff(&coarse.field, &fine.field, &fam.total, 50) < 1e-9);
        // idempotence
        let again = haar_average(fam.total.clone(), coarse.field.clone(), 256, 10, 3, &tol).unwrap();
        assert!(diff(&again.field, &coarse.field, &fam.total, 50) < 1e-9);
        // the family-base component stays zero, so Tπ X̂ = 0
        for k in 0..20 {
            let g = fam.total.sample_arrow(&mut rng_for(5, k));
            let v = coarse.field.as_ref()(&g).unwrap();
            assert!(v[0].abs() < 1e-12);
        }
    }

    #[test]
    fn finite_group_average_is_an_exact_sum() {
        let gr = Arc::new(cyclic_action(3));
        let tol = Tolerances::default();
        let y: VectorField = Arc::new(|g: &Point| Some(DVector::from_vec(vec![g.coords[0] * g.coords[1], 1.0 + g.coords[0]])));
        let avg = haar_average(gr.clone(), y, 256, 100, 4, &tol).unwrap();
        assert!(avg.report.worst_residual < 1e-12, "{}", avg.report);
    }

    #[test]
    fn non_projectable_field_is_rejected() {
        let fam = so2_family();
        let bad: VectorField = Arc::new(|g: &Point| Some(DVector::from_vec(vec![0.0, 0.0, g.coords[1].cos(), 0.0])));
        assert!(matches!(haar_average(fam.total.clone(), bad, 64, 20, 1, &Tolerances::default()), Err(Error::NonProjectableInput(_))));
    }

    #[test]
    fn missing_quadrature_is_reported() {
        let gr = Arc::new(pair_groupoid(Patch::lines("x", 1)));
        let x: VectorField = Arc::new(|_: &Point| Some(DVector::zeros(2)));
        assert!(matches!(haar_average(gr, x, 8, 4, 1, &Tolerances::default()), Err(Error::QuadratureMissing(_))));
    }

    fn flat0() -> Arc<HorFn> {
        Arc::new(|x: &Point, w: &DVector<f64>| {
            let mut v = DVector::zeros(x.dim());
            v[0] = w[0];
            Some(v)
        })
    }

    #[test]
    fn flat_family_stays_flat() {
        let fam = so2_family();
        let hor_s: Arc<HorFn> = Arc::new(|_: &Point, v: &DVector<f64>| Some(DVector::from_vec(vec![v[0], 0.0, v[1], v[2]])));
        let c = proper_family_connection(fam, flat0(), hor_s, 256, &Tolerances::default()).unwrap();
        let g = Point::new(0, vec![0.4, 1.0, -0.5, 0.7]);
        let v = c.lift(&g, &DVector::from_vec(vec![1.5])).unwrap();
        assert!((v - DVector::from_vec(vec![1.5, 0.0, 0.0, 0.0])).amax() < 1e-12);
    }

    fn skewed_connection(nodes: usize) -> Connection {
        let hor0: Arc<HorFn> = Arc::new(|x: &Point, w: &DVector<f64>| {
            let c = &x.coords;
            Some(DVector::from_vec(vec![w[0], 0.2 * c[0].cos() * w[0], 0.1 * c[1] * w[0]]))
        });
        let hor_s: Arc<HorFn> = Arc::new(|g: &Point, v: &DVector<f64>| {
            let c = &g.coords;
            Some(DVector::from_vec(vec![v[0], 0.3 * c[1].sin() * v[0] + 0.2 * c[2] * v[2], v[1], v[2]]))
        });
        proper_family_connection(so2_family(), hor0, hor_s, nodes, &Tolerances::default()).unwrap()
    }

    #[test]
    fn skewed_family_connection_becomes_multiplicative() {
        let tol = Tolerances::default();
        let c = skewed_connection(256);
        assert!(complement_check(&c, 50, 1, &tol).unwrap().check.passed);
        let rep = multiplicativity_check_pointwise(&c, 100, 2, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative, "{rep:?}");
        assert!(rep.worst() < 1e-6);
        let fine = skewed_connection(1024);
        for k in 0..30 {
            let g = c.total().sample_arrow(&mut rng_for(11, k));
            let a = DVector::from_vec(vec![1.0]);
            assert!((c.lift(&g, &a).unwrap() - fine.lift(&g, &a).unwrap()).amax() < 1e-9);
        }
    }

    #[test]
    fn punctured_bundle_gets_the_forced_lift() {
        let fam = Arc::new(punctured_family(2, 0.0, 1e-3));
        let tol = Tolerances::default();
        let hor_s: Arc<HorFn> = Arc::new(|_: &Point, v: &DVector<f64>| Some(v.clone()));
        let c = proper_family_connection(fam, Arc::new(|_: &Point, w: &DVector<f64>| Some(w.clone())), hor_s, 8, &tol).unwrap();
        let rep = multiplicativity_check_pointwise(&c, 50, 3, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative);
        let g = Point::new(1, vec![0.7]);
        assert_eq!(c.lift(&g, &DVector::from_vec(vec![2.0])).unwrap(), DVector::from_vec(vec![2.0]));
    }
}
