//! Tangent groupoid structure maps and fiberwise VB-groupoid linear algebra.

use crate::config::Tolerances;
use crate::connections::{Connection, MultiplicativityReport};
use crate::error::{Error, Result};
use crate::groupoid_core::{Groupoid, GroupoidMorphism};
use crate::numeric_core::linalg::{column_space, intersection, lstsq, matrix_from_columns, pinv, projection_residual};
use crate::numeric_core::{null_space, rank, Point};
use crate::report::Witness;
use crate::rng::{rng_for, symmetric};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Tolerance for the pure linear-algebra identities of the splitting correspondence.
pub const SPLIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TangentMaps {
    pub ts: DMatrix<f64>,
    pub tt: DMatrix<f64>,
    pub ti: DMatrix<f64>,
    /// `Tu` at `s(g)`.
    pub tu: DMatrix<f64>,
    pub composable: Option<ComposableTangents>,
}

/// `Tm` on the composable subspace `{(u, v) : Ts(u) = Tt(v)}` at a pair `(g, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposableTangents {
    /// Columns span the composable subspace of `T_gG × T_hG`.
    pub basis: DMatrix<f64>,
    pub dm_left: DMatrix<f64>,
    pub dm_right: DMatrix<f64>,
    /// `Tm` applied to the basis columns.
    pub tm_on_basis: DMatrix<f64>,
}

impl ComposableTangents {
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.dm_left * u + &self.dm_right * v
    }
}

pub fn tangent_structure_maps(gr: &Groupoid, g: &Point, h: Option<&Point>, tol: &Tolerances) -> Result<TangentMaps> {
    let fd = tol.fd_step;
    let ts = gr.src.jacobian(g, fd)?;
    let tt = gr.tgt.jacobian(g, fd)?;
    let ti = gr.inv.jacobian(g, fd)?;
    let tu = gr.unit.jacobian(&gr.s(g), fd)?;
    let composable = match h {
        None => None,
        Some(h) => {
            let tth = gr.tgt.jacobian(h, fd)?;
            let (dg, dh) = (g.dim(), h.dim());
            let mut c = DMatrix::zeros(ts.nrows(), dg + dh);
            c.view_mut((0, 0), (ts.nrows(), dg)).copy_from(&ts);
            c.view_mut((0, dg), (ts.nrows(), dh)).copy_from(&(-&tth));
            let basis = null_space(&c, tol.rank_tol);
            let (dm_left, dm_right) = gr.mul.jacobians(g, h, fd)?;
            let tm_on_basis = &dm_left * basis.rows(0, dg) + &dm_right * basis.rows(dg, dh);
            Some(ComposableTangents { basis, dm_left, dm_right, tm_on_basis })
        }
    };
    Ok(TangentMaps { ts, tt, ti, tu, composable })
}

// ---------------------------------------------------------------------------
// VB-subgroupoid check

/// Frame of a candidate subbundle `S ⊂ TG` at one arrow.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbundleFrame {
    pub base: Point,
    pub basis: Vec<DVector<f64>>,
}

impl SubbundleFrame {
    pub fn matrix(&self) -> DMatrix<f64> {
        matrix_from_columns(self.base.dim(), &self.basis)
    }
}

pub type FrameFn<'a> = dyn Fn(&Point) -> Result<SubbundleFrame> + 'a;

/// Horizontal spaces of a connection as frames.
pub fn horizontal_frames(c: &Connection) -> impl Fn(&Point) -> Result<SubbundleFrame> + '_ {
    move |g| {
        let m = c.lift_matrix(g)?;
        Ok(SubbundleFrame { base: g.clone(), basis: (0..m.ncols()).map(|j| m.column(j).into_owned()).collect() })
    }
}

/// `ker Tπ` as frames.
pub fn kernel_frames<'a>(pi: &'a GroupoidMorphism, tol: &Tolerances) -> impl Fn(&Point) -> Result<SubbundleFrame> + 'a {
    let (fd, rt) = (tol.fd_step, tol.rank_tol);
    move |g| {
        let k = null_space(&pi.arrow_map.jacobian(g, fd)?, rt);
        Ok(SubbundleFrame { base: g.clone(), basis: (0..k.ncols()).map(|j| k.column(j).into_owned()).collect() })
    }
}

/// The full tangent space as frames.
pub fn full_frames(g: &Point) -> Result<SubbundleFrame> {
    let n = g.dim();
    Ok(SubbundleFrame { base: g.clone(), basis: (0..n).map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })).collect() })
}

pub const VB_CLAUSES: [&str; 5] = ["inverse", "source", "target", "product", "side_rank"];

fn checked_frame(frames: &FrameFn<'_>, g: &Point, ranks: &mut BTreeMap<usize, usize>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let f = frames(g)?;
    let m = f.matrix();
    let r = rank(&m, tol.rank_tol);
    if r < f.basis.len() {
        return Err(Error::DegenerateBasis(format!("frame at {g:?} has rank {r} < {}", f.basis.len())));
    }
    match ranks.get(&g.patch) {
        Some(&prev) if prev != r => {
            return Err(Error::FrameRankMismatch(format!("rank {r} at {g:?}, {prev} elsewhere on arrow patch {}", g.patch)))
        }
        _ => {
            ranks.insert(g.patch, r);
        }
    }
    Ok(m)
}

/// Side part `S_{u(x)} ∩ im Tu(x)` of a frame at a unit.
fn side_basis(gr: &Groupoid, x: &Point, frame: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let tu = gr.unit.jacobian(x, tol.fd_step)?;
    Ok(intersection(frame, &tu, tol.rank_tol))
}

/// Sampled VB-subgroupoid conditions for `S`, with absolute residuals in the flat patch gauge:
/// `Ti(S_g) ⊂ S_{g⁻¹}`, `Tu Ts(S_g)` and `Tu Tt(S_g)` inside the side part at the unit,
/// `Tm(u, v) ∈ S_{gh}` for composable `u ∈ S_g, v ∈ S_h`, and constant side rank per object
/// patch (the `side_rank` residual is the rank difference).
pub fn vb_subgroupoid_check(gr: &Groupoid, frames: &FrameFn<'_>, n_samples: usize, seed: u64, tol: &Tolerances) -> Result<MultiplicativityReport> {
    let fd = tol.fd_step;
    let mut rep = MultiplicativityReport::new(&VB_CLAUSES, n_samples, seed);
    let mut ranks = BTreeMap::new();
    let mut side_ranks: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..n_samples {
        let mut rng = rng_for(seed, k as u64);
        let (g, h) = gr.sample_pair(&mut rng);
        let sg = checked_frame(frames, &g, &mut ranks, tol)?;
        let sh = checked_frame(frames, &h, &mut ranks, tol)?;
        let gi = gr.i(&g);
        let qgi = column_space(&checked_frame(frames, &gi, &mut ranks, tol)?, tol.rank_tol);
        let gh = gr.m(&g, &h);
        let qgh = column_space(&checked_frame(frames, &gh, &mut ranks, tol)?, tol.rank_tol);
        let maps = tangent_structure_maps(gr, &g, Some(&h), tol)?;
        let comp = maps.composable.as_ref().expect("pair given");
        let (x_s, x_t) = (gr.s(&g), gr.t(&g));
        let side_s = side_basis(gr, &x_s, &checked_frame(frames, &gr.u(&x_s), &mut ranks, tol)?, tol)?;
        let side_t = side_basis(gr, &x_t, &checked_frame(frames, &gr.u(&x_t), &mut ranks, tol)?, tol)?;
        let tu_s = gr.unit.jacobian(&x_s, fd)?;
        let tu_t = gr.unit.jacobian(&x_t, fd)?;
        let tt_h = gr.tgt.jacobian(&h, fd)?;
        let tt_sh = &tt_h * &sh;
        let free = &sh * null_space(&tt_sh, tol.rank_tol);
        let wit = |name: &str| Witness::points(name, &[&g, &h]);

        for j in 0..sg.ncols() {
            let u = sg.column(j).into_owned();
            rep.observe("inverse", projection_residual(&(&maps.ti * &u), &qgi), || wit("inverse"));
            rep.observe("source", projection_residual(&(&tu_s * (&maps.ts * &u)), &side_s), || wit("source"));
            rep.observe("target", projection_residual(&(&tu_t * (&maps.tt * &u)), &side_t), || wit("target"));
            let target = &maps.ts * &u;
            let coeff = lstsq(&tt_sh, &target, tol.rank_tol);
            let gap = (&tt_sh * &coeff - &target).norm();
            if gap > tol.rank_tol.max(1e-9) * (1.0 + target.norm()) {
                // no partner in S_h: Ts(S_g) is not covered by Tt(S_h)
                rep.observe("product", gap, || wit("product (no composable partner)"));
                continue;
            }
            let mut v = &sh * coeff;
            if free.ncols() > 0 {
                let extra = DVector::from_fn(free.ncols(), |_, _| symmetric(&mut rng, 1.0));
                v += &free * extra;
            }
            rep.observe("product", projection_residual(&comp.apply(&u, &v), &qgh), || wit("product"));
        }
        for (x, side) in [(&x_s, &side_s), (&x_t, &side_t)] {
            let r = side.ncols();
            let prev = *side_ranks.entry(x.patch).or_insert(r);
            rep.observe("side_rank", (prev as f64 - r as f64).abs(), || Witness::points("side rank", &[x]));
        }
    }
    Ok(rep.finish(tol.tol_mult))
}

// ---------------------------------------------------------------------------
// splitting correspondence

/// Fiber data `0 → A --ι--> B --π̃--> C → 0` at one arrow, with optional splittings.
#[derive(Debug, Clone, PartialEq)]
pub struct VbFiberData {
    pub inclusion: DMatrix<f64>,
    pub projection: DMatrix<f64>,
    pub right_splitting: Option<DMatrix<f64>>,
    pub left_splitting: Option<DMatrix<f64>>,
    pub complement: Option<DMatrix<f64>>,
}

impl VbFiberData {
    pub fn new(inclusion: DMatrix<f64>, projection: DMatrix<f64>) -> Self {
        Self { inclusion, projection, right_splitting: None, left_splitting: None, complement: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingGiven {
    Right,
    Left,
    Complement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingResiduals {
    /// `‖h π̃ + ι p − I‖`
    pub decomposition: f64,
    /// `max(‖Φ Φ⁻¹ − I‖, ‖Φ⁻¹ Φ − I‖)` with `Φ = (p, π̃)`, `Φ⁻¹ = [ι h]`.
    pub phi_roundtrip: f64,
    /// `max(‖p C‖, ‖π̃ h − I‖, distance between im C and im h)`.
    pub complement: f64,
}

impl SplittingResiduals {
    pub fn worst(&self) -> f64 {
        self.decomposition.max(self.phi_roundtrip).max(self.complement)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingData {
    pub data: VbFiberData,
    pub right_splitting: DMatrix<f64>,
    pub left_splitting: DMatrix<f64>,
    pub complement: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub phi_inverse: DMatrix<f64>,
    pub residuals: SplittingResiduals,
}

impl SplittingData {
    /// Fiber data with every splitting filled in.
    pub fn completed(&self) -> VbFiberData {
        VbFiberData {
            inclusion: self.data.inclusion.clone(),
            projection: self.data.projection.clone(),
            right_splitting: Some(self.right_splitting.clone()),
            left_splitting: Some(self.left_splitting.clone()),
            complement: Some(self.complement.clone()),
        }
    }
}

fn scale(ms: &[&DMatrix<f64>]) -> f64 {
    ms.iter().fold(1.0, |s, m| s * (1.0 + m.norm()))
}

/// Completes one splitting datum to all of `h`, `p`, `C`, `Φ`, `Φ⁻¹`:
/// `h = (I − ι p) π̃⁺` from `p`, `h = C (π̃ C)⁻¹` from `C`, `p = (ιᵀι)⁻¹ ιᵀ (I − h π̃)` from `h`.
pub fn splitting_correspondence(d: &VbFiberData, given: SplittingGiven) -> Result<SplittingData> {
    let (iota, proj) = (&d.inclusion, &d.projection);
    let n = iota.nrows();
    let (ka, kc) = (iota.ncols(), proj.nrows());
    if proj.ncols() != n || ka + kc != n {
        return Err(Error::NotASplitting(format!("shapes {}x{} and {}x{} do not form a short exact sequence", n, ka, kc, proj.ncols())));
    }
    if rank(iota, SPLIT_TOL) < ka || rank(proj, SPLIT_TOL) < kc || (proj * iota).norm() > SPLIT_TOL * scale(&[iota, proj]) {
        return Err(Error::NotASplitting("inclusion and projection are not exact".into()));
    }
    let missing = |what: &str| Error::NotASplitting(format!("no {what} supplied"));
    let left_from = |h: &DMatrix<f64>| -> DMatrix<f64> {
        let gram = iota.transpose() * iota;
        let gi = gram.try_inverse().unwrap_or_else(|| pinv(&(iota.transpose() * iota), SPLIT_TOL));
        gi * iota.transpose() * (DMatrix::identity(n, n) - h * proj)
    };
    let (h, p) = match given {
        SplittingGiven::Right => {
            let h = d.right_splitting.clone().ok_or_else(|| missing("right splitting"))?;
            let r = (proj * &h - DMatrix::identity(kc, kc)).norm();
            if r > SPLIT_TOL * scale(&[proj, &h]) {
                return Err(Error::NotASplitting(format!("π̃ h − I has norm {r:e}")));
            }
            let p = left_from(&h);
            (h, p)
        }
        SplittingGiven::Left => {
            let p = d.left_splitting.clone().ok_or_else(|| missing("left splitting"))?;
            let r = (&p * iota - DMatrix::identity(ka, ka)).norm();
            if r > SPLIT_TOL * scale(&[iota, &p]) {
                return Err(Error::NotASplitting(format!("p ι − I has norm {r:e}")));
            }
            let h = (DMatrix::identity(n, n) - iota * &p) * pinv(proj, SPLIT_TOL);
            (h, p)
        }
        SplittingGiven::Complement => {
            let c = d.complement.clone().ok_or_else(|| missing("complement frame"))?;
            let pc = proj * &c;
            if c.ncols() != kc || rank(&pc, 1e-10) < kc {
                return Err(Error::NotASplitting("complement frame is not mapped isomorphically by π̃".into()));
            }
            let h = &c * pc.try_inverse().ok_or_else(|| Error::NotASplitting("π̃ C is singular".into()))?;
            let p = left_from(&h);
            (h, p)
        }
    };
    let complement = d.complement.clone().filter(|_| given == SplittingGiven::Complement).unwrap_or_else(|| h.clone());
    let mut phi = DMatrix::zeros(n, n);
    phi.view_mut((0, 0), (ka, n)).copy_from(&p);
    phi.view_mut((ka, 0), (kc, n)).copy_from(proj);
    let mut phi_inverse = DMatrix::zeros(n, n);
    phi_inverse.view_mut((0, 0), (n, ka)).copy_from(iota);
    phi_inverse.view_mut((0, ka), (n, kc)).copy_from(&h);
    let id = DMatrix::<f64>::identity(n, n);
    let qc = column_space(&complement, 1e-10);
    let qh = column_space(&h, 1e-10);
    let span_gap = (0..qc.ncols())
        .map(|j| projection_residual(&qc.column(j).into_owned(), &qh))
        .chain((0..qh.ncols()).map(|j| projection_residual(&qh.column(j).into_owned(), &qc)))
        .fold(0.0f64, f64::max);
    let residuals = SplittingResiduals {
        decomposition: (&h * proj + iota * &p - &id).norm(),
        phi_roundtrip: (&phi * &phi_inverse - &id).norm().max((&phi_inverse * &phi - &id).norm()),
        complement: (&p * &complement).norm().max((proj * &h - DMatrix::identity(kc, kc)).norm()).max(span_gap),
    };
    Ok(SplittingData { data: d.clone(), right_splitting: h, left_splitting: p, complement, phi, phi_inverse, residuals })
}

// ---------------------------------------------------------------------------
// core and side parts at a unit

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSide {
    /// `S_{u(x)} ∩ ker Ts`
    pub core: DMatrix<f64>,
    /// `S_{u(x)} ∩ im Tu`
    pub side: DMatrix<f64>,
    /// `|rank core + rank side − rank S|` plus the distance of `S` from `core ⊕ side`.
    pub residual: f64,
}

pub fn core_side_decomposition(gr: &Groupoid, x: &Point, frame: &[DVector<f64>], tol: &Tolerances) -> Result<CoreSide> {
    let ux = gr.u(x);
    let s = matrix_from_columns(ux.dim(), frame);
    let r = rank(&s, tol.rank_tol);
    if r < frame.len() {
        return Err(Error::DegenerateBasis(format!("{} frame vectors span dimension {r}", frame.len())));
    }
    let ker_ts = null_space(&gr.src.jacobian(&ux, tol.fd_step)?, tol.rank_tol);
    let core = intersection(&s, &ker_ts, tol.rank_tol);
    let side = side_basis(gr, x, &s, tol)?;
    let mut both = DMatrix::zeros(ux.dim(), core.ncols() + side.ncols());
    both.view_mut((0, 0), (ux.dim(), core.ncols())).copy_from(&core);
    both.view_mut((0, core.ncols()), (ux.dim(), side.ncols())).copy_from(&side);
    let q = column_space(&both, tol.rank_tol);
    let gap = frame.iter().map(|v| projection_residual(v, &q) / v.norm().max(1.0)).fold(0.0f64, f64::max);
    let dims = (core.ncols() + side.ncols()) as f64 - r as f64;
    Ok(CoreSide { core, side, residual: dims.abs() + gap })
}

/// Frames for a fixed groupoid: convenience wrapper so closures over `Arc`s can be passed.
pub fn frames_from<F>(f: F) -> Arc<dyn Fn(&Point) -> Result<SubbundleFrame> + Send + Sync>
where
    F: Fn(&Point) -> Result<SubbundleFrame> + Send + Sync + 'static,
{
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::flat_projection_connection;
    use crate::groupoid_core::catalog::{self, catalog, pair_groupoid, plane_to_circle, Params};
    use crate::numeric_core::Patch;
    use crate::report::MultVerdict;
    use proptest::prelude::*;

    #[test]
    fn pair_line_tangent_multiplication() {
        let tol = Tolerances::default();
        let g = pair_groupoid(Patch::lines("x", 1));
        let (a, b) = (Point::new(0, vec![0.3, -1.2]), Point::new(0, vec![-1.2, 2.0]));
        let maps = tangent_structure_maps(&g, &a, Some(&b), &tol).unwrap();
        let comp = maps.composable.unwrap();
        assert_eq!(comp.basis.ncols(), 3);
        let (u1, u2, u3) = (0.7, -0.4, 1.9);
        let out = comp.apply(&DVector::from_vec(vec![u1, u2]), &DVector::from_vec(vec![u2, u3]));
        assert!((out - DVector::from_vec(vec![u1, u3])).norm() < 1e-12);
    }

    #[test]
    fn unit_then_source_is_identity() {
        let tol = Tolerances::default();
        for name in catalog::CATALOG_NAMES {
            for g in catalog(name, &Params::new()).unwrap().groupoids() {
                let mut rng = rng_for(5, 0);
                let x = g.sample_object(&mut rng);
                let ux = g.u(&x);
                let maps = tangent_structure_maps(&g, &ux, None, &tol).unwrap();
                let d = x.dim();
                assert!((&maps.ts * &maps.tu - DMatrix::identity(d, d)).amax() < 1e-12, "{}", g.name);
            }
        }
    }

    #[test]
    fn abelian_plane_adds_tangents() {
        let tol = Tolerances::default();
        let pi = plane_to_circle();
        let (a, b) = (Point::new(0, vec![0.5, 1.0]), Point::new(0, vec![-2.0, 0.25]));
        let comp = tangent_structure_maps(&pi.total, &a, Some(&b), &tol).unwrap().composable.unwrap();
        let (u, v) = (DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-3.0, 0.5]));
        assert!((comp.apply(&u, &v) - (&u + &v)).norm() < 1e-12);
    }

    #[test]
    fn kernel_and_full_frames_are_vb_subgroupoids() {
        let tol = Tolerances::default();
        for name in catalog::CATALOG_NAMES {
            let e = catalog(name, &Params::new()).unwrap();
            let Some(pi) = e.morphism() else { continue };
            let frames = kernel_frames(pi, &tol);
            let rep = vb_subgroupoid_check(&pi.total, &frames, 40, 3, &tol).unwrap();
            assert_eq!(rep.verdict, MultVerdict::Multiplicative, "{name}: {rep:?}");
            let full = vb_subgroupoid_check(&pi.total, &full_frames, 20, 3, &tol).unwrap();
            assert_eq!(full.verdict, MultVerdict::Multiplicative, "{name}");
        }
    }

    #[test]
    fn luca_horizontal_frames_fail_on_products() {
        let tol = Tolerances::default();
        let m = Arc::new(plane_to_circle());
        let c = Connection::new(m, |g, a| Some(DVector::from_vec(vec![a[0], g.coords[0] * g.coords[0] * a[0]])), |_, _| Some(DVector::zeros(0)), "luca");
        let frames = horizontal_frames(&c);
        let rep = vb_subgroupoid_check(c.total(), &frames, 50, 1, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::NotMultiplicative);
        let prod = rep.clause("product").unwrap();
        assert!(prod.residual >= 1.0, "{prod:?}");
        assert!(rep.clause("inverse").unwrap().residual < 1e-12);
    }

    #[test]
    fn flat_horizontal_frames_pass() {
        let tol = Tolerances::default();
        let m = catalog("trivial_family", &Params::new()).unwrap().morphism().unwrap().clone();
        let c = flat_projection_connection(m);
        let frames = horizontal_frames(&c);
        let rep = vb_subgroupoid_check(c.total(), &frames, 40, 1, &tol).unwrap();
        assert_eq!(rep.verdict, MultVerdict::Multiplicative);
    }

    #[test]
    fn canonical_direct_sum() {
        let iota = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let proj = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let mut d = VbFiberData::new(iota, proj);
        d.right_splitting = Some(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]));
        let out = splitting_correspondence(&d, SplittingGiven::Right).unwrap();
        assert_eq!(out.left_splitting, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        assert!(out.residuals.worst() < 1e-15);
    }

    #[test]
    fn pair_line_core_and_side() {
        let tol = Tolerances::default();
        let g = pair_groupoid(Patch::lines("x", 1));
        let x = Point::new(0, vec![0.4]);
        let cs = core_side_decomposition(&g, &x, &full_frames(&g.u(&x)).unwrap().basis, &tol).unwrap();
        assert_eq!((cs.core.ncols(), cs.side.ncols()), (1, 1));
        // kernel of Ts = d(second) is the first axis; the side is the diagonal
        assert!(cs.core[(1, 0)].abs() < 1e-12);
        assert!((cs.side[(0, 0)] - cs.side[(1, 0)]).abs() < 1e-12);
        assert!(cs.residual < 1e-12);
        let tu = g.unit.jacobian(&x, 1e-6).unwrap();
        let side_only = core_side_decomposition(&g, &x, &[tu.column(0).into_owned()], &tol).unwrap();
        assert_eq!(side_only.core.ncols(), 0);
    }

    #[test]
    fn group_bundle_kernel_core_is_isotropy() {
        let tol = Tolerances::default();
        let e = catalog("product_with_manifold", &Params::new()).unwrap();
        let pi = e.morphism().unwrap();
        let mut rng = rng_for(9, 0);
        let x = pi.total.sample_object(&mut rng);
        let ux = pi.total.u(&x);
        let frame = kernel_frames(pi, &tol)(&ux).unwrap();
        let cs = core_side_decomposition(&pi.total, &x, &frame.basis, &tol).unwrap();
        assert!(cs.residual < 1e-9);
        // side part is ker Tπ₀ pushed forward by Tu
        let k0 = null_space(&pi.object_map.jacobian(&x, 1e-6).unwrap(), 1e-9);
        assert_eq!(cs.side.ncols(), k0.ncols());
        let ts = pi.total.src.jacobian(&ux, 1e-6).unwrap();
        assert!((&ts * &cs.core).amax() < 1e-12);
    }

    fn random_sequence(seed: u64, ka: usize, kc: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = ka + kc;
        let mut rng = rng_for(seed, 0);
        let mut b = DMatrix::from_fn(n, n, |_, _| symmetric(&mut rng, 1.0));
        b += DMatrix::identity(n, n) * (n + 1) as f64;
        let iota = b.columns(0, ka).into_owned();
        let proj = b.try_inverse().unwrap().rows(ka, kc).into_owned();
        (iota, proj)
    }

    proptest! {
        #[test]
        fn splitting_round_trips(seed in 0u64..10_000, ka in 1usize..4, kc in 1usize..4, which in 0usize..3) {
            let (iota, proj) = random_sequence(seed, ka, kc);
            let mut rng = rng_for(seed, 1);
            let x = DMatrix::from_fn(ka, kc, |_, _| symmetric(&mut rng, 1.0));
            let h = pinv(&proj, 1e-14) + &iota * x;
            let mut d = VbFiberData::new(iota.clone(), proj.clone());
            let given = match which {
                0 => { d.right_splitting = Some(h.clone()); SplittingGiven::Right }
                1 => {
                    let seed_out = splitting_correspondence(&VbFiberData { right_splitting: Some(h.clone()), ..d.clone() }, SplittingGiven::Right).unwrap();
                    d.left_splitting = Some(seed_out.left_splitting);
                    SplittingGiven::Left
                }
                _ => {
                    let basis_change = DMatrix::from_fn(kc, kc, |i, j| if i == j { 1.5 } else { 0.1 });
                    d.complement = Some(&h * basis_change);
                    SplittingGiven::Complement
                }
            };
            let out = splitting_correspondence(&d, given).unwrap();
            prop_assert!(out.residuals.worst() < SPLIT_TOL, "{:?}", out.residuals);
            prop_assert!((&out.right_splitting - &h).norm() < 1e-10);
            let again = splitting_correspondence(&out.completed(), SplittingGiven::Left).unwrap();
            prop_assert!((&again.right_splitting - &out.right_splitting).norm() < SPLIT_TOL);
        }
    }

    #[test]
    fn non_splitting_rejected() {
        let (iota, proj) = random_sequence(3, 2, 1);
        let mut d = VbFiberData::new(iota, proj);
        d.right_splitting = Some(DMatrix::zeros(3, 1));
        assert!(matches!(splitting_correspondence(&d, SplittingGiven::Right), Err(Error::NotASplitting(_))));
    }
}
