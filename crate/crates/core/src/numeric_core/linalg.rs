//! Dense subspace helpers in the flat patch gauge.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

fn svd_parts(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap())
}

fn threshold(sv: &DVector<f64>, tol: f64) -> f64 {
    tol * sv.iter().fold(1.0f64, |m, s| m.max(*s))
}

pub fn matrix_from_columns(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

pub fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
}

/// Numerical rank with singular values measured against `tol * max(1, σ_max)`.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let thr = threshold(&sv, tol);
    sv.iter().filter(|s| **s > thr).count()
}

/// Smallest of the leading `min(m, n)` singular values (0 for empty matrices).
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().iter().fold(f64::INFINITY, |m, s| m.min(*s))
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn column_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let (u, sv, _) = svd_parts(a);
    let thr = threshold(&sv, tol);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thr).collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis (as columns) of the kernel of `a`.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (_, sv, v_t) = svd_parts(&padded);
    let thr = threshold(&sv, tol);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= thr).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| v_t[(keep[c], r)])
}

/// `‖v − P v‖ / max(‖v‖, 1)` with `P` the orthogonal projector onto `span(basis)`.
pub fn subspace_residual(v: &DVector<f64>, basis: &[DVector<f64>], rank_tol: f64) -> Result<f64> {
    let norm = v.norm();
    if basis.is_empty() {
        return Ok(norm / norm.max(1.0));
    }
    let b = matrix_from_columns(v.len(), basis);
    let q = column_space(&b, rank_tol);
    if q.ncols() < basis.len() {
        return Err(Error::DegenerateBasis(format!(
            "{} vectors span a subspace of dimension {}",
            basis.len(),
            q.ncols()
        )));
    }
    Ok(projection_residual(v, &q) / norm.max(1.0))
}

/// `‖v − Q Qᵀ v‖` for an orthonormal column basis `Q`.
pub fn projection_residual(v: &DVector<f64>, q: &DMatrix<f64>) -> f64 {
    if q.ncols() == 0 {
        return v.norm();
    }
    (v - q * (q.transpose() * v)).norm()
}

/// Smallest principal angle between the column spaces of `a` and `b` (π/2 if either is empty).
pub fn min_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> f64 {
    let qa = column_space(a, tol);
    let qb = column_space(b, tol);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let c = qa.transpose() * qb;
    let top = c.singular_values().iter().fold(0.0f64, |m, s| m.max(*s));
    top.min(1.0).acos()
}

/// Least-squares solution of `a x = b` via the pseudo-inverse.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let thr = threshold(&svd.singular_values, tol);
    svd.solve(b, thr).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Orthonormal basis of `col(a) ∩ col(b)`.
pub fn intersection(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut stacked = DMatrix::zeros(n, a.ncols() + b.ncols());
    stacked.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    stacked.view_mut((0, a.ncols()), (n, b.ncols())).copy_from(&(-b));
    let coeffs = null_space(&stacked, tol);
    column_space(&(a * coeffs.rows(0, a.ncols())), tol)
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let thr = threshold(&svd.singular_values, tol);
    let full_rank = svd.singular_values.iter().all(|&s| s > thr);
    let mut x = svd.pseudo_inverse(thr).unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()));
    if full_rank {
        // the SVD can be off by ~1e-11 relative; Newton-Schulz steps X(2I - AX) square the error
        let id = DMatrix::<f64>::identity(a.nrows(), a.nrows()) * 2.0;
        for _ in 0..2 {
            x = &x * (&id - a * &x);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn pinv_is_accurate_for_full_rank_wide_matrices() {
        // a matrix on which the plain SVD route loses about four digits
        let b = DMatrix::from_row_slice(4, 4, &[
            5.945442969527315, 0.0773842019045603, -0.3518220772407885, -0.11099171512379868,
            -0.4927644431221547, 5.161234782356146, -0.7066561611273892, 0.27930458100764843,
            0.06752373369932818, 0.3367342890232152, 5.517362766629545, 0.3422793191283442,
            0.4374658392509321, -0.4859615519945901, 0.09514993333351374, 5.206712367634267,
        ]);
        let a = b.try_inverse().unwrap().rows(1, 3).into_owned();
        assert!((&a * pinv(&a, 1e-14) - DMatrix::identity(3, 3)).amax() < 1e-14);
        let t = a.transpose();
        assert!((pinv(&t, 1e-14) * &t - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix_truncates() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pinv(&a, 1e-12);
        assert!((&a * &p * &a - &a).amax() < 1e-12);
        assert!((&p * &a * &p - &p).amax() < 1e-12);
    }

    #[test]
    fn member_has_zero_residual() {
        let basis = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 1.0])];
        let r = subspace_residual(&v(&[2.0, 3.0, 3.0]), &basis, 1e-9).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn orthogonal_unit_vector() {
        let basis = [v(&[1.0, 0.0])];
        let r = subspace_residual(&v(&[0.0, 1.0]), &basis, 1e-9).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_projection_oracle() {
        // remainder after projecting onto e1, e2, (0,0,1,4) is (0,0,24,-6)/17 with norm 6/sqrt(17)
        let basis = [v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0, 4.0])];
        let target = v(&[2.0, 0.0, 2.0, 2.0]);
        let r = subspace_residual(&target, &basis, 1e-9).unwrap();
        let expected = 6.0 / 17f64.sqrt() / 12f64.sqrt();
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }

    #[test]
    fn degenerate_basis_rejected() {
        let basis = [v(&[1.0, 1.0]), v(&[2.0, 2.0])];
        assert!(matches!(subspace_residual(&v(&[0.0, 1.0]), &basis, 1e-9), Err(Error::DegenerateBasis(_))));
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
        let n = null_space(&a, 1e-9);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).norm() < 1e-12);
    }

    #[test]
    fn principal_angle_between_axes() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!((min_principal_angle(&a, &b, 1e-9) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}
