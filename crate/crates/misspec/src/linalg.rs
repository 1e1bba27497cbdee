//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: &Mat, b: &Vector) -> Option<Vector> {
    a.clone().lu().solve(b)
}

pub fn solve_mat(a: &Mat, b: &Mat) -> Option<Mat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &Mat) -> Option<Mat> {
    a.clone().try_inverse()
}

/// Singular values sorted in decreasing order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn sigma_max(a: &Mat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a square matrix (zero when rank deficient).
pub fn sigma_min(a: &Mat) -> f64 {
    let sv = singular_values(a);
    if sv.len() < a.nrows().max(a.ncols()) {
        return 0.0;
    }
    sv.last().copied().unwrap_or(0.0)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// `a^{-1/2}` for symmetric positive definite `a`, via eigendecomposition.
///
/// Returns `Err(lambda_min)` when the smallest eigenvalue is at or below `floor`.
pub fn sym_inv_sqrt(a: &Mat, floor: f64) -> Result<Mat, f64> {
    let eig = SymmetricEigen::new(a.clone());
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin <= floor {
        return Err(lmin);
    }
    let q = &eig.eigenvectors;
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(q * d * q.transpose())
}

/// Maximum absolute row sum, the operator norm induced by the sup norm.
pub fn max_row_sum(a: &Mat) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the orthogonal complement of `col(m)` in `R^S`.
///
/// Takes the trailing columns of the QR factor of `[m | I]`; assumes `m` has
/// full column rank.
pub fn complement_basis(m: &Mat) -> Mat {
    let s = m.nrows();
    let d = m.ncols();
    let mut ext = Mat::zeros(s, d + s);
    ext.view_mut((0, 0), (s, d)).copy_from(m);
    ext.view_mut((0, d), (s, s)).copy_from(&Mat::identity(s, s));
    let q = ext.qr().q();
    q.columns(d.min(s), s - d.min(s)).into_owned()
}

/// Right null space of `m` with singular values at or below `tol * sigma_max`.
///
/// Columns form an orthonormal basis. Short matrices are padded with zero rows so
/// the full right singular basis is available.
pub fn null_space(m: &Mat, tol: f64) -> Mat {
    let (r, c) = m.shape();
    let mut padded = Mat::zeros(r.max(c), c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = tol * smax.max(f64::MIN_POSITIVE);
    let cols: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cut)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Top right singular vector (unit norm) and the top singular value.
pub fn top_right_singular(m: &Mat) -> (Vector, f64) {
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested v_t");
    let (i, s) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    (vt.row(i).transpose(), s)
}

/// Flips the sign so the first entry with magnitude above `tol` is positive.
pub fn canonical_sign(mut v: Vector, tol: f64) -> Vector {
    if let Some(x) = v.iter().find(|x| x.abs() > tol) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
    v
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_mat(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}
