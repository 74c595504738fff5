//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Definiteness tests go through the symmetric eigendecomposition of a
//! congruence, never through determinants or Cholesky success alone.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

fn eigen(m: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    eigen(m).eigenvalues.min()
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    eigen(m).eigenvalues.max()
}

/// Apply `g` to the eigenvalues of the symmetric part of `m`.
pub fn sym_function(m: &Mat, g: impl Fn(f64) -> f64) -> Mat {
    let e = eigen(m);
    let d = e.eigenvalues.map(g);
    &e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Symmetric square root with negative eigenvalues floored at zero.
pub fn sym_sqrt(m: &Mat) -> Mat {
    symmetrize(&sym_function(m, |x| x.max(0.0).sqrt()))
}

/// Symmetric inverse square root; fails unless `m` is positive definite.
pub fn sym_inv_sqrt(m: &Mat) -> Result<Mat> {
    let e = eigen(m);
    if e.eigenvalues.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(Error::Infeasible(
            "inverse square root of a matrix that is not positive definite".into(),
        ));
    }
    let d = e.eigenvalues.map(|x| 1.0 / x.sqrt());
    Ok(symmetrize(
        &(&e.eigenvectors * Mat::from_diagonal(&d) * e.eigenvectors.transpose()),
    ))
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Infeasible("singular matrix".into()))
}

/// Inverse of a symmetric positive definite matrix through Cholesky.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::Infeasible("matrix is not positive definite".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// `lambda_min(I - N^{1/2} P N^{1/2})`: positive iff `P < N^{-1}` for `N > 0`.
pub fn upper_margin(n: &Mat, p: &Mat) -> f64 {
    let root = sym_sqrt(n);
    let c = &root * p * &root;
    let id = Mat::identity(n.nrows(), n.ncols());
    min_eigenvalue(&(id - c))
}

/// Numerical rank with the scale-invariant threshold `tol * sigma_max`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Column-major stacking.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_sqrt(&m);
        assert_relative_eq!(&r * &r, m, epsilon = 1e-12);
        let ir = sym_inv_sqrt(&m).unwrap();
        assert_relative_eq!(&ir * &m * &ir, Mat::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn vec_is_column_major() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&m), 2, 2), m);
    }

    #[test]
    fn kron_vec_identity() {
        // vec(A X B) = (B^T kron A) vec(X)
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let b = Mat::from_row_slice(2, 2, &[0.3, 1.0, 2.0, -4.0]);
        let x = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.25, 3.0]);
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn rank_is_scale_invariant() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-9), 1);
        assert_eq!(rank(&(m * 1e-20), 1e-9), 1);
        assert_eq!(rank(&Mat::zeros(2, 2), 1e-9), 0);
    }

    #[test]
    fn upper_margin_scalar() {
        let n = Mat::from_element(1, 1, 1.0);
        assert_relative_eq!(upper_margin(&n, &Mat::from_element(1, 1, 0.5)), 0.5);
        assert!(upper_margin(&n, &Mat::from_element(1, 1, 2.0)) < 0.0);
    }
}
