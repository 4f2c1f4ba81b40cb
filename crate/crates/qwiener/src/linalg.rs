//! Complex dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Singular value decomposition with descending singular values.
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns; square, covering the full domain.
    pub v: CMatrix,
}

/// Full SVD; the right factor spans the whole domain even for wide matrices.
pub fn svd(m: &CMatrix) -> Svd {
    let (r, c) = m.shape();
    let padded;
    let work = if r < c {
        padded = {
            let mut p = CMatrix::zeros(c, c);
            p.view_mut((0, 0), (r, c)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    if work.ncols() == 0 {
        return Svd { u: CMatrix::zeros(r, 0), sigma: vec![], v: CMatrix::zeros(0, 0) };
    }
    let s = work.clone().svd(true, true);
    let u = s.u.expect("u requested");
    let vt = s.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..s.singular_values.len()).collect();
    idx.sort_by(|&a, &b| s.singular_values[b].total_cmp(&s.singular_values[a]));
    let k = idx.len();
    let sigma: Vec<f64> = idx.iter().map(|&i| s.singular_values[i]).collect();
    let mut us = CMatrix::zeros(work.nrows(), k);
    let mut vs = CMatrix::zeros(work.ncols(), k);
    for (dst, &src) in idx.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &vt.row(src).adjoint());
    }
    // Padded rows carry no weight for nonzero singular values.
    let us = us.rows(0, r).into_owned();
    Svd { u: us, sigma, v: vs }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a square or tall matrix (zero if wide).
pub fn min_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the null space: right singular vectors with `sigma <= tol`.
pub fn nullspace(m: &CMatrix, tol: f64) -> CMatrix {
    let c = m.ncols();
    if m.nrows() == 0 {
        return CMatrix::identity(c, c);
    }
    let s = svd(m);
    let rank = s.sigma.iter().filter(|&&x| x > tol).count();
    s.v.columns(rank, c - rank).into_owned()
}

/// Orthonormal basis of the column span: left singular vectors with `sigma > tol`.
pub fn orth(m: &CMatrix, tol: f64) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return CMatrix::zeros(m.nrows(), 0);
    }
    let s = svd(m);
    let rank = s.sigma.iter().filter(|&&x| x > tol).count();
    s.u.columns(0, rank).into_owned()
}

pub fn rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&x| x > tol).count()
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    let inv = m.clone().lu().try_inverse().ok_or_else(|| Error::Singular("matrix inverse".into()))?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("matrix inverse overflow".into()));
    }
    Ok(inv)
}

pub fn det(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// `[[0, I], [-I, 0]]` of size `2n`.
pub fn j_matrix(n: usize) -> CMatrix {
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = C1;
        j[(n + k, k)] = -C1;
    }
    j
}

/// `J conj(v)` for a vector of even length; maps `rho(w)` to `-rho(w j)`.
pub fn j_conj_vec(v: &CVector) -> CVector {
    let n = v.len() / 2;
    CVector::from_fn(2 * n, |r, _| if r < n { v[n + r].conj() } else { -v[r - n].conj() })
}

/// Project `vs` onto the orthogonal complement of the orthonormal columns of `q`.
pub fn residual_against(q: &CMatrix, vs: &CMatrix) -> CMatrix {
    if q.ncols() == 0 {
        return vs.clone();
    }
    vs - q * (q.adjoint() * vs)
}

pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let r = a.nrows().max(b.nrows());
    let mut m = CMatrix::zeros(r, a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = CMatrix::from_row_slice(1, 3, &[C1, C1, C0]);
        let ns = nullspace(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = CMatrix::from_fn(4, 3, |r, c| Complex64::new((r * 3 + c) as f64, (r as f64) - (c as f64)));
        let s = svd(&m);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let k = s.sigma.len().min(s.u.ncols());
        let sig = CMatrix::from_diagonal(&CVector::from_iterator(k, s.sigma.iter().take(k).map(|&x| Complex64::new(x, 0.0))));
        let rec = s.u.columns(0, k) * sig * s.v.columns(0, k).adjoint();
        assert!((rec - m).norm() < 1e-10);
    }
}
