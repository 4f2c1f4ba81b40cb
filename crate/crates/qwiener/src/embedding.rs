//! The complex embeddings `chi` (matrices) and `rho` (vectors), and the
//! operator norm and right-linear independence tests built on them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};

/// Default tolerance for the image-of-embedding test.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `chi(A + B j) = [[A, B], [-conj B, conj A]]`.
pub fn chi(p: &QMatrix, f: &SliceFrame) -> CMatrix {
    let (r, c) = p.shape();
    let mut m = CMatrix::zeros(2 * r, 2 * c);
    for a in 0..r {
        for b in 0..c {
            let (x, y) = f.split(p[(a, b)]);
            m[(a, b)] = x;
            m[(a, c + b)] = y;
            m[(r + a, b)] = -y.conj();
            m[(r + a, c + b)] = x.conj();
        }
    }
    m
}

/// Distance of `q` from the image of `chi`: `max |J conj(q) J^T - q|`.
pub fn symmetry_residual(q: &CMatrix) -> f64 {
    let (r2, c2) = q.shape();
    if r2 % 2 != 0 || c2 % 2 != 0 {
        return f64::INFINITY;
    }
    let (r, c) = (r2 / 2, c2 / 2);
    let mut res: f64 = 0.0;
    for a in 0..r {
        for b in 0..c {
            res = res.max((q[(r + a, c + b)] - q[(a, b)].conj()).norm());
            res = res.max((q[(r + a, b)] + q[(a, c + b)].conj()).norm());
        }
    }
    res
}

/// Inverse of [`chi`]; fails if `q` is not in the image within `tol`.
pub fn chi_inverse(q: &CMatrix, f: &SliceFrame, tol: f64) -> Result<QMatrix> {
    let scale = 1.0 + q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let residual = symmetry_residual(q);
    if residual > tol * scale {
        return Err(Error::SymmetryViolation { residual });
    }
    Ok(chi_inverse_unchecked(q, f))
}

/// Pullback that averages the two copies of each block, without checking symmetry.
pub fn chi_inverse_unchecked(q: &CMatrix, f: &SliceFrame) -> QMatrix {
    let (r, c) = (q.nrows() / 2, q.ncols() / 2);
    QMatrix::from_fn(r, c, |a, b| {
        let x = (q[(a, b)] + q[(r + a, c + b)].conj()) * 0.5;
        let y = (q[(a, c + b)] - q[(r + a, b)].conj()) * 0.5;
        f.join(x, y)
    })
}

/// `rho(u + v j) = [u; -conj v]`, so that `rho(A w) = chi(A) rho(w)`.
pub fn rho(w: &[Quaternion], f: &SliceFrame) -> CVector {
    let n = w.len();
    let mut v = CVector::zeros(2 * n);
    for (k, &q) in w.iter().enumerate() {
        let (a, b) = f.split(q);
        v[k] = a;
        v[n + k] = -b.conj();
    }
    v
}

/// Inverse of [`rho`].
pub fn rho_inverse(v: &CVector, f: &SliceFrame) -> Result<Vec<Quaternion>> {
    if v.len() % 2 != 0 {
        return Err(Error::DimensionMismatch("rho image must have even length".into()));
    }
    let n = v.len() / 2;
    Ok((0..n).map(|k| f.join(v[k], -v[n + k].conj())).collect())
}

/// Operator norm of a quaternionic matrix (largest singular value of its embedding).
pub fn operator_norm(p: &QMatrix) -> f64 {
    if p.rows() == 0 || p.cols() == 0 {
        return 0.0;
    }
    if p.shape() == (1, 1) {
        return p[(0, 0)].norm();
    }
    linalg::spectral_norm(&chi(p, &SliceFrame::default()))
}

/// Whether the vectors are linearly independent over the quaternions acting on the right.
pub fn right_independent(vectors: &[Vec<Quaternion>], f: &SliceFrame, tol: f64) -> Result<bool> {
    let Some(n) = vectors.first().map(Vec::len) else {
        return Ok(true);
    };
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("vectors of different lengths".into()));
    }
    if vectors.len() > n {
        return Ok(false);
    }
    let m = QMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
    let e = chi(&m, f);
    let s = linalg::singular_values(&e);
    let scale = s.first().copied().unwrap_or(0.0).max(1.0);
    Ok(s.len() == 2 * vectors.len() && s.last().is_some_and(|&x| x > tol * scale))
}

/// Inverse of a square quaternionic matrix, computed through its embedding.
pub fn qinverse(m: &QMatrix) -> Result<QMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    let f = SliceFrame::default();
    let inv = linalg::inverse(&chi(m, &f))?;
    Ok(chi_inverse_unchecked(&inv, &f))
}

/// `chi(q)` for a single quaternion.
pub fn chi_scalar(q: Quaternion, f: &SliceFrame) -> [[Complex64; 2]; 2] {
    let (a, b) = f.split(q);
    [[a, b], [-b.conj(), a.conj()]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn sample(r: usize, c: usize, seed: f64) -> QMatrix {
        QMatrix::from_fn(r, c, |a, b| {
            let t = seed + (a * 7 + b * 3) as f64;
            q(t.sin(), (1.3 * t).cos(), (0.7 * t).sin() * 2.0, (t * t).cos())
        })
    }

    fn frames() -> Vec<SliceFrame> {
        vec![
            SliceFrame::default(),
            SliceFrame::orthonormalized(q(0.0, 1.0, 2.0, -1.0), q(0.0, 0.3, -1.0, 0.5)).unwrap(),
        ]
    }

    #[test]
    fn chi_of_e2_in_default_frame() {
        let m = chi(&QMatrix::scalar(1, Quaternion::E2), &SliceFrame::default());
        let expect = CMatrix::from_row_slice(2, 2, &[linalg::C0, linalg::C1, -linalg::C1, linalg::C0]);
        assert!((m - expect).norm() < 1e-15);
    }

    #[test]
    fn chi_is_multiplicative_and_adjoint_compatible() {
        for f in frames() {
            let a = sample(2, 3, 0.1);
            let b = sample(3, 2, 1.7);
            let lhs = chi(&(&a * &b), &f);
            let rhs = chi(&a, &f) * chi(&b, &f);
            assert!((lhs - rhs).norm() < 1e-12);
            assert!((chi(&a.adjoint(), &f) - chi(&a, &f).adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn chi_inverse_round_trip_and_rejection() {
        for f in frames() {
            let a = sample(2, 2, 0.4);
            let back = chi_inverse(&chi(&a, &f), &f, 1e-12).unwrap();
            assert!((&back - &a).frobenius() < 1e-12);
        }
        let bad = CMatrix::from_row_slice(2, 2, &[linalg::C1, linalg::C0, linalg::C0, -linalg::C1]);
        assert!(matches!(
            chi_inverse(&bad, &SliceFrame::default(), 1e-10),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn rho_intertwines_left_action() {
        for f in frames() {
            let a = sample(3, 3, 2.2);
            let w = sample(3, 1, 0.9).column(0);
            let aw = (&a * &QMatrix::from_vec(3, 1, w.clone()).unwrap()).column(0);
            let lhs = rho(&aw, &f);
            let rhs = chi(&a, &f) * rho(&w, &f);
            assert!((lhs - rhs).norm() < 1e-12);
            let back = rho_inverse(&rho(&w, &f), &f).unwrap();
            assert!(back.iter().zip(&w).all(|(x, y)| (*x - *y).norm() < 1e-12));
        }
    }

    #[test]
    fn operator_norm_is_frame_independent() {
        let a = sample(3, 3, 5.0);
        let n0 = operator_norm(&a);
        for f in frames() {
            let nf = linalg::spectral_norm(&chi(&a, &f));
            assert!((n0 - nf).abs() < 1e-12);
        }
    }

    #[test]
    fn right_independence_examples() {
        let f = SliceFrame::default();
        let one = vec![Quaternion::ONE];
        let jj = vec![Quaternion::E2];
        assert!(!right_independent(&[one.clone(), jj], &f, 1e-10).unwrap());
        assert!(right_independent(&[one], &f, 1e-10).unwrap());
        let v1 = vec![Quaternion::ONE, Quaternion::E1];
        let v2 = vec![Quaternion::E2, Quaternion::E3];
        // v2 = v1 * e2, so the pair is dependent over H.
        assert!(!right_independent(&[v1.clone(), v2], &f, 1e-10).unwrap());
        let v3 = vec![Quaternion::ONE, -Quaternion::E1];
        assert!(right_independent(&[v1, v3], &f, 1e-10).unwrap());
    }
}
