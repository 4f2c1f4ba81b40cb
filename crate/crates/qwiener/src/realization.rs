//! Realizations `F(p) = D + C (pG - A)^{-*} B` of rational matrix functions
//! with real denominators, spectral projections of the pencil, and canonical
//! factorization `F = F_- F_+` on the unit sphere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::embedding::{chi, chi_inverse, symmetry_residual};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::rational::{qpoly_divrem, QPoly, RationalQMatrix};

/// `F(p) = D + C (pG - A)^{-*} B` with state size `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    #[serde(rename = "D")]
    pub d: QMatrix,
    #[serde(rename = "C")]
    pub c: QMatrix,
    #[serde(rename = "A")]
    pub a: QMatrix,
    #[serde(rename = "G")]
    pub g: QMatrix,
    #[serde(rename = "B")]
    pub b: QMatrix,
}

/// Complex data of the same shape, e.g. the embedding of a [`Realization`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexRealization {
    pub d: CMatrix,
    pub c: CMatrix,
    pub a: CMatrix,
    pub g: CMatrix,
    pub b: CMatrix,
}

impl Realization {
    pub fn new(d: QMatrix, c: QMatrix, a: QMatrix, g: QMatrix, b: QMatrix) -> Result<Self> {
        let n = d.rows();
        let m = a.rows();
        let ok = d.is_square()
            && a.is_square()
            && g.shape() == (m, m)
            && c.shape() == (n, m)
            && b.shape() == (m, n);
        if !ok {
            return Err(Error::DimensionMismatch("inconsistent realization blocks".into()));
        }
        Ok(Realization { d, c, a, g, b })
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// `A - B C`.
    pub fn a_cross(&self) -> QMatrix {
        &self.a - &(&self.b * &self.c)
    }

    pub fn embed(&self, frame: &SliceFrame) -> ComplexRealization {
        ComplexRealization {
            d: chi(&self.d, frame),
            c: chi(&self.c, frame),
            a: chi(&self.a, frame),
            g: chi(&self.g, frame),
            b: chi(&self.b, frame),
        }
    }

    /// `omega(F)(z)`.
    pub fn omega_at(&self, z: Complex64, frame: &SliceFrame) -> Result<CMatrix> {
        self.embed(frame).eval(z)
    }
}

impl ComplexRealization {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a_cross(&self) -> CMatrix {
        &self.a - &self.b * &self.c
    }

    /// `D + C (zG - A)^{-1} B`.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        if self.state_dim() == 0 {
            return Ok(self.d.clone());
        }
        let pencil = self.g.map(|x| x * z) - &self.a;
        let x = pencil.lu().solve(&self.b).ok_or(Error::SingularPencil)?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularPencil);
        }
        Ok(&self.d + &self.c * x)
    }
}

/// Value at an arbitrary quaternion, through the slice of `p` and the representation formula.
pub fn eval_realization(r: &Realization, p: Quaternion, frame: &SliceFrame) -> Result<QMatrix> {
    let e = r.embed(frame);
    eval_by_slices(p, frame, |z| e.eval(z))
}

/// Evaluates a left slice function from its embedded values `omega(z)` on the frame's complex slice.
pub fn eval_by_slices(p: Quaternion, frame: &SliceFrame, omega: impl Fn(Complex64) -> Result<CMatrix>) -> Result<QMatrix> {
    let at = |z: Complex64| -> Result<QMatrix> {
        let w = omega(z)?;
        let (r, c) = (w.nrows() / 2, w.ncols() / 2);
        Ok(QMatrix::from_fn(r, c, |a, b| frame.join(w[(a, b)], w[(a, c + b)])))
    };
    let v = p.imag();
    let y = v.norm();
    if y <= 1e-300 {
        return at(Complex64::new(p.w, 0.0));
    }
    let unit = v / y;
    let z = Complex64::new(p.w, y);
    let ii = frame.i();
    let lhs = (Quaternion::ONE - unit * ii) * 0.5;
    let rhs = (Quaternion::ONE + unit * ii) * 0.5;
    Ok(&at(z)?.left_scale(lhs) + &at(z.conj())?.left_scale(rhs))
}

/// Whether `F` has no poles on the unit sphere, after cancelling common factors.
pub fn pole_free_on_sphere(f: &RationalQMatrix, tol: f64) -> bool {
    f.poles(tol).iter().all(|z| (z.norm() - 1.0).abs() > tol.sqrt())
}

/// `F = K + L` with `K` strictly proper and `L` a matrix polynomial.
pub fn split_proper_polynomial(f: &RationalQMatrix) -> Result<(RationalQMatrix, QPoly)> {
    let (q, rem) = qpoly_divrem(f.num(), f.den())?;
    Ok((RationalQMatrix::new(rem, f.den().clone())?, q))
}

/// Nilpotent-shift realization `C_L (pG_L - I)^{-1} B_L = L(p)`; returns `(G_L, B_L, C_L)`.
pub fn realize_polynomial(l: &QPoly) -> Result<(QMatrix, QMatrix, QMatrix)> {
    let n = l.n();
    let q = match l.support() {
        Some((lo, _)) if lo < 0 => return Err(Error::InvalidInput("polynomial has negative powers".into())),
        Some((_, hi)) => hi as usize,
        None => 0,
    };
    let size = n * (q + 1);
    let mut g = QMatrix::zeros(size, size);
    for k in 0..q {
        g.set_block(k * n, (k + 1) * n, &QMatrix::identity(n));
    }
    let blocks: Vec<QMatrix> = (0..=q).map(|k| l.coeff_or_zero(k as i64)).collect();
    let b = QMatrix::vstack(&blocks.iter().collect::<Vec<_>>())?;
    let mut c = QMatrix::zeros(n, size);
    c.set_block(0, 0, &QMatrix::identity(n).scale(-1.0));
    Ok((g, b, c))
}

/// Observable companion realization `K(p) = D + C (pI - A)^{-1} B` of a proper `K`;
/// `D` must equal `K(inf)`.
pub fn realize_proper(k: &RationalQMatrix, d_target: &QMatrix) -> Result<Realization> {
    let n = k.n();
    if !k.is_proper() {
        return Err(Error::ImproperInput("realize_proper needs a proper function".into()));
    }
    let den = k.den();
    let deg = den.degree();
    let lead = den.leading();
    let k_inf = k.num().coeff_or_zero(deg as i64).scale(1.0 / lead);
    let scale = 1.0 + k_inf.max_abs();
    if (&k_inf - d_target).max_abs() > 1e-12 * scale {
        return Err(Error::ImproperInput("D does not match the value at infinity".into()));
    }
    if deg == 0 {
        return Realization::new(d_target.clone(), QMatrix::zeros(n, 0), QMatrix::zeros(0, 0), QMatrix::zeros(0, 0), QMatrix::zeros(0, n));
    }
    // Strictly proper remainder over the monic denominator.
    let monic = den.monic();
    let mut a = QMatrix::zeros(n * deg, n * deg);
    for i in 1..deg {
        a.set_block(i * n, (i - 1) * n, &QMatrix::identity(n));
    }
    for i in 0..deg {
        a.set_block(i * n, (deg - 1) * n, &QMatrix::identity(n).scale(-monic.coeffs()[i]));
    }
    let blocks: Vec<QMatrix> = (0..deg)
        .map(|d| {
            let nd = k.num().coeff_or_zero(d as i64).scale(1.0 / lead);
            &nd - &k_inf.scale(monic.coeffs()[d])
        })
        .collect();
    let b = QMatrix::vstack(&blocks.iter().collect::<Vec<_>>())?;
    let mut c = QMatrix::zeros(n, n * deg);
    c.set_block(0, (deg - 1) * n, &QMatrix::identity(n));
    Realization::new(d_target.clone(), c, a, QMatrix::identity(n * deg), b)
}

/// Realization of `F` with the prescribed constant `D`.
pub fn assemble_realization(f: &RationalQMatrix, d_target: &QMatrix) -> Result<Realization> {
    let n = f.n();
    if d_target.shape() != (n, n) {
        return Err(Error::DimensionMismatch("D must be n x n".into()));
    }
    let (k, l) = split_proper_polynomial(f)?;
    let rk = realize_proper(&k, &QMatrix::zeros(n, n))?;
    let l = l.sub(&QPoly::constant(d_target.clone())?)?.pruned(0.0);
    if l.support().is_none() {
        return Ok(Realization { d: d_target.clone(), ..rk });
    }
    let (gl, bl, cl) = realize_polynomial(&l)?;
    let ml = gl.rows();
    let a = QMatrix::block_diag(&[&rk.a, &QMatrix::identity(ml)]);
    let g = QMatrix::block_diag(&[&rk.g, &gl]);
    let b = QMatrix::vstack(&[&rk.b, &bl])?;
    let c = QMatrix::hstack(&[&rk.c, &cl])?;
    Realization::new(d_target.clone(), c, a, g, b)
}

/// Default number of quadrature nodes on the circle.
pub const QUADRATURE_POINTS: usize = 256;
const QUADRATURE_CAP: usize = 1 << 16;
const QUADRATURE_TOL: f64 = 1e-10;

/// Spectral projections of the pencils `zG - A` and `zG - A^x` for the unit circle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionData {
    #[serde(rename = "Q")]
    pub q: QMatrix,
    #[serde(rename = "P")]
    pub p: QMatrix,
    #[serde(rename = "Qx")]
    pub qx: QMatrix,
    #[serde(rename = "Px")]
    pub px: QMatrix,
    pub tau: Option<QMatrix>,
    pub sigma: Option<QMatrix>,
    pub quadrature_points: usize,
    pub symmetry_residual: f64,
}

/// Complex counterpart of [`ProjectionData`].
#[derive(Clone, Debug)]
pub struct ComplexProjections {
    pub q: CMatrix,
    pub p: CMatrix,
    pub qx: CMatrix,
    pub px: CMatrix,
    pub quadrature_points: usize,
}

impl ComplexProjections {
    /// Largest `||X^2 - X||` over the four projections.
    pub fn idempotency_defect(&self) -> f64 {
        [&self.q, &self.p, &self.qx, &self.px]
            .iter()
            .map(|x| linalg::spectral_norm(&((*x) * (*x) - *x)))
            .fold(0.0, f64::max)
    }
}

fn circle_node(k: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64)
}

/// Trapezoid sums of `z (zG - A)^{-1} G` and `z G (zG - A)^{-1}`.
fn projection_pair(g: &CMatrix, a: &CMatrix, m: usize) -> Result<(CMatrix, CMatrix)> {
    let s = a.nrows();
    let mut q = CMatrix::zeros(s, s);
    let mut p = CMatrix::zeros(s, s);
    for k in 0..m {
        let z = circle_node(k, m);
        let inv = linalg::inverse(&(g.map(|x| x * z) - a)).map_err(|_| Error::PoleOnCircle)?;
        q += (&inv * g) * z;
        p += (g * &inv) * z;
    }
    let w = Complex64::new(1.0 / m as f64, 0.0);
    Ok((q * w, p * w))
}

/// Smallest singular value of `zG - A` over `m` circle nodes.
pub fn pencil_margin(g: &CMatrix, a: &CMatrix, m: usize) -> f64 {
    (0..m)
        .map(|k| linalg::min_singular_value(&(g.map(|x| x * circle_node(k, m)) - a)))
        .fold(f64::INFINITY, f64::min)
}

/// Riesz projections of the embedded pencils, refined by doubling the node count.
pub fn complex_projections(r: &ComplexRealization, m0: usize) -> Result<ComplexProjections> {
    let ax = r.a_cross();
    let mut m = m0.max(4);
    let (mut q, mut p) = projection_pair(&r.g, &r.a, m)?;
    let (mut qx, mut px) = projection_pair(&r.g, &ax, m)?;
    loop {
        let m2 = 2 * m;
        let (q2, p2) = projection_pair(&r.g, &r.a, m2)?;
        let (qx2, px2) = projection_pair(&r.g, &ax, m2)?;
        let change = [(&q, &q2), (&p, &p2), (&qx, &qx2), (&px, &px2)]
            .iter()
            .map(|(x, y)| (*x - *y).norm())
            .fold(0.0, f64::max);
        let scale = 1.0 + q2.norm().max(qx2.norm());
        (q, p, qx, px, m) = (q2, p2, qx2, px2, m2);
        if change <= QUADRATURE_TOL * scale {
            return Ok(ComplexProjections { q, p, qx, px, quadrature_points: m });
        }
        if m >= QUADRATURE_CAP {
            return Err(Error::PoleOnCircle);
        }
    }
}

fn pull_back(x: &CMatrix, frame: &SliceFrame, worst: &mut f64) -> Result<QMatrix> {
    *worst = worst.max(symmetry_residual(x));
    chi_inverse(x, frame, 1e-8)
}

/// Spectral projections of a realization, computed in the embedding and pulled back.
pub fn riesz_projections(r: &Realization, frame: &SliceFrame, m0: usize) -> Result<ProjectionData> {
    let cp = complex_projections(&r.embed(frame), m0)?;
    let mut res = 0.0;
    Ok(ProjectionData {
        q: pull_back(&cp.q, frame, &mut res)?,
        p: pull_back(&cp.p, frame, &mut res)?,
        qx: pull_back(&cp.qx, frame, &mut res)?,
        px: pull_back(&cp.px, frame, &mut res)?,
        tau: None,
        sigma: None,
        quadrature_points: cp.quadrature_points,
        symmetry_residual: res,
    })
}

/// Projection onto `Ker(kernel_of)` along `Im(image)` and the smallest singular value of the
/// stacked orthonormal bases; the projection is `None` when the spaces are not complementary.
fn oblique_projection(image: &CMatrix, kernel_of: &CMatrix, rank_tol: f64) -> (f64, Option<CMatrix>) {
    let s = image.nrows();
    let u = linalg::orth(image, rank_tol * (1.0 + linalg::spectral_norm(image)));
    let v = linalg::nullspace(kernel_of, rank_tol * (1.0 + linalg::spectral_norm(kernel_of)));
    if u.ncols() + v.ncols() != s {
        return (0.0, None);
    }
    let stacked = linalg::hstack(&u, &v);
    let defect = linalg::min_singular_value(&stacked);
    let Ok(inv) = linalg::inverse(&stacked) else {
        return (defect, None);
    };
    let mut keep = CMatrix::zeros(s, s);
    keep.view_mut((0, u.ncols()), (s, v.ncols())).copy_from(&v);
    (defect, Some(keep * inv))
}

/// Defects of the two direct sums `Im Q + Ker Q^x` and `Im P + Ker P^x`; zero when the dimensions do not add up.
pub fn direct_sum_defects(r: &ComplexRealization, opts: &CanonicalOptions) -> Result<(f64, f64)> {
    let cp = complex_projections(r, opts.quadrature_points)?;
    Ok((oblique_projection(&cp.q, &cp.qx, opts.rank_tol).0, oblique_projection(&cp.p, &cp.px, opts.rank_tol).0))
}

/// Complex canonical factorization data.
#[derive(Clone, Debug)]
pub struct ComplexCanonical {
    pub f_minus: ComplexRealization,
    pub f_plus: ComplexRealization,
    pub f_minus_inv: ComplexRealization,
    pub f_plus_inv: ComplexRealization,
    pub projections: ComplexProjections,
    pub tau: CMatrix,
    pub sigma: CMatrix,
    /// Smallest singular value of `[basis Im Q | basis Ker Q^x]`, and likewise for `P`.
    pub defect_q: f64,
    pub defect_p: f64,
}

/// Options for canonical factorization.
#[derive(Clone, Copy, Debug)]
pub struct CanonicalOptions {
    /// Threshold for the pencil margin and the direct-sum defect.
    pub tol: f64,
    pub quadrature_points: usize,
    pub rank_tol: f64,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions { tol: 1e-8, quadrature_points: QUADRATURE_POINTS, rank_tol: 1e-9 }
    }
}

/// Canonical factorization of complex realization data with `D = I`.
pub fn canonical_factorize_complex(r: &ComplexRealization, opts: &CanonicalOptions) -> Result<ComplexCanonical> {
    let nn = r.d.nrows();
    if (&r.d - CMatrix::identity(nn, nn)).norm() > 1e-12 {
        return Err(Error::InvalidInput("canonical factorization needs D = I".into()));
    }
    let ax = r.a_cross();
    let scale = 1.0 + linalg::spectral_norm(&r.g).max(linalg::spectral_norm(&r.a));
    let margin_a = pencil_margin(&r.g, &r.a, opts.quadrature_points);
    if margin_a <= opts.tol * scale {
        return Err(Error::PoleOnCircle);
    }
    let scale_x = 1.0 + linalg::spectral_norm(&r.g).max(linalg::spectral_norm(&ax));
    let margin_x = pencil_margin(&r.g, &ax, opts.quadrature_points);
    if margin_x <= opts.tol * scale_x {
        return Err(Error::ObstructionConditionI { min_modulus: margin_x });
    }
    let cp = complex_projections(r, opts.quadrature_points)?;
    let (defect_q, tau) = oblique_projection(&cp.q, &cp.qx, opts.rank_tol);
    let (defect_p, sigma) = oblique_projection(&cp.p, &cp.px, opts.rank_tol);
    let (tau, sigma) = match (tau, sigma) {
        (Some(t), Some(s)) if defect_q > opts.tol && defect_p > opts.tol => (t, s),
        _ => return Err(Error::ObstructionConditionII { defect: defect_q.min(defect_p) }),
    };
    let m = r.state_dim();
    let id = CMatrix::identity(m, m);
    let eye = CMatrix::identity(nn, nn);
    let f_plus = ComplexRealization { d: eye.clone(), c: &r.c * &tau, a: r.a.clone(), g: r.g.clone(), b: r.b.clone() };
    let f_minus = ComplexRealization { d: eye.clone(), c: r.c.clone(), a: r.a.clone(), g: r.g.clone(), b: (&id - &sigma) * &r.b };
    let f_plus_inv = ComplexRealization { d: eye.clone(), c: -&r.c, a: ax.clone(), g: r.g.clone(), b: &sigma * &r.b };
    let f_minus_inv = ComplexRealization { d: eye, c: -(&r.c * (&id - &tau)), a: ax, g: r.g.clone(), b: r.b.clone() };
    Ok(ComplexCanonical { f_minus, f_plus, f_minus_inv, f_plus_inv, projections: cp, tau, sigma, defect_q, defect_p })
}

/// Canonical factorization `F = F_- F_+` of a realization with `D = I`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanonicalFactorization {
    pub schema_version: u32,
    pub f_minus: Realization,
    pub f_plus: Realization,
    pub f_minus_inv: Realization,
    pub f_plus_inv: Realization,
    pub projections: ProjectionData,
    pub defect_q: f64,
    pub defect_p: f64,
    /// Sup over the circle grid of `||omega(F - F_- F_+)||`.
    pub residual: f64,
    /// Sup over the circle grid of `||omega(F_+ F_+^{-1} - I)||` and the same for `F_-`.
    pub inverse_residual: f64,
}

fn pull_back_realization(r: &ComplexRealization, frame: &SliceFrame, worst: &mut f64) -> Result<Realization> {
    Realization::new(
        pull_back(&r.d, frame, worst)?,
        pull_back(&r.c, frame, worst)?,
        pull_back(&r.a, frame, worst)?,
        pull_back(&r.g, frame, worst)?,
        pull_back(&r.b, frame, worst)?,
    )
}

/// Sup over `grid` circle points of `||omega(F) - omega(F_-) omega(F_+)||`, and of the inverse defects.
pub fn canonical_residuals(f: &ComplexRealization, c: &ComplexCanonical, grid: usize) -> Result<(f64, f64)> {
    let n = f.d.nrows();
    let eye = CMatrix::identity(n, n);
    let mut res: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for k in 0..grid {
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * (k as f64 + 0.5) / grid as f64);
        let fm = c.f_minus.eval(z)?;
        let fp = c.f_plus.eval(z)?;
        res = res.max(linalg::spectral_norm(&(f.eval(z)? - &fm * &fp)));
        inv = inv.max(linalg::spectral_norm(&(&fp * c.f_plus_inv.eval(z)? - &eye)));
        inv = inv.max(linalg::spectral_norm(&(&fm * c.f_minus_inv.eval(z)? - &eye)));
    }
    Ok((res, inv))
}

/// Canonical factorization of a quaternionic realization with `D = I`.
pub fn canonical_factorize(r: &Realization, frame: &SliceFrame, opts: &CanonicalOptions) -> Result<CanonicalFactorization> {
    if (&r.d - &QMatrix::identity(r.n())).max_abs() > 1e-12 {
        return Err(Error::InvalidInput("canonical factorization needs D = I".into()));
    }
    let e = r.embed(frame);
    let cc = canonical_factorize_complex(&e, opts)?;
    let (residual, inverse_residual) = canonical_residuals(&e, &cc, 512)?;
    let mut worst = 0.0;
    let projections = ProjectionData {
        q: pull_back(&cc.projections.q, frame, &mut worst)?,
        p: pull_back(&cc.projections.p, frame, &mut worst)?,
        qx: pull_back(&cc.projections.qx, frame, &mut worst)?,
        px: pull_back(&cc.projections.px, frame, &mut worst)?,
        tau: Some(pull_back(&cc.tau, frame, &mut worst)?),
        sigma: Some(pull_back(&cc.sigma, frame, &mut worst)?),
        quadrature_points: cc.projections.quadrature_points,
        symmetry_residual: 0.0,
    };
    let f_minus = pull_back_realization(&cc.f_minus, frame, &mut worst)?;
    let f_plus = pull_back_realization(&cc.f_plus, frame, &mut worst)?;
    let f_minus_inv = pull_back_realization(&cc.f_minus_inv, frame, &mut worst)?;
    let f_plus_inv = pull_back_realization(&cc.f_plus_inv, frame, &mut worst)?;
    Ok(CanonicalFactorization {
        schema_version: 1,
        f_minus,
        f_plus,
        f_minus_inv,
        f_plus_inv,
        projections: ProjectionData { symmetry_residual: worst, ..projections },
        defect_q: cc.defect_q,
        defect_p: cc.defect_p,
        residual,
        inverse_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qpoly_mul_real, RealPoly};
    use crate::series::LaurentQSeries;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn sample(n: usize, seed: f64) -> QMatrix {
        QMatrix::from_fn(n, n, |a, b| {
            let t = seed + (a * 5 + b * 3) as f64;
            q((1.1 * t).sin(), (0.7 * t).cos(), (1.9 * t).sin(), (t * 0.3).cos())
        })
    }

    /// `F_- F_+` with `F_+ = I + p N` (`N` strictly upper) and `F_- = I + p^{-1} L` (`L` strictly lower).
    fn planted_canonical(n: usize, seed: f64) -> (RationalQMatrix, LaurentQSeries, LaurentQSeries) {
        let s = sample(n, seed);
        let upper = QMatrix::from_fn(n, n, |a, b| if b > a { s[(a, b)] } else { Quaternion::ZERO });
        let lower = QMatrix::from_fn(n, n, |a, b| if b < a { s[(a, b)] * 0.5 } else { Quaternion::ZERO });
        let fp = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (1, upper)]).unwrap();
        let fm = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (-1, lower)]).unwrap();
        let prod = fm.star_mul(&fp).unwrap().shift(1);
        (RationalQMatrix::new(prod, RealPoly::new(vec![0.0, 1.0])).unwrap(), fm, fp)
    }

    #[test]
    fn pole_free_examples() {
        let id = QPoly::identity(2);
        assert!(pole_free_on_sphere(&RationalQMatrix::new(id.clone(), RealPoly::new(vec![4.0, 0.0, 1.0])).unwrap(), 1e-10));
        assert!(!pole_free_on_sphere(&RationalQMatrix::new(id, RealPoly::new(vec![1.0, 0.0, 1.0])).unwrap(), 1e-10));
        let r = RealPoly::new(vec![1.0, 0.0, 1.0]);
        let m = QPoly::constant(sample(2, 0.3)).unwrap();
        assert!(pole_free_on_sphere(&RationalQMatrix::new(qpoly_mul_real(&m, &r), r).unwrap(), 1e-10));
    }

    #[test]
    fn split_one_step_division() {
        let c = q(0.5, 1.0, -1.0, 2.0);
        let f = RationalQMatrix::new(QPoly::scalar(&[(0, c), (2, Quaternion::ONE)]), RealPoly::new(vec![4.0, 0.0, 1.0])).unwrap();
        let (k, l) = split_proper_polynomial(&f).unwrap();
        assert!((l.coeff_or_zero(0)[(0, 0)] - Quaternion::ONE).norm() < 1e-15);
        assert_eq!(l.support(), Some((0, 0)));
        assert!((k.num().coeff_or_zero(0)[(0, 0)] - (c - Quaternion::real(4.0))).norm() < 1e-15);
        assert_eq!(k.num_degree(), 0);
    }

    #[test]
    fn polynomial_fragment() {
        let m = sample(2, 1.0);
        let l = LaurentQSeries::monomial(1, m.clone()).unwrap();
        let (g, b, c) = realize_polynomial(&l).unwrap();
        let r = Realization::new(QMatrix::zeros(2, 2), c, QMatrix::identity(4), g.clone(), b).unwrap();
        let v = eval_realization(&r, Quaternion::real(2.0), &SliceFrame::default()).unwrap();
        assert!((&v - &m.scale(2.0)).max_abs() < 1e-13);
        for deg in 0..=4 {
            let l = LaurentQSeries::monomial(deg, sample(2, deg as f64)).unwrap();
            let (g, _, _) = realize_polynomial(&l).unwrap();
            let mut pow = QMatrix::identity(g.rows());
            for _ in 0..=deg {
                pow = &pow * &g;
            }
            assert_eq!(pow.max_abs(), 0.0);
        }
    }

    #[test]
    fn one_state_proper_realization() {
        let c = q(0.0, 1.0, 2.0, -0.5);
        let k = RationalQMatrix::new(QPoly::scalar(&[(0, c)]), RealPoly::linear(2.0)).unwrap();
        let r = realize_proper(&k, &QMatrix::zeros(1, 1)).unwrap();
        assert_eq!(r.state_dim(), 1);
        let v = eval_realization(&r, Quaternion::real(3.0), &SliceFrame::default()).unwrap();
        assert!((v[(0, 0)] - c).norm() < 1e-14);
    }

    #[test]
    fn assembled_realization_reproduces_the_function() {
        let frames = [SliceFrame::default(), SliceFrame::orthonormalized(q(0.0, 1.0, 1.0, 0.0), q(0.0, 0.0, 1.0, 2.0)).unwrap()];
        let num = LaurentQSeries::from_terms(2, (0..4).map(|d| (d, sample(2, d as f64 * 0.7)))).unwrap();
        let den = RealPoly::new(vec![2.0, -1.0, 0.5]);
        let f = RationalQMatrix::new(num, den).unwrap();
        let dt = sample(2, 9.0);
        let r = assemble_realization(&f, &dt).unwrap();
        assert_eq!(r.d, dt);
        for frame in &frames {
            for k in 0..10 {
                let t = k as f64;
                let p = q(0.3 * t.sin() + 0.1, t.cos(), 0.5 * (2.0 * t).sin(), -0.4);
                let a = eval_realization(&r, p, frame).unwrap();
                let b = f.evaluate(p).unwrap();
                assert!((&a - &b).max_abs() < 1e-9 * (1.0 + b.max_abs()));
            }
        }
        // Constant function with a different D.
        let m = sample(2, 4.0);
        let g = RationalQMatrix::polynomial(QPoly::constant(m.clone()).unwrap()).unwrap();
        let r = assemble_realization(&g, &QMatrix::identity(2)).unwrap();
        let v = eval_realization(&r, q(0.1, 0.2, 0.3, 0.4), &SliceFrame::default()).unwrap();
        assert!((&v - &m).max_abs() < 1e-13);
    }

    #[test]
    fn slice_consistency_under_conjugation() {
        let num = LaurentQSeries::from_terms(1, (0..3).map(|d| (d, sample(1, d as f64)))).unwrap();
        let f = RationalQMatrix::new(num, RealPoly::new(vec![3.0, 0.0, 1.0])).unwrap();
        let r = assemble_realization(&f, &QMatrix::zeros(1, 1)).unwrap();
        let frame = SliceFrame::default();
        let p = q(0.2, 0.5, -0.3, 0.1);
        let h = q(1.0, -2.0, 0.5, 0.3);
        let pc = h.inv().unwrap() * p * h;
        let a = eval_realization(&r, pc, &frame).unwrap();
        let b = f.evaluate(pc).unwrap();
        assert!((&a - &b).max_abs() < 1e-12);
    }

    #[test]
    fn projections_of_simple_pencils() {
        let frame = SliceFrame::default();
        let n = 2;
        let mk = |a: QMatrix| Realization::new(QMatrix::identity(n), QMatrix::zeros(n, n), a, QMatrix::identity(n), QMatrix::zeros(n, n)).unwrap();
        let p0 = riesz_projections(&mk(QMatrix::zeros(n, n)), &frame, 64).unwrap();
        assert!((&p0.q - &QMatrix::identity(n)).max_abs() < 1e-12);
        let p2 = riesz_projections(&mk(QMatrix::identity(n).scale(2.0)), &frame, 64).unwrap();
        assert!(p2.q.max_abs() < 1e-12);
        assert!(p2.p.max_abs() < 1e-12);
    }

    #[test]
    fn planted_canonical_factorization_is_recovered() {
        let frame = SliceFrame::default();
        for (n, seed) in [(1, 0.2), (2, 0.7), (3, 1.3)] {
            let (f, fm, fp) = planted_canonical(n, seed);
            let r = assemble_realization(&f, &QMatrix::identity(n)).unwrap();
            let c = canonical_factorize(&r, &frame, &CanonicalOptions::default()).unwrap();
            assert!(c.residual < 1e-8, "residual {}", c.residual);
            assert!(c.inverse_residual < 1e-8, "inverse residual {}", c.inverse_residual);
            // Recovered and planted factors differ by a constant: F_+^rec (F_+^pl)^{-1} is constant.
            let ratio = |z: Complex64| -> CMatrix {
                let pl = fp.omega(&frame).eval(z);
                c.f_plus.omega_at(z, &frame).unwrap() * linalg::inverse(&pl).unwrap()
            };
            let r0 = ratio(Complex64::new(0.3, 0.1));
            for z in [Complex64::new(-0.5, 0.2), Complex64::new(0.0, 0.9), Complex64::new(2.0, -1.0)] {
                assert!((ratio(z) - &r0).norm() < 1e-8);
            }
            let ratio_m = |z: Complex64| -> CMatrix {
                let pl = fm.omega(&frame).eval(z);
                linalg::inverse(&pl).unwrap() * c.f_minus.omega_at(z, &frame).unwrap()
            };
            let m0 = ratio_m(Complex64::new(1.5, 0.1));
            assert!((ratio_m(Complex64::new(-0.8, 2.0)) - m0).norm() < 1e-8);
        }
    }

    #[test]
    fn nonzero_indices_obstruct_canonical_form() {
        // diag(p, p^{-1}) = diag(p^2, 1) / p.
        let num = LaurentQSeries::from_terms(
            2,
            [
                (0, QMatrix::from_fn(2, 2, |a, b| if a == 1 && b == 1 { Quaternion::ONE } else { Quaternion::ZERO })),
                (2, QMatrix::from_fn(2, 2, |a, b| if a == 0 && b == 0 { Quaternion::ONE } else { Quaternion::ZERO })),
            ],
        )
        .unwrap();
        let f = RationalQMatrix::new(num, RealPoly::new(vec![0.0, 1.0])).unwrap();
        let r = assemble_realization(&f, &QMatrix::identity(2)).unwrap();
        let err = canonical_factorize(&r, &SliceFrame::default(), &CanonicalOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ObstructionConditionII { .. }), "{err:?}");
    }
}
