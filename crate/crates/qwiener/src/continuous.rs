//! Factorization of rational symbols on the imaginary line, reduced to the
//! circle by the Cayley variable `w = (p + 1)/(p - 1)`.
//!
//! Under this change of variable the line maps onto the unit circle with
//! `t -> -inf .. inf` running counterclockwise, the left half-plane onto the
//! disc, and `((p + 1)/(p - 1))^k` onto `w^k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle;
use crate::error::{Error, Result};
use crate::factorization::{factor_discrete, FactorOptions, FactorizationResult};
use crate::linalg::{self, CMatrix};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::rational::{cayley_poly, cayley_real, split_by_circle, RationalQMatrix, RealPoly};
use crate::series::LaurentQSeries;

/// Tolerance for cancelling common denominator factors and locating poles.
pub const POLE_TOL: f64 = 1e-9;

/// `w = (p + 1)/(p - 1)`; the map is its own inverse.
pub fn cayley_point(p: Quaternion) -> Result<Quaternion> {
    Ok((p + Quaternion::ONE) * (p - Quaternion::ONE).inv()?)
}

pub fn cayley_point_c(p: Complex64) -> Complex64 {
    (p + 1.0) / (p - 1.0)
}

/// A symbol written in the Cayley variable as `N(w) / r(w)`.
#[derive(Clone, Debug)]
pub struct DiscForm {
    pub num: LaurentQSeries,
    pub den: RealPoly,
}

impl DiscForm {
    pub fn omega_at(&self, w: Complex64, frame: &SliceFrame) -> CMatrix {
        self.num.omega(frame).eval(w) / self.den.eval_c(w)
    }
}

/// Rewrites a proper rational symbol in the Cayley variable.
pub fn disc_form(f: &RationalQMatrix) -> Result<DiscForm> {
    if !f.is_proper() {
        return Err(Error::ImproperInput("symbol must have a finite limit at infinity".into()));
    }
    let f = f.reduced(POLE_TOL);
    let d = f.den().degree();
    Ok(DiscForm { num: cayley_poly(f.num(), d), den: cayley_real(f.den(), d) })
}

/// A factor `S(w) a(w) / b(w)` with a Laurent series `S` in the Cayley variable and real scalar `a`, `b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CayleyFactor {
    pub series: LaurentQSeries,
    pub scalar_num: Vec<f64>,
    pub scalar_den: Vec<f64>,
}

impl CayleyFactor {
    fn new(series: LaurentQSeries, a: RealPoly, b: RealPoly) -> Self {
        CayleyFactor { series, scalar_num: a.coeffs().to_vec(), scalar_den: b.coeffs().to_vec() }
    }

    fn scalar(&self, w: Complex64) -> Complex64 {
        RealPoly::new(self.scalar_num.clone()).eval_c(w) / RealPoly::new(self.scalar_den.clone()).eval_c(w)
    }

    /// `omega` of the factor at the Cayley variable `w`.
    pub fn omega_at_w(&self, w: Complex64, frame: &SliceFrame) -> CMatrix {
        self.series.omega(frame).eval(w) * self.scalar(w)
    }

    /// Value at a quaternion `p` off the poles.
    pub fn evaluate(&self, p: Quaternion) -> Result<QMatrix> {
        let w = cayley_point(p)?;
        let a = RealPoly::new(self.scalar_num.clone()).eval_q(w);
        let b = RealPoly::new(self.scalar_den.clone()).eval_q(w);
        Ok(self.series.evaluate(w)?.left_scale(b.inv()? * a))
    }

    /// The factor as a rational function of `p`; requires a finite series.
    pub fn to_rational(&self) -> Result<RationalQMatrix> {
        let n = self.series.n();
        let Some((lo, hi)) = self.series.support() else {
            return RationalQMatrix::new(LaurentQSeries::zero(n), RealPoly::one());
        };
        let poly = self.series.shift(-lo);
        let mut a = RealPoly::new(self.scalar_num.clone());
        let mut b = RealPoly::new(self.scalar_den.clone());
        let wpow = RealPoly::new([vec![0.0; lo.unsigned_abs() as usize], vec![1.0]].concat());
        if lo >= 0 {
            a = a.mul(&wpow);
        } else {
            b = b.mul(&wpow);
        }
        let dp = (hi - lo) as usize;
        let (da, db) = (a.degree(), b.degree());
        let num_hat = crate::rational::qpoly_mul_real(&cayley_poly(&poly, dp), &cayley_real(&a, da));
        let mut den_hat = cayley_real(&b, db);
        let e = db as i64 - dp as i64 - da as i64;
        let pm1 = RealPoly::new(vec![-1.0, 1.0]);
        let num_hat = if e >= 0 { crate::rational::qpoly_mul_real(&num_hat, &pm1.powi(e as usize)) } else { num_hat };
        if e < 0 {
            den_hat = den_hat.mul(&pm1.powi((-e) as usize));
        }
        RationalQMatrix::new(num_hat, den_hat)
    }
}

/// Factorization `F = F_- D F_+` on the line with `D = diag(((p + 1)/(p - 1))^{k_m})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuousFactorization {
    pub schema_version: u32,
    pub indices: Vec<i64>,
    pub f_minus: CayleyFactor,
    pub f_plus: CayleyFactor,
    pub f_minus_inv: CayleyFactor,
    pub f_plus_inv: CayleyFactor,
    /// Factorization of the cleared numerator in the Cayley variable.
    pub numerator: FactorizationResult,
    /// Sup over the line (sampled through the circle) of `||omega(F - F_- D F_+)||`.
    pub residual: f64,
}

impl ContinuousFactorization {
    /// `omega(F_- D F_+)` at the Cayley variable `w`.
    pub fn product_omega_at_w(&self, w: Complex64, frame: &SliceFrame) -> CMatrix {
        let n = self.indices.len();
        let mut d = CMatrix::zeros(2 * n, 2 * n);
        for (m, &k) in self.indices.iter().enumerate() {
            d[(m, m)] = w.powi(k as i32);
            d[(n + m, n + m)] = w.powi(k as i32);
        }
        self.f_minus.omega_at_w(w, frame) * d * self.f_plus.omega_at_w(w, frame)
    }
}

fn circle_points(n: usize) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |k| Complex64::from_polar(1.0, std::f64::consts::TAU * (k as f64 + 0.5) / n as f64))
}

/// Factorization of a proper rational symbol with no poles on the imaginary line.
pub fn factor_continuous(f: &RationalQMatrix, frame: &SliceFrame, opts: &FactorOptions) -> Result<ContinuousFactorization> {
    let disc = disc_form(f)?;
    let (r_in, r_out) = split_by_circle(&disc.den, POLE_TOL).ok_or(Error::PoleOnBoundary)?;
    let d_in = r_in.degree();
    let numerator = factor_discrete(&disc.num, frame, opts)?;
    let wpow = RealPoly::new([vec![0.0; d_in], vec![1.0]].concat());
    let indices: Vec<i64> = numerator.indices.iter().map(|k| k - d_in as i64).collect();
    let out = ContinuousFactorization {
        schema_version: 1,
        indices,
        f_minus: CayleyFactor::new(numerator.f_minus.clone(), wpow.clone(), r_in.clone()),
        f_plus: CayleyFactor::new(numerator.f_plus.clone(), RealPoly::one(), r_out.clone()),
        f_minus_inv: CayleyFactor::new(numerator.f_minus_inv.clone(), r_in, wpow),
        f_plus_inv: CayleyFactor::new(numerator.f_plus_inv.clone(), r_out, RealPoly::one()),
        numerator,
        residual: f64::NAN,
    };
    let residual = circle_points(opts.grid)
        .map(|w| linalg::spectral_norm(&(disc.omega_at(w, frame) - out.product_omega_at_w(w, frame))))
        .fold(0.0, f64::max);
    Ok(ContinuousFactorization { residual, ..out })
}

/// Index of a rational symbol on the line: half the argument increment of `det omega(F)`.
pub fn continuous_index(f: &RationalQMatrix, frame: &SliceFrame) -> Result<i64> {
    let disc = disc_form(f)?;
    if split_by_circle(&disc.den, POLE_TOL).is_none() {
        return Err(Error::PoleOnBoundary);
    }
    let n = f.n();
    let width = disc.num.width().max(disc.den.degree() as i64);
    let mut grid = circle::default_grid(width, 64);
    let scale = circle_points(64).map(|w| linalg::spectral_norm(&disc.omega_at(w, frame))).fold(0.0, f64::max).max(1e-300);
    loop {
        let values: Vec<Complex64> = circle_points(grid).map(|w| linalg::det(&disc.omega_at(w, frame))).collect();
        let min = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if min <= 1e-12 * scale.powi(2 * n as i32) {
            return Err(Error::NotInvertible { min_modulus: min });
        }
        if let Some(w) = circle::winding_of_samples(&values) {
            if w % 2 != 0 {
                return Err(Error::InternalInvariantViolation(format!("odd winding {w} of an embedded determinant")));
            }
            return Ok(w / 2);
        }
        if grid >= circle::GRID_CAP {
            return Err(Error::GridTooCoarse { grid });
        }
        grid *= 2;
    }
}

/// `omega(F)` at a point of the line, `p = i t` in the frame's slice.
pub fn omega_on_line(f: &RationalQMatrix, t: f64, frame: &SliceFrame) -> Result<CMatrix> {
    f.omega_at(Complex64::new(0.0, t), frame)
}
