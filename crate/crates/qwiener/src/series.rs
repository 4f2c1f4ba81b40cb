//! Laurent series with quaternionic matrix coefficients and the star-product.
//!
//! A series `F(p) = sum_u p^u F_u` carries its coefficients on the right of
//! the powers. The star-product convolves coefficients, and `omega` maps a
//! series to the complex Laurent series `sum_u z^u chi(F_u)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::embedding::{self, chi, chi_inverse};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};

/// Finitely supported Laurent series with `n x n` quaternionic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentQSeries {
    n: usize,
    coeffs: BTreeMap<i64, QMatrix>,
}

impl LaurentQSeries {
    pub fn zero(n: usize) -> Self {
        LaurentQSeries { n, coeffs: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::monomial(0, QMatrix::identity(n)).expect("identity is square")
    }

    pub fn constant(c: QMatrix) -> Result<Self> {
        Self::monomial(0, c)
    }

    /// `p^power c`.
    pub fn monomial(power: i64, c: QMatrix) -> Result<Self> {
        let mut s = Self::zero(c.rows());
        s.add_term(power, c)?;
        Ok(s)
    }

    /// Scalar series from `(power, quaternion)` pairs.
    pub fn scalar(terms: &[(i64, Quaternion)]) -> Self {
        let mut s = Self::zero(1);
        for &(u, q) in terms {
            s.add_term(u, QMatrix::scalar(1, q)).expect("1x1 terms");
        }
        s
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (i64, QMatrix)>) -> Result<Self> {
        let mut s = Self::zero(n);
        for (u, c) in terms {
            s.add_term(u, c)?;
        }
        Ok(s)
    }

    /// Adds `p^power c` to the series.
    pub fn add_term(&mut self, power: i64, c: QMatrix) -> Result<()> {
        if c.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient of shape {:?} in a series of size {}",
                c.shape(),
                self.n
            )));
        }
        match self.coeffs.get_mut(&power) {
            Some(existing) => *existing = &*existing + &c,
            None => {
                self.coeffs.insert(power, c);
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_scalar(&self) -> bool {
        self.n == 1
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &QMatrix)> {
        self.coeffs.iter().map(|(&u, c)| (u, c))
    }

    pub fn coeff(&self, power: i64) -> Option<&QMatrix> {
        self.coeffs.get(&power)
    }

    pub fn coeff_or_zero(&self, power: i64) -> QMatrix {
        self.coeffs.get(&power).cloned().unwrap_or_else(|| QMatrix::zeros(self.n, self.n))
    }

    /// Smallest and largest power with a stored coefficient.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.coeffs.keys().next()?, *self.coeffs.keys().next_back()?))
    }

    pub fn width(&self) -> i64 {
        self.support().map_or(0, |(a, b)| b - a)
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Wiener norm `sum_u ||F_u||`.
    pub fn norm(&self) -> f64 {
        self.coeffs.values().map(embedding::operator_norm).sum()
    }

    pub fn star_mul(&self, other: &LaurentQSeries) -> Result<LaurentQSeries> {
        self.check_size(other)?;
        let mut out = Self::zero(self.n);
        for (&u, a) in &self.coeffs {
            for (&v, b) in &other.coeffs {
                out.add_term(u + v, a * b)?;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &LaurentQSeries) -> Result<LaurentQSeries> {
        self.check_size(other)?;
        let mut out = self.clone();
        for (&u, c) in &other.coeffs {
            out.add_term(u, c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &LaurentQSeries) -> Result<LaurentQSeries> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> LaurentQSeries {
        self.map_coeffs(|c| c.scale(s))
    }

    /// Multiplies every coefficient on the left by a constant matrix.
    pub fn left_mul_const(&self, c: &QMatrix) -> Result<LaurentQSeries> {
        Self::from_terms(c.rows(), self.coeffs.iter().map(|(&u, a)| (u, c * a)))
    }

    /// Multiplies every coefficient on the right by a constant matrix.
    pub fn right_mul_const(&self, c: &QMatrix) -> Result<LaurentQSeries> {
        Self::from_terms(c.cols(), self.coeffs.iter().map(|(&u, a)| (u, a * c)))
    }

    /// Multiplies by `p^k`.
    pub fn shift(&self, k: i64) -> LaurentQSeries {
        LaurentQSeries { n: self.n, coeffs: self.coeffs.iter().map(|(&u, c)| (u + k, c.clone())).collect() }
    }

    pub fn map_coeffs(&self, f: impl Fn(&QMatrix) -> QMatrix) -> LaurentQSeries {
        LaurentQSeries { n: self.n, coeffs: self.coeffs.iter().map(|(&u, c)| (u, f(c))).collect() }
    }

    /// Keeps only the powers in `[lo, hi]`.
    pub fn truncated(&self, lo: i64, hi: i64) -> LaurentQSeries {
        LaurentQSeries { n: self.n, coeffs: self.coeffs.range(lo..=hi).map(|(&u, c)| (u, c.clone())).collect() }
    }

    /// Wiener norm of the part outside `[lo, hi]`.
    pub fn mass_outside(&self, lo: i64, hi: i64) -> f64 {
        self.terms().filter(|(u, _)| *u < lo || *u > hi).map(|(_, c)| embedding::operator_norm(c)).sum()
    }

    /// Drops coefficients whose operator norm is at most `tol`.
    pub fn pruned(&self, tol: f64) -> LaurentQSeries {
        LaurentQSeries {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| embedding::operator_norm(c) > tol)
                .map(|(&u, c)| (u, c.clone()))
                .collect(),
        }
    }

    /// Applies `f` to each entry of each coefficient.
    pub fn entry_map(&self, f: impl Fn(Quaternion) -> Quaternion) -> LaurentQSeries {
        self.map_coeffs(|c| c.map(&f))
    }

    /// Scalar conjugate `F^c(p) = sum_u p^u conj(F_u)`.
    pub fn star_conj(&self) -> Result<LaurentQSeries> {
        if !self.is_scalar() {
            return Err(Error::NotScalar);
        }
        Ok(self.entry_map(Quaternion::conj))
    }

    /// `F(p) = sum_u p^u F_u` at a quaternion with `|p| = 1` (or any nonzero `p`
    /// for finitely supported series).
    pub fn evaluate(&self, p: Quaternion) -> Result<QMatrix> {
        let mut out = QMatrix::zeros(self.n, self.n);
        if self.coeffs.is_empty() {
            return Ok(out);
        }
        let inv = if self.support().is_some_and(|(lo, _)| lo < 0) { Some(p.inv()?) } else { None };
        for (&u, c) in &self.coeffs {
            let pu = if u >= 0 { p.powi(u as u32) } else { inv.expect("negative power").powi((-u) as u32) };
            out = &out + &c.left_scale(pu);
        }
        Ok(out)
    }

    pub fn omega(&self, f: &SliceFrame) -> ComplexLaurentSeries {
        ComplexLaurentSeries {
            size: 2 * self.n,
            coeffs: self.coeffs.iter().map(|(&u, c)| (u, chi(c, f))).collect(),
        }
    }

    /// Inverse of [`LaurentQSeries::omega`]; every coefficient must lie in the image of `chi`.
    pub fn from_omega(g: &ComplexLaurentSeries, f: &SliceFrame, tol: f64) -> Result<LaurentQSeries> {
        if g.size % 2 != 0 {
            return Err(Error::DimensionMismatch("complex series of odd size".into()));
        }
        let mut out = Self::zero(g.size / 2);
        for (&u, c) in &g.coeffs {
            out.add_term(u, chi_inverse(c, f, tol)?)?;
        }
        Ok(out)
    }

    fn check_size(&self, other: &LaurentQSeries) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("series sizes {} and {}", self.n, other.n)));
        }
        Ok(())
    }
}

/// Laurent series with square complex matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLaurentSeries {
    size: usize,
    coeffs: BTreeMap<i64, CMatrix>,
}

impl ComplexLaurentSeries {
    pub fn zero(size: usize) -> Self {
        ComplexLaurentSeries { size, coeffs: BTreeMap::new() }
    }

    pub fn from_terms(size: usize, terms: impl IntoIterator<Item = (i64, CMatrix)>) -> Result<Self> {
        let mut s = Self::zero(size);
        for (u, c) in terms {
            if c.shape() != (size, size) {
                return Err(Error::DimensionMismatch("complex coefficient shape".into()));
            }
            match s.coeffs.get_mut(&u) {
                Some(e) => *e += c,
                None => {
                    s.coeffs.insert(u, c);
                }
            }
        }
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &CMatrix)> {
        self.coeffs.iter().map(|(&u, c)| (u, c))
    }

    pub fn coeff(&self, u: i64) -> Option<&CMatrix> {
        self.coeffs.get(&u)
    }

    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.coeffs.keys().next()?, *self.coeffs.keys().next_back()?))
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        let mut out = CMatrix::zeros(self.size, self.size);
        for (&u, c) in &self.coeffs {
            out += c * z.powi(u as i32);
        }
        out
    }

    pub fn mul(&self, other: &ComplexLaurentSeries) -> Result<ComplexLaurentSeries> {
        if self.size != other.size {
            return Err(Error::DimensionMismatch("complex series sizes".into()));
        }
        let mut terms = Vec::new();
        for (&u, a) in &self.coeffs {
            for (&v, b) in &other.coeffs {
                terms.push((u + v, a * b));
            }
        }
        Self::from_terms(self.size, terms)
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    power: i64,
    coeff: QMatrix,
}

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for LaurentQSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesRepr {
            n: self.n,
            terms: self.coeffs.iter().map(|(&power, c)| TermRepr { power, coeff: c.clone() }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentQSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SeriesRepr::deserialize(d)?;
        LaurentQSeries::from_terms(repr.n, repr.terms.into_iter().map(|t| (t.power, t.coeff)))
            .map_err(serde::de::Error::custom)
    }
}

/// Spectral norm of `omega(F)(z)`, used for sup-norm residuals on the circle.
pub fn sup_on_circle(f: &ComplexLaurentSeries, grid: usize) -> f64 {
    (0..grid)
        .map(|k| {
            let z = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / grid as f64);
            linalg::spectral_norm(&f.eval(z))
        })
        .fold(0.0, f64::max)
}
