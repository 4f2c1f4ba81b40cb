//! Real quaternions and slice frames.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A real quaternion `w + x e1 + y e2 + z e3`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const E1: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const E2: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const E3: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Quaternion::new(w, 0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Imaginary part as a quaternion with zero real part.
    pub fn imag(self) -> Self {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    /// Euclidean inner product on R^4.
    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn inv(self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Singular("quaternion inverse of zero".into()));
        }
        Ok(self.conj() * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `self^k` for a nonnegative integer power.
    pub fn powi(self, k: u32) -> Self {
        let mut acc = Quaternion::ONE;
        let mut base = self;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// `self^k` for an integer power; negative powers need an invertible base.
    pub fn powi_signed(self, k: i64) -> Result<Self> {
        if k >= 0 {
            Ok(self.powi(k as u32))
        } else {
            Ok(self.inv()?.powi((-k) as u32))
        }
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}e1 + {}e2 + {}e3", self.w, self.x, self.y, self.z)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Quaternion) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Quaternion {
    fn sub_assign(&mut self, o: Quaternion) {
        *self = *self - o;
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        let (a1, b1, c1, d1) = (self.w, self.x, self.y, self.z);
        let (a2, b2, c2, d2) = (o.w, o.x, o.y, o.z);
        Quaternion::new(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }
}

impl MulAssign for Quaternion {
    fn mul_assign(&mut self, o: Quaternion) {
        *self = *self * o;
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl Div<f64> for Quaternion {
    type Output = Quaternion;
    fn div(self, s: f64) -> Quaternion {
        self * (1.0 / s)
    }
}

impl std::iter::Sum for Quaternion {
    fn sum<I: Iterator<Item = Quaternion>>(iter: I) -> Quaternion {
        iter.fold(Quaternion::ZERO, |a, b| a + b)
    }
}

impl Serialize for Quaternion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        Ok(Quaternion::from_array(a))
    }
}

/// An ordered pair `(i, j)` of anticommuting unit imaginary quaternions.
///
/// Every quaternion splits uniquely as `a + b j` with `a, b` in the slice
/// `C_i = R + R i`, which is identified with the complex numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceFrame {
    i: Quaternion,
    j: Quaternion,
    k: Quaternion,
}

impl Default for SliceFrame {
    fn default() -> Self {
        SliceFrame { i: Quaternion::E1, j: Quaternion::E2, k: Quaternion::E3 }
    }
}

impl SliceFrame {
    pub const TOL: f64 = 1e-12;

    pub fn new(i: Quaternion, j: Quaternion) -> Result<Self> {
        for (name, q) in [("i", i), ("j", j)] {
            if q.w.abs() > Self::TOL || (q.norm() - 1.0).abs() > Self::TOL {
                return Err(Error::InvalidFrame(format!(
                    "{name} must be a unit purely imaginary quaternion"
                )));
            }
        }
        if i.dot(j).abs() > Self::TOL {
            return Err(Error::InvalidFrame("i and j must anticommute".into()));
        }
        Ok(SliceFrame { i, j, k: i * j })
    }

    /// Builds a frame by orthonormalizing two imaginary directions.
    pub fn orthonormalized(i: Quaternion, j: Quaternion) -> Result<Self> {
        let i = i.imag();
        let ni = i.norm();
        if ni < 1e-12 {
            return Err(Error::InvalidFrame("i has no imaginary part".into()));
        }
        let i = i / ni;
        let j = j.imag();
        let j = j - i * i.dot(j);
        let nj = j.norm();
        if nj < 1e-12 {
            return Err(Error::InvalidFrame("j is parallel to i".into()));
        }
        Self::new(i, j / nj)
    }

    pub fn i(&self) -> Quaternion {
        self.i
    }

    pub fn j(&self) -> Quaternion {
        self.j
    }

    pub fn k(&self) -> Quaternion {
        self.k
    }

    /// Splits `q = a + b j` with `a, b` in the slice of `i`.
    pub fn split(&self, q: Quaternion) -> (Complex64, Complex64) {
        (
            Complex64::new(q.w, q.dot(self.i)),
            Complex64::new(q.dot(self.j), q.dot(self.k)),
        )
    }

    /// Inverse of [`SliceFrame::split`].
    pub fn join(&self, a: Complex64, b: Complex64) -> Quaternion {
        Quaternion::real(a.re) + self.i * a.im + self.j * b.re + self.k * b.im
    }

    /// The slice element `re + im i`.
    pub fn slice(&self, z: Complex64) -> Quaternion {
        Quaternion::real(z.re) + self.i * z.im
    }
}
