//! Real polynomials and rational matrix functions `N(p) / r(p)` with a
//! quaternionic matrix polynomial `N` and a real scalar denominator `r`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::series::LaurentQSeries;

/// Real polynomial with coefficients in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPoly(Vec<f64>);

impl RealPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = RealPoly(coeffs);
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `x - a`.
    pub fn linear(a: f64) -> Self {
        Self::new(vec![-a, 1.0])
    }

    /// Monic real polynomial with the given roots (complex roots must come in conjugate pairs).
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        Self::new(c.into_iter().map(|z| z.re).collect())
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && self.0.last() == Some(&0.0) {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(0.0);
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.0.last().expect("non-empty")
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_q(&self, p: Quaternion) -> Quaternion {
        self.0.iter().rev().fold(Quaternion::ZERO, |acc, &c| acc * p + Quaternion::real(c))
    }

    pub fn mul(&self, o: &RealPoly) -> RealPoly {
        let mut c = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        RealPoly::new(c)
    }

    pub fn add(&self, o: &RealPoly) -> RealPoly {
        let mut c = vec![0.0; self.0.len().max(o.0.len())];
        for (k, a) in self.0.iter().enumerate() {
            c[k] += a;
        }
        for (k, a) in o.0.iter().enumerate() {
            c[k] += a;
        }
        RealPoly::new(c)
    }

    pub fn scale(&self, s: f64) -> RealPoly {
        RealPoly::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn powi(&self, k: usize) -> RealPoly {
        (0..k).fold(RealPoly::one(), |acc, _| acc.mul(self))
    }

    pub fn monic(&self) -> RealPoly {
        self.scale(1.0 / self.leading())
    }

    /// Quotient and remainder.
    pub fn divrem(&self, d: &RealPoly) -> Result<(RealPoly, RealPoly)> {
        if d.is_zero() {
            return Err(Error::Singular("division by the zero polynomial".into()));
        }
        let dd = d.degree();
        if self.degree() < dd {
            return Ok((RealPoly::constant(0.0), self.clone()));
        }
        let mut r = self.0.clone();
        let mut q = vec![0.0; self.degree() - dd + 1];
        let lead = d.leading();
        for k in (0..q.len()).rev() {
            let c = r[k + dd] / lead;
            q[k] = c;
            for (j, &dc) in d.0.iter().enumerate() {
                r[k + j] -= c * dc;
            }
        }
        r.truncate(dd.max(1));
        Ok((RealPoly::new(q), RealPoly::new(r)))
    }

    /// Complex roots from the companion matrix, polished by Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let k = self.degree();
        if k == 0 {
            return vec![];
        }
        let m = self.monic();
        let mut comp = DMatrix::<f64>::zeros(k, k);
        for i in 1..k {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..k {
            comp[(i, k - 1)] = -m.0[i];
        }
        let mut out = vec![];
        for (z, m) in cluster_roots(comp.complex_eigenvalues().iter().copied().collect()) {
            // A root of multiplicity m is a simple root of the (m-1)-th derivative.
            let mut f = self.clone();
            for _ in 1..m {
                f = f.derivative();
            }
            let df = f.derivative();
            let mut z = z;
            for _ in 0..3 {
                let d = df.eval_c(z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = f.eval_c(z) / d;
                if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
                    break;
                }
                z -= step;
            }
            if m > 1 && z.im.abs() <= 1e-9 * (1.0 + z.norm()) {
                z.im = 0.0;
            }
            out.extend(std::iter::repeat_n(z, m));
        }
        out
    }

    pub fn derivative(&self) -> RealPoly {
        if self.0.len() <= 1 {
            return RealPoly::constant(0.0);
        }
        RealPoly::new(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }
}

/// Splits roots into the factors with roots strictly inside and outside the unit circle.
/// Returns `None` if a root lies within `tol` of the circle.
pub fn split_by_circle(p: &RealPoly, tol: f64) -> Option<(RealPoly, RealPoly)> {
    let roots = p.roots();
    let mut inside = vec![];
    let mut outside = vec![];
    for r in roots {
        let m = r.norm();
        if (m - 1.0).abs() <= tol {
            return None;
        }
        if m < 1.0 {
            inside.push(r);
        } else {
            outside.push(r);
        }
    }
    let pin = RealPoly::from_roots(&inside);
    let pout = RealPoly::from_roots(&outside).scale(p.leading());
    Some((pin, pout))
}

/// Matrix polynomial with quaternionic coefficients (stored as a series with powers `>= 0`).
pub type QPoly = LaurentQSeries;

/// `N * r` for a real polynomial `r`.
pub fn qpoly_mul_real(n: &QPoly, r: &RealPoly) -> QPoly {
    let mut out = QPoly::zero(n.n());
    for (u, c) in n.terms() {
        for (k, &a) in r.coeffs().iter().enumerate() {
            if a != 0.0 {
                out.add_term(u + k as i64, c.scale(a)).expect("same size");
            }
        }
    }
    out
}

/// Quotient and remainder of a matrix polynomial by a real polynomial.
pub fn qpoly_divrem(n: &QPoly, d: &RealPoly) -> Result<(QPoly, QPoly)> {
    let dim = n.n();
    let Some((lo, hi)) = n.support() else {
        return Ok((QPoly::zero(dim), QPoly::zero(dim)));
    };
    if lo < 0 {
        return Err(Error::InvalidInput("numerator has negative powers".into()));
    }
    let dd = d.degree() as i64;
    let mut r: Vec<QMatrix> = (0..=hi).map(|u| n.coeff_or_zero(u)).collect();
    let mut q = QPoly::zero(dim);
    let lead = d.leading();
    for k in (0..=(hi - dd)).rev() {
        let c = r[(k + dd) as usize].scale(1.0 / lead);
        for (j, &dc) in d.coeffs().iter().enumerate() {
            let idx = (k + j as i64) as usize;
            r[idx] = &r[idx] - &c.scale(dc);
        }
        q.add_term(k, c)?;
    }
    let mut rem = QPoly::zero(dim);
    for (u, c) in r.into_iter().enumerate().take(dd.max(0) as usize) {
        rem.add_term(u as i64, c)?;
    }
    Ok((q.pruned(0.0), rem.pruned(0.0)))
}

/// `F(p) = r(p)^{-1} N(p)` with `N(p) = sum_d p^d N_d` and real `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalQMatrix {
    num: QPoly,
    den: RealPoly,
}

impl RationalQMatrix {
    pub fn new(num: QPoly, den: RealPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        if num.support().is_some_and(|(lo, _)| lo < 0) {
            return Err(Error::InvalidInput("numerator must be a polynomial".into()));
        }
        Ok(RationalQMatrix { num, den })
    }

    pub fn polynomial(num: QPoly) -> Result<Self> {
        Self::new(num, RealPoly::one())
    }

    pub fn identity(n: usize) -> Self {
        RationalQMatrix { num: QPoly::identity(n), den: RealPoly::one() }
    }

    pub fn n(&self) -> usize {
        self.num.n()
    }

    pub fn num(&self) -> &QPoly {
        &self.num
    }

    pub fn den(&self) -> &RealPoly {
        &self.den
    }

    pub fn num_degree(&self) -> i64 {
        self.num.support().map_or(0, |(_, hi)| hi)
    }

    /// Finite at infinity.
    pub fn is_proper(&self) -> bool {
        self.num_degree() <= self.den.degree() as i64
    }

    pub fn evaluate(&self, p: Quaternion) -> Result<QMatrix> {
        let r = self.den.eval_q(p);
        let n = self.num.evaluate(p)?;
        Ok(n.left_scale(r.inv()?))
    }

    pub fn star_mul(&self, o: &RationalQMatrix) -> Result<RationalQMatrix> {
        RationalQMatrix::new(self.num.star_mul(&o.num)?, self.den.mul(&o.den))
    }

    pub fn add(&self, o: &RationalQMatrix) -> Result<RationalQMatrix> {
        let a = qpoly_mul_real(&self.num, &o.den);
        let b = qpoly_mul_real(&o.num, &self.den);
        RationalQMatrix::new(a.add(&b)?, self.den.mul(&o.den))
    }

    /// `(p + 1)/(p - 1)` raised to `k` (negative `k` gives the reciprocal), times the identity.
    pub fn cayley_power(n: usize, k: i64) -> RationalQMatrix {
        let plus = RealPoly::new(vec![1.0, 1.0]);
        let minus = RealPoly::new(vec![-1.0, 1.0]);
        let (a, b) = if k >= 0 { (plus, minus) } else { (minus, plus) };
        let m = k.unsigned_abs() as usize;
        let num = qpoly_mul_real(&QPoly::identity(n), &a.powi(m));
        RationalQMatrix { num, den: b.powi(m) }
    }

    /// Diagonal matrix with scalar rational entries `num_m / den_m`, over a common denominator.
    pub fn diagonal(entries: &[(RealPoly, RealPoly)]) -> Result<RationalQMatrix> {
        let n = entries.len();
        let den = entries.iter().fold(RealPoly::one(), |acc, (_, d)| acc.mul(d));
        let mut num = QPoly::zero(n);
        for (m, (a, _)) in entries.iter().enumerate() {
            let others = entries.iter().enumerate().filter(|(j, _)| *j != m).fold(RealPoly::one(), |acc, (_, (_, d))| acc.mul(d));
            let entry = a.mul(&others);
            for (k, &c) in entry.coeffs().iter().enumerate() {
                if c != 0.0 {
                    let mut e = QMatrix::zeros(n, n);
                    e[(m, m)] = Quaternion::real(c);
                    num.add_term(k as i64, e)?;
                }
            }
        }
        RationalQMatrix::new(num, den)
    }
}

impl RationalQMatrix {
    /// `omega(F)(z) = r(z)^{-1} sum_d z^d chi(N_d)`.
    pub fn omega_at(&self, z: Complex64, frame: &SliceFrame) -> Result<CMatrix> {
        let r = self.den.eval_c(z);
        if r.norm() == 0.0 {
            return Err(Error::Singular("evaluation at a pole".into()));
        }
        Ok(self.num.omega(frame).eval(z) / r)
    }

    /// Cancels real linear and quadratic factors shared by the denominator and every numerator entry.
    pub fn reduced(&self, tol: f64) -> RationalQMatrix {
        let mut out = self.clone();
        let scale = self.num.norm().max(1e-300);
        'outer: loop {
            if out.den.degree() == 0 {
                break;
            }
            for f in real_factors(&out.den) {
                let Ok((q, rem)) = qpoly_divrem(&out.num, &f) else { continue };
                if rem.norm() <= tol * scale {
                    let (dq, _) = out.den.divrem(&f).expect("nonzero factor");
                    out = RationalQMatrix { num: q, den: dq };
                    continue 'outer;
                }
            }
            break;
        }
        out
    }

    /// Roots of the denominator after cancellation.
    pub fn poles(&self, tol: f64) -> Vec<Complex64> {
        self.reduced(tol).den.roots()
    }

    /// Image under the Cayley involution `p -> (p + 1)/(p - 1)`.
    pub fn cayley(&self) -> RationalQMatrix {
        let d = self.den.degree().max(self.num_degree().max(0) as usize);
        let num = cayley_poly(&self.num, d);
        let den = cayley_real(&self.den, d);
        RationalQMatrix { num, den }
    }
}

/// Groups computed roots into clusters (the numerical shadow of a multiple
/// root), returning each cluster's mean and size.
fn cluster_roots(roots: Vec<Complex64>) -> Vec<(Complex64, usize)> {
    const RADIUS: f64 = 1e-4;
    let mut done = vec![false; roots.len()];
    let mut out = vec![];
    for a in 0..roots.len() {
        if done[a] {
            continue;
        }
        let members: Vec<usize> = (a..roots.len())
            .filter(|&b| !done[b] && (roots[b] - roots[a]).norm() <= RADIUS * (1.0 + roots[a].norm()))
            .collect();
        let mean = members.iter().map(|&b| roots[b]).sum::<Complex64>() / members.len() as f64;
        for &b in &members {
            done[b] = true;
        }
        out.push((mean, members.len()));
    }
    out
}

/// Monic real irreducible factors (linear or quadratic) of `p`, one per root or conjugate pair.
pub fn real_factors(p: &RealPoly) -> Vec<RealPoly> {
    let mut out: Vec<RealPoly> = vec![];
    for r in p.roots() {
        let f = if r.im.abs() <= 1e-9 * (1.0 + r.norm()) {
            RealPoly::linear(r.re)
        } else if r.im > 0.0 {
            RealPoly::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0])
        } else {
            continue;
        };
        out.push(f);
    }
    out
}

/// `sum_d P_d (w + 1)^d (w - 1)^{deg - d}`, so that `P((w + 1)/(w - 1)) = (w - 1)^{-deg}` times it.
pub fn cayley_poly(p: &QPoly, deg: usize) -> QPoly {
    let mut out = QPoly::zero(p.n());
    for (d, c) in p.terms() {
        let basis = cayley_basis(d as usize, deg);
        for (k, &a) in basis.coeffs().iter().enumerate() {
            if a != 0.0 {
                out.add_term(k as i64, c.scale(a)).expect("same size");
            }
        }
    }
    out
}

/// Real-polynomial version of [`cayley_poly`].
pub fn cayley_real(p: &RealPoly, deg: usize) -> RealPoly {
    p.coeffs()
        .iter()
        .enumerate()
        .fold(RealPoly::constant(0.0), |acc, (d, &c)| acc.add(&cayley_basis(d, deg).scale(c)))
}

fn cayley_basis(d: usize, deg: usize) -> RealPoly {
    RealPoly::new(vec![1.0, 1.0]).powi(d).mul(&RealPoly::new(vec![-1.0, 1.0]).powi(deg - d))
}

#[derive(Serialize, Deserialize)]
struct NumTerm {
    deg: i64,
    coeff: QMatrix,
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    n: usize,
    num: Vec<NumTerm>,
    den: Vec<f64>,
}

impl Serialize for RationalQMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr {
            n: self.n(),
            num: self.num.terms().map(|(deg, c)| NumTerm { deg, coeff: c.clone() }).collect(),
            den: self.den.coeffs().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalQMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = RationalRepr::deserialize(d)?;
        let num = QPoly::from_terms(r.n, r.num.into_iter().map(|t| (t.deg, t.coeff))).map_err(D::Error::custom)?;
        RationalQMatrix::new(num, RealPoly::new(r.den)).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divrem_reconstructs() {
        let a = RealPoly::new(vec![1.0, -2.0, 0.5, 3.0, 1.0]);
        let d = RealPoly::new(vec![0.5, 1.0, 2.0]);
        let (q, r) = a.divrem(&d).unwrap();
        assert!(r.degree() < d.degree());
        let back = q.mul(&d).add(&r);
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (x - 2)(x^2 + 1)
        let p = RealPoly::new(vec![-2.0, 1.0, -2.0, 1.0]);
        let mut roots = p.roots();
        roots.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((roots[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((roots[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((roots[2] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(split_by_circle(&p, 1e-8).is_none());
        let (pin, pout) = split_by_circle(&RealPoly::new(vec![1.0, -2.5, 1.0]), 1e-8).unwrap();
        assert!((pin.eval(0.5)).abs() < 1e-12);
        assert!((pout.eval(2.0)).abs() < 1e-12);
    }

    #[test]
    fn quaternion_evaluation_uses_left_denominator() {
        let c = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        let f = RationalQMatrix::new(QPoly::scalar(&[(0, c)]), RealPoly::new(vec![-2.0, 1.0])).unwrap();
        let p = Quaternion::new(0.0, 0.0, 1.0, 0.0);
        let got = f.evaluate(p).unwrap()[(0, 0)];
        let expect = (p - Quaternion::real(2.0)).inv().unwrap() * c;
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn matrix_divrem() {
        let num = QPoly::scalar(&[(0, Quaternion::E1), (2, Quaternion::E2), (3, Quaternion::ONE)]);
        let d = RealPoly::new(vec![1.0, 0.0, 1.0]);
        let (q, r) = qpoly_divrem(&num, &d).unwrap();
        let back = qpoly_mul_real(&q, &d).add(&r).unwrap();
        assert!(back.sub(&num).unwrap().norm() < 1e-14);
        assert!(r.support().is_none_or(|(_, hi)| hi < 2));
    }

    #[test]
    fn cancellation_and_cayley() {
        let m = QMatrix::from_rows(vec![vec![Quaternion::new(1.0, 2.0, 0.0, -1.0), Quaternion::E3], vec![Quaternion::ZERO, Quaternion::ONE]]).unwrap();
        let r = RealPoly::new(vec![1.0, 0.0, 1.0]);
        let f = RationalQMatrix::new(qpoly_mul_real(&QPoly::constant(m.clone()).unwrap(), &r), r.mul(&RealPoly::new(vec![4.0, 0.0, 1.0]))).unwrap();
        let g = f.reduced(1e-10);
        assert_eq!(g.den().degree(), 2);
        assert!(g.poles(1e-10).iter().all(|z| (z.norm() - 2.0).abs() < 1e-10));

        let p = Quaternion::new(0.3, -0.2, 0.5, 0.1);
        let w = (p + Quaternion::ONE) * (p - Quaternion::ONE).inv().unwrap();
        let direct = f.evaluate(p).unwrap();
        let via = f.cayley().evaluate(w).unwrap();
        assert!((&direct - &via).frobenius() < 1e-12);
        let z = Complex64::new(0.2, 0.7);
        let frame = SliceFrame::default();
        let om = f.omega_at(z, &frame).unwrap();
        let top = crate::embedding::chi(&f.evaluate(frame.slice(z)).unwrap(), &frame);
        for a in 0..2 {
            for b in 0..4 {
                assert!((om[(a, b)] - top[(a, b)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn json_shape() {
        let f = RationalQMatrix::cayley_power(1, 1);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"num\":[{\"deg\":0"));
        assert!(s.contains("\"den\":[-1.0,1.0]"));
        let back: RationalQMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
