//! The algebra `B` of almost-periodic sums plus integrable kernels on the line.
//!
//! An element is `sum_mu e^{i t mu} f_mu + int e^{i t u} Phi(u) du`. The
//! integrable part is stored as uniformly spaced samples on one or more grid
//! components (all with the same step `h`), and integrals are Riemann sums
//! with step `h`. Samples at a jump should carry the mean of the one-sided
//! limits, which makes the sums agree with the trapezoid rule.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{self, golden_min, InverseOptions};
use crate::embedding::{self, chi, qinverse};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::series::LaurentQSeries;

/// Frequencies closer than this are merged.
pub const FREQ_TOL: f64 = 1e-12;

/// Uniform samples `Phi(origin + k h)`, `k = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridComponent {
    pub origin: f64,
    pub samples: Vec<QMatrix>,
}

/// The integrable part: a sum of grid components sharing the step `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct L1Part {
    pub h: f64,
    pub components: Vec<GridComponent>,
}

impl L1Part {
    /// Samples on `[-L, L]` with step `h` (so `2L/h + 1` samples).
    pub fn symmetric(l: f64, h: f64, samples: Vec<QMatrix>) -> Result<Self> {
        if !(h > 0.0) || !(l >= 0.0) {
            return Err(Error::InvalidInput("L1 grid needs h > 0 and L >= 0".into()));
        }
        let k = 2.0 * l / h;
        if (k - k.round()).abs() > 1e-9 || samples.len() != k.round() as usize + 1 {
            return Err(Error::InvalidInput(format!(
                "expected 2L/h + 1 = {} samples, got {}",
                k + 1.0,
                samples.len()
            )));
        }
        Ok(L1Part { h, components: vec![GridComponent { origin: -l, samples }] })
    }

    /// Samples `phi` on `[a, b]` (endpoints rounded outward to the grid).
    pub fn from_fn(h: f64, a: f64, b: f64, phi: impl Fn(f64) -> QMatrix) -> Self {
        let k0 = (a / h).floor() as i64;
        let k1 = (b / h).ceil() as i64;
        let samples = (k0..=k1).map(|k| phi(k as f64 * h)).collect();
        L1Part { h, components: vec![GridComponent { origin: k0 as f64 * h, samples }] }
    }

    fn norm(&self) -> f64 {
        self.h
            * self
                .components
                .iter()
                .flat_map(|c| c.samples.iter())
                .map(embedding::operator_norm)
                .sum::<f64>()
    }

    fn map(&self, f: impl Fn(&QMatrix) -> QMatrix) -> L1Part {
        L1Part {
            h: self.h,
            components: self
                .components
                .iter()
                .map(|c| GridComponent { origin: c.origin, samples: c.samples.iter().map(&f).collect() })
                .collect(),
        }
    }

    /// Merges components whose grids are aligned.
    fn compact(mut self) -> L1Part {
        let h = self.h;
        let mut out: Vec<GridComponent> = Vec::new();
        self.components.sort_by(|a, b| a.origin.total_cmp(&b.origin));
        for c in self.components {
            if c.samples.is_empty() {
                continue;
            }
            let target = out.iter_mut().find(|o| {
                let off = (c.origin - o.origin) / h;
                (off - off.round()).abs() < 1e-9
            });
            match target {
                Some(o) => {
                    let off = ((c.origin - o.origin) / h).round() as i64;
                    let dim = c.samples[0].rows();
                    if off < 0 {
                        let pad = (-off) as usize;
                        let mut s = vec![QMatrix::zeros(dim, dim); pad];
                        s.append(&mut o.samples);
                        o.samples = s;
                        o.origin = c.origin;
                    }
                    let start = off.max(0) as usize;
                    if o.samples.len() < start + c.samples.len() {
                        o.samples.resize(start + c.samples.len(), QMatrix::zeros(dim, dim));
                    }
                    for (k, s) in c.samples.into_iter().enumerate() {
                        o.samples[start + k] = &o.samples[start + k] + &s;
                    }
                }
                None => out.push(c),
            }
        }
        L1Part { h, components: out }
    }

    /// Support hull `[min node, max node]`.
    pub fn hull(&self) -> Option<(f64, f64)> {
        let lo = self.components.iter().map(|c| c.origin).reduce(f64::min)?;
        let hi = self
            .components
            .iter()
            .map(|c| c.origin + (c.samples.len().max(1) - 1) as f64 * self.h)
            .reduce(f64::max)?;
        Some((lo, hi))
    }

    /// Value of the sampled kernel at a node `u` (zero off the grid).
    pub fn value_at(&self, u: f64) -> Option<QMatrix> {
        let mut acc: Option<QMatrix> = None;
        for c in &self.components {
            let k = (u - c.origin) / self.h;
            if (k - k.round()).abs() < 1e-9 && k.round() >= 0.0 && (k.round() as usize) < c.samples.len() {
                let s = &c.samples[k.round() as usize];
                acc = Some(match acc {
                    Some(a) => &a + s,
                    None => s.clone(),
                });
            }
        }
        acc
    }
}

/// Element of `B` with `n x n` quaternionic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct BElement {
    n: usize,
    ap: Vec<(f64, QMatrix)>,
    l1: Option<L1Part>,
}

impl BElement {
    pub fn zero(n: usize) -> Self {
        BElement { n, ap: vec![], l1: None }
    }

    pub fn identity(n: usize) -> Self {
        BElement { n, ap: vec![(0.0, QMatrix::identity(n))], l1: None }
    }

    pub fn new(n: usize, ap: Vec<(f64, QMatrix)>, l1: Option<L1Part>) -> Result<Self> {
        let shape_ok = ap.iter().all(|(_, c)| c.shape() == (n, n))
            && l1.iter().flat_map(|l| l.components.iter()).flat_map(|c| c.samples.iter()).all(|s| s.shape() == (n, n));
        if !shape_ok {
            return Err(Error::DimensionMismatch(format!("coefficients must be {n}x{n}")));
        }
        if ap.iter().any(|(mu, _)| !mu.is_finite()) {
            return Err(Error::InvalidInput("non-finite frequency".into()));
        }
        Ok(BElement { n, ap: merge_ap(ap), l1: l1.map(L1Part::compact) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ap(&self) -> &[(f64, QMatrix)] {
        &self.ap
    }

    pub fn l1(&self) -> Option<&L1Part> {
        self.l1.as_ref()
    }

    /// `sum ||f_mu|| + int ||Phi||`.
    pub fn norm(&self) -> f64 {
        self.ap.iter().map(|(_, c)| embedding::operator_norm(c)).sum::<f64>()
            + self.l1.as_ref().map_or(0.0, L1Part::norm)
    }

    /// The almost-periodic part alone.
    pub fn ap_part(&self) -> BElement {
        BElement { n: self.n, ap: self.ap.clone(), l1: None }
    }

    pub fn add(&self, other: &BElement) -> Result<BElement> {
        check_n(self, other)?;
        let mut ap = self.ap.clone();
        ap.extend(other.ap.iter().cloned());
        let l1 = match (&self.l1, &other.l1) {
            (Some(a), Some(b)) => {
                check_h(a.h, b.h)?;
                let mut comps = a.components.clone();
                comps.extend(b.components.iter().cloned());
                Some(L1Part { h: a.h, components: comps })
            }
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (None, None) => None,
        };
        BElement::new(self.n, ap, l1)
    }

    pub fn scale(&self, s: f64) -> BElement {
        self.map_coeffs(|c| c.scale(s))
    }

    fn map_coeffs(&self, f: impl Fn(&QMatrix) -> QMatrix) -> BElement {
        BElement {
            n: self.n,
            ap: self.ap.iter().map(|(mu, c)| (*mu, f(c))).collect(),
            l1: self.l1.as_ref().map(|l| l.map(&f)),
        }
    }

    /// Left multiplication of every coefficient by a constant.
    pub fn left_mul_const(&self, c: &QMatrix) -> BElement {
        self.map_coeffs(|a| c * a)
    }

    /// Right multiplication of every coefficient by a constant.
    pub fn right_mul_const(&self, c: &QMatrix) -> BElement {
        self.map_coeffs(|a| a * c)
    }
}

fn check_n(a: &BElement, b: &BElement) -> Result<()> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch(format!("B-elements of sizes {} and {}", a.n, b.n)));
    }
    Ok(())
}

fn check_h(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::InvalidInput(format!("L1 grids use different steps {a} and {b}")));
    }
    Ok(())
}

fn merge_ap(mut ap: Vec<(f64, QMatrix)>) -> Vec<(f64, QMatrix)> {
    ap.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, QMatrix)> = Vec::new();
    for (mu, c) in ap {
        match out.last_mut() {
            Some((m, acc)) if (mu - *m).abs() <= FREQ_TOL * (1.0 + m.abs()) => *acc = &*acc + &c,
            _ => out.push((mu, c)),
        }
    }
    out
}

/// Star-product in `B`: the four terms AP*AP, AP*L1, L1*AP and L1*L1.
pub fn b_star_mul(f: &BElement, g: &BElement) -> Result<BElement> {
    check_n(f, g)?;
    let mut ap = Vec::with_capacity(f.ap.len() * g.ap.len());
    for (mu, a) in &f.ap {
        for (nu, b) in &g.ap {
            ap.push((mu + nu, a * b));
        }
    }
    let h = match (&f.l1, &g.l1) {
        (Some(a), Some(b)) => {
            check_h(a.h, b.h)?;
            Some(a.h)
        }
        (Some(a), None) => Some(a.h),
        (None, Some(b)) => Some(b.h),
        (None, None) => None,
    };
    let mut comps = Vec::new();
    if let Some(gl) = &g.l1 {
        for (mu, a) in &f.ap {
            for c in &gl.components {
                comps.push(GridComponent { origin: c.origin + mu, samples: c.samples.iter().map(|s| a * s).collect() });
            }
        }
    }
    if let Some(fl) = &f.l1 {
        for (nu, b) in &g.ap {
            for c in &fl.components {
                comps.push(GridComponent { origin: c.origin + nu, samples: c.samples.iter().map(|s| s * b).collect() });
            }
        }
    }
    if let (Some(fl), Some(gl)) = (&f.l1, &g.l1) {
        let h = fl.h;
        for a in &fl.components {
            for b in &gl.components {
                comps.push(GridComponent { origin: a.origin + b.origin, samples: discrete_conv(&a.samples, &b.samples, h, f.n) });
            }
        }
    }
    let l1 = h.map(|h| L1Part { h, components: comps });
    BElement::new(f.n, ap, l1)
}

/// `h sum_k a_k b_{m-k}` for `m = 0..len(a)+len(b)-1`.
fn discrete_conv(a: &[QMatrix], b: &[QMatrix], h: f64, n: usize) -> Vec<QMatrix> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![QMatrix::zeros(n, n); a.len() + b.len() - 1];
    if n == 1 {
        let mut acc = vec![Quaternion::ZERO; out.len()];
        for (i, x) in a.iter().enumerate() {
            let x = x[(0, 0)];
            if x == Quaternion::ZERO {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                acc[i + j] += x * y[(0, 0)];
            }
        }
        return acc.into_iter().map(|q| QMatrix::scalar(1, q * h)).collect();
    }
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + &(x * y);
        }
    }
    out.into_iter().map(|m| m.scale(h)).collect()
}

/// Scalar conjugate: every coefficient and sample conjugated.
pub fn b_conj(f: &BElement) -> Result<BElement> {
    if f.n != 1 {
        return Err(Error::NotScalar);
    }
    Ok(f.map_coeffs(QMatrix::conj))
}

/// `F(i t) = sum_mu e^{i t mu} f_mu + int e^{i t u} Phi(u) du` for a unit imaginary `i`.
pub fn b_evaluate(f: &BElement, i: Quaternion, t: f64) -> Result<QMatrix> {
    if i.w.abs() > 1e-12 || (i.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("evaluation direction must be a unit imaginary quaternion".into()));
    }
    let e = |u: f64| Quaternion::real((t * u).cos()) + i * (t * u).sin();
    let mut out = QMatrix::zeros(f.n, f.n);
    for (mu, c) in &f.ap {
        out = &out + &c.left_scale(e(*mu));
    }
    if let Some(l) = &f.l1 {
        for c in &l.components {
            for (k, s) in c.samples.iter().enumerate() {
                let u = c.origin + k as f64 * l.h;
                out = &out + &s.left_scale(e(u) * l.h);
            }
        }
    }
    Ok(out)
}

/// `omega(F)`: the same element with every coefficient replaced by `chi` of it.
#[derive(Clone, Debug)]
pub struct ComplexBElement {
    pub size: usize,
    pub ap: Vec<(f64, CMatrix)>,
    pub h: f64,
    pub components: Vec<(f64, Vec<CMatrix>)>,
}

impl ComplexBElement {
    /// `omega(F)(t)`.
    pub fn eval(&self, t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.size, self.size);
        for (mu, c) in &self.ap {
            out += c * Complex64::from_polar(1.0, t * mu);
        }
        for (origin, samples) in &self.components {
            let step = Complex64::from_polar(1.0, t * self.h);
            let mut e = Complex64::from_polar(self.h, t * origin);
            for s in samples {
                out += s * e;
                e *= step;
            }
        }
        out
    }

    pub fn ap_only(&self) -> ComplexBElement {
        ComplexBElement { size: self.size, ap: self.ap.clone(), h: self.h, components: vec![] }
    }
}

pub fn b_omega(f: &BElement, frame: &SliceFrame) -> ComplexBElement {
    ComplexBElement {
        size: 2 * f.n,
        ap: f.ap.iter().map(|(mu, c)| (*mu, chi(c, frame))).collect(),
        h: f.l1.as_ref().map_or(0.0, |l| l.h),
        components: f
            .l1
            .iter()
            .flat_map(|l| l.components.iter())
            .map(|c| (c.origin, c.samples.iter().map(|s| chi(s, frame)).collect()))
            .collect(),
    }
}

/// Invertibility certificate for an element of `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BInvertibilityCertificate {
    pub invertible: bool,
    /// Minimum of `|det omega(F)(t)|` over the sampled window.
    pub min_modulus: f64,
    pub argmin: f64,
    /// Minimum of `|det|` of the almost-periodic part alone (the limit at infinity).
    pub far_field_min: f64,
    pub window: f64,
    pub step: f64,
}

/// Samples `|det omega(F)(t)|` on `[-window, window]`, refining local minima.
fn min_det_on_window(om: &ComplexBElement, window: f64, step: f64) -> (f64, f64) {
    let m = (2.0 * window / step).ceil() as usize;
    let ts: Vec<f64> = (0..=m).map(|k| -window + k as f64 * step).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| linalg::det(&om.eval(t)).norm()).collect();
    let mut best = (f64::INFINITY, 0.0);
    let mut minima: Vec<usize> = (0..vals.len())
        .filter(|&k| (k == 0 || vals[k] <= vals[k - 1]) && (k + 1 == vals.len() || vals[k] <= vals[k + 1]))
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    minima.truncate(16);
    for (k, v) in vals.iter().enumerate() {
        if *v < best.0 {
            best = (*v, ts[k]);
        }
    }
    for k in minima {
        let (t, v) = golden_min(|t| linalg::det(&om.eval(t)).norm(), ts[k] - step, ts[k] + step, 60);
        if v < best.0 {
            best = (v, t);
        }
    }
    best
}

/// Tests invertibility in `B` through `det omega(F)` on a window and at infinity.
pub fn b_is_invertible(
    f: &BElement,
    frame: &SliceFrame,
    window: f64,
    step: f64,
    tol: f64,
) -> Result<BInvertibilityCertificate> {
    if !(window > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidInput("window and step must be positive".into()));
    }
    let om = b_omega(f, frame);
    let (min_modulus, argmin) = min_det_on_window(&om, window, step);
    let far_field_min = if f.ap.is_empty() { 0.0 } else { min_det_on_window(&om.ap_only(), window, step).0 };
    Ok(BInvertibilityCertificate {
        invertible: min_modulus > tol && far_field_min > tol,
        min_modulus,
        argmin,
        far_field_min,
        window,
        step,
    })
}

/// Strategy for [`b_star_inverse`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BInverseMode {
    /// Frequencies on a lattice `Z mu0` and no integrable part: reduce to a Laurent series.
    Commensurable,
    /// `F = c (I - X)` with `||X|| < 1`: sum the Neumann series.
    Neumann,
}

/// Star-inverse in `B` for the supported families.
pub fn b_star_inverse(f: &BElement, mode: BInverseMode, frame: &SliceFrame, tol: f64) -> Result<BElement> {
    let g = match mode {
        BInverseMode::Commensurable => commensurable_inverse(f, frame, tol)?,
        BInverseMode::Neumann => neumann_inverse(f, tol)?,
    };
    let residual = b_star_mul(f, &g)?.add(&BElement::identity(f.n).scale(-1.0))?.norm();
    let bound = 10.0 * tol * f.norm().max(1.0);
    if residual > bound {
        return Err(Error::ResidualTooLarge { residual, tol: bound });
    }
    Ok(g)
}

/// Base frequency `mu0` with every frequency an integer multiple of it.
pub fn lattice_base(freqs: &[f64]) -> Option<f64> {
    let smallest = freqs.iter().map(|m| m.abs()).filter(|&m| m > FREQ_TOL).reduce(f64::min)?;
    (1..=24).map(|d| smallest / d as f64).find(|&mu0| {
        freqs.iter().all(|m| {
            let r = m / mu0;
            (r - r.round()).abs() < 1e-9 * (1.0 + r.abs())
        })
    })
}

fn commensurable_inverse(f: &BElement, frame: &SliceFrame, tol: f64) -> Result<BElement> {
    if f.l1.as_ref().is_some_and(|l| l.norm() > 0.0) {
        return Err(Error::OutOfScope("commensurable inversion requires a purely almost-periodic element".into()));
    }
    let freqs: Vec<f64> = f.ap.iter().map(|(m, _)| *m).collect();
    let mu0 = match lattice_base(&freqs) {
        Some(m) => m,
        None if freqs.iter().all(|m| m.abs() <= FREQ_TOL) => 1.0,
        None => return Err(Error::OutOfScope("frequencies are not commensurable".into())),
    };
    let series = LaurentQSeries::from_terms(f.n, f.ap.iter().map(|(m, c)| ((m / mu0).round() as i64, c.clone())))?;
    let inv = circle::star_inverse(&series, frame, InverseOptions { tol, ..Default::default() })?;
    BElement::new(f.n, inv.terms().map(|(u, c)| (u as f64 * mu0, c.clone())).collect(), None)
}

fn neumann_inverse(f: &BElement, tol: f64) -> Result<BElement> {
    let c = f
        .ap
        .iter()
        .find(|(m, _)| m.abs() <= FREQ_TOL)
        .map(|(_, c)| c.clone())
        .ok_or_else(|| Error::OutOfScope("Neumann inversion needs a frequency-zero term".into()))?;
    let c_inv = qinverse(&c)?;
    // F = c (I - X) with X = I - c^{-1} F, so F^{-1} = (sum X^k) c^{-1}.
    let x = BElement::identity(f.n).add(&f.left_mul_const(&c_inv).scale(-1.0))?;
    let q = x.norm();
    if q >= 1.0 {
        return Err(Error::OutOfScope(format!("Neumann series needs ||I - c^-1 F|| < 1, got {q:.4}")));
    }
    let mut sum = BElement::identity(f.n);
    let mut term = BElement::identity(f.n);
    let mut k = 0;
    while term.norm() * q / (1.0 - q) >= tol / 4.0 {
        term = b_star_mul(&term, &x)?;
        sum = sum.add(&term)?;
        k += 1;
        if k > 10_000 {
            return Err(Error::DegreeCapExceeded("Neumann series did not converge".into()));
        }
    }
    Ok(sum.right_mul_const(&c_inv))
}

/// Samples of the indicator of `[a, b]` with the mean value at the jumps.
pub fn box_kernel(a: f64, b: f64, h: f64, value: Quaternion) -> L1Part {
    L1Part::from_fn(h, a - h, b + h, |u| {
        let x = if u > a + 1e-12 && u < b - 1e-12 {
            1.0
        } else if (u - a).abs() <= 1e-12 || (u - b).abs() <= 1e-12 {
            0.5
        } else {
            0.0
        };
        QMatrix::scalar(1, value * x)
    })
}

#[derive(Serialize, Deserialize)]
struct ApRepr {
    freq: f64,
    coeff: QMatrix,
}

#[derive(Serialize, Deserialize)]
struct L1Repr {
    #[serde(rename = "L")]
    l: f64,
    h: f64,
    samples: Vec<QMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ComponentRepr {
    origin: f64,
    h: f64,
    samples: Vec<QMatrix>,
}

#[derive(Serialize, Deserialize)]
struct BElementRepr {
    n: usize,
    #[serde(default)]
    ap: Vec<ApRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l1: Option<L1Repr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    l1_components: Vec<ComponentRepr>,
}

impl Serialize for BElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ap = self.ap.iter().map(|(freq, c)| ApRepr { freq: *freq, coeff: c.clone() }).collect();
        let mut l1 = None;
        let mut l1_components = vec![];
        if let Some(part) = &self.l1 {
            let aligned = part.components.iter().all(|c| {
                let k = c.origin / part.h;
                (k - k.round()).abs() < 1e-9
            });
            if aligned && !part.components.is_empty() {
                let (lo, hi) = part.hull().expect("non-empty");
                let half = ((lo.abs().max(hi.abs())) / part.h).round() as i64;
                let l = half as f64 * part.h;
                let mut samples = vec![QMatrix::zeros(self.n, self.n); (2 * half + 1) as usize];
                for c in &part.components {
                    let off = (c.origin / part.h).round() as i64 + half;
                    for (k, v) in c.samples.iter().enumerate() {
                        let idx = (off + k as i64) as usize;
                        samples[idx] = &samples[idx] + v;
                    }
                }
                l1 = Some(L1Repr { l, h: part.h, samples });
            } else {
                l1_components = part
                    .components
                    .iter()
                    .map(|c| ComponentRepr { origin: c.origin, h: part.h, samples: c.samples.clone() })
                    .collect();
            }
        }
        BElementRepr { n: self.n, ap, l1, l1_components }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = BElementRepr::deserialize(d)?;
        let mut part: Option<L1Part> = match r.l1 {
            Some(l) => Some(L1Part::symmetric(l.l, l.h, l.samples).map_err(D::Error::custom)?),
            None => None,
        };
        for c in r.l1_components {
            match &mut part {
                Some(p) => {
                    check_h(p.h, c.h).map_err(D::Error::custom)?;
                    p.components.push(GridComponent { origin: c.origin, samples: c.samples });
                }
                None => part = Some(L1Part { h: c.h, components: vec![GridComponent { origin: c.origin, samples: c.samples }] }),
            }
        }
        BElement::new(r.n, r.ap.into_iter().map(|a| (a.freq, a.coeff)).collect(), part).map_err(D::Error::custom)
    }
}

/// Default sampling window and step for [`b_is_invertible`].
pub fn default_window(f: &BElement) -> (f64, f64) {
    let spread = f
        .ap
        .iter()
        .map(|(m, _)| m.abs())
        .chain(f.l1.iter().filter_map(|l| l.hull()).map(|(a, b)| a.abs().max(b.abs())))
        .fold(1.0, f64::max);
    (100.0, (TAU / spread / 32.0).min(0.05))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn scalar_ap(terms: &[(f64, Quaternion)]) -> BElement {
        BElement::new(1, terms.iter().map(|&(m, c)| (m, QMatrix::scalar(1, c))).collect(), None).unwrap()
    }

    #[test]
    fn box_kernel_evaluates_like_its_fourier_transform() {
        let h = 1e-3;
        let f = BElement::new(1, vec![], Some(box_kernel(0.0, 1.0, h, Quaternion::ONE))).unwrap();
        for &t in &[0.3, 1.0, 2.5] {
            let got = b_evaluate(&f, Quaternion::E1, t).unwrap()[(0, 0)];
            // (e^{it} - 1)/(it) = sin t / t + i (1 - cos t)/t
            let expect = q(t.sin() / t, (1.0 - t.cos()) / t, 0.0, 0.0);
            assert!((got - expect).norm() < 1e-6, "t = {t}: {got} vs {expect}");
        }
    }

    #[test]
    fn box_convolution_is_triangle_in_l1() {
        let mut errs = vec![];
        for &h in &[0.02, 0.01] {
            let bx = BElement::new(1, vec![], Some(box_kernel(0.0, 1.0, h, Quaternion::ONE))).unwrap();
            let tri = b_star_mul(&bx, &bx).unwrap();
            let l1 = tri.l1().unwrap();
            let mut err = 0.0;
            let (lo, hi) = l1.hull().unwrap();
            let m = ((hi - lo) / h).round() as i64;
            for k in 0..=m {
                let u = lo + k as f64 * h;
                let exact = if (0.0..=1.0).contains(&u) { u } else if (1.0..=2.0).contains(&u) { 2.0 - u } else { 0.0 };
                let got = l1.value_at(u).map_or(0.0, |c| c[(0, 0)].w);
                err += (got - exact).abs() * h;
            }
            errs.push(err);
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn evaluation_is_multiplicative_in_the_complex_embedding() {
        let h = 0.05;
        let f = BElement::new(
            1,
            vec![(0.0, QMatrix::scalar(1, q(1.0, 0.2, 0.0, 0.1))), (0.7, QMatrix::scalar(1, q(0.0, 0.0, 0.3, 0.0)))],
            Some(box_kernel(-0.5, 0.5, h, q(0.1, 0.0, -0.2, 0.0))),
        )
        .unwrap();
        let g = BElement::new(1, vec![(-1.3, QMatrix::scalar(1, q(0.5, -0.1, 0.0, 0.2)))], Some(box_kernel(0.0, 2.0, h, q(0.0, 0.3, 0.0, 0.0))))
            .unwrap();
        let frame = SliceFrame::default();
        let fg = b_omega(&b_star_mul(&f, &g).unwrap(), &frame);
        let (of, og) = (b_omega(&f, &frame), b_omega(&g, &frame));
        let j = linalg::j_matrix(1);
        for k in 0..20 {
            let t = -3.0 + 0.31 * k as f64;
            assert!((fg.eval(t) - of.eval(t) * og.eval(t)).norm() < 1e-12);
            let sym = &j * fg.eval(-t).map(|z| z.conj()) * j.transpose();
            assert!((sym - fg.eval(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn evaluation_follows_the_twisted_product_rule() {
        let f = scalar_ap(&[(0.0, q(1.0, 0.0, 0.5, 0.0)), (1.0, q(0.0, 0.4, 0.0, 0.3))]);
        let g = scalar_ap(&[(0.5, q(0.2, 0.0, 0.0, 1.0)), (-2.0, q(0.3, 0.1, 0.0, 0.0))]);
        let i = Quaternion::E1;
        let fg = b_star_mul(&f, &g).unwrap();
        for k in 0..10 {
            let t = 0.37 * k as f64 - 1.5;
            let fv = b_evaluate(&f, i, t).unwrap()[(0, 0)];
            let it = fv.inv().unwrap() * i * fv;
            let rhs = fv * b_evaluate(&g, it, t).unwrap()[(0, 0)];
            let lhs = b_evaluate(&fg, i, t).unwrap()[(0, 0)];
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn invertibility_examples() {
        let frame = SliceFrame::default();
        let good = scalar_ap(&[(0.0, Quaternion::ONE), (1.0, q(0.0, 0.0, 0.5, 0.0))]);
        let (w, s) = default_window(&good);
        assert!(b_is_invertible(&good, &frame, w, s, 1e-8).unwrap().invertible);
        let bad = scalar_ap(&[(0.0, Quaternion::ONE), (1.0, -Quaternion::ONE)]);
        assert!(!b_is_invertible(&bad, &frame, w, s, 1e-8).unwrap().invertible);
        let kernel_only = BElement::new(1, vec![], Some(box_kernel(0.0, 1.0, 0.1, Quaternion::ONE))).unwrap();
        assert!(!b_is_invertible(&kernel_only, &frame, w, s, 1e-8).unwrap().invertible);
    }

    #[test]
    fn commensurable_inverse_matches_geometric_series() {
        let a = q(0.0, 0.2, 0.3, 0.0);
        let f = scalar_ap(&[(0.0, Quaternion::ONE), (0.5, -a)]);
        let g = b_star_inverse(&f, BInverseMode::Commensurable, &SliceFrame::default(), 1e-12).unwrap();
        for (k, expect) in (0..10).map(|k| (k, a.powi(k))) {
            let got = g.ap().iter().find(|(m, _)| (m - 0.5 * k as f64).abs() < 1e-9).map(|(_, c)| c[(0, 0)]);
            assert!((got.unwrap() - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn neumann_inverse_of_identity_plus_box() {
        let h = 0.05;
        let f = BElement::new(1, vec![(0.0, QMatrix::identity(1))], Some(box_kernel(0.0, 1.0, h, Quaternion::real(0.4)))).unwrap();
        let g = b_star_inverse(&f, BInverseMode::Neumann, &SliceFrame::default(), 1e-10).unwrap();
        let r = b_star_mul(&f, &g).unwrap().add(&BElement::identity(1).scale(-1.0)).unwrap().norm();
        assert!(r <= 1e-8, "residual {r}");
    }

    #[test]
    fn json_round_trip() {
        let f = BElement::new(1, vec![(0.5, QMatrix::identity(1))], Some(L1Part::symmetric(0.2, 0.1, (0..5).map(|k| QMatrix::scalar(1, Quaternion::real(k as f64))).collect()).unwrap())).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"L\":0.2"));
        let back: BElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back.norm(), f.norm());
    }
}
