//! Difference and convolution equations on the half-line `t > 0`, solved on a
//! uniform grid through the factorization of the operator symbol.
//!
//! Grid functions vanish for `t <= 0` and are taken to vanish beyond the
//! horizon.  Operators act by multiplying quaternion values on the left.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::apw::{BElement, L1Part};
use crate::continuous::{continuous_index, factor_continuous, CayleyFactor};
use crate::error::{Error, Result};
use crate::factorization::{factor_discrete, FactorOptions};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::rational::{qpoly_mul_real, QPoly, RationalQMatrix, RealPoly};
use crate::series::LaurentQSeries;

/// Default samples per unit length.
pub const DEFAULT_SAMPLES_PER_UNIT: usize = 64;
/// Default horizon.
pub const DEFAULT_HORIZON: usize = 32;

/// Samples of a function on `t_k = k / s`, `k = 1 ..= T s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub s: usize,
    pub samples: Vec<Quaternion>,
}

impl GridFunction {
    pub fn new(horizon: usize, s: usize, samples: Vec<Quaternion>) -> Result<Self> {
        if s == 0 || horizon == 0 {
            return Err(Error::InvalidInput("grid needs T > 0 and s > 0".into()));
        }
        if samples.len() != horizon * s {
            return Err(Error::InvalidInput(format!("expected {} samples, got {}", horizon * s, samples.len())));
        }
        Ok(GridFunction { horizon, s, samples })
    }

    pub fn zeros(horizon: usize, s: usize) -> Self {
        GridFunction { horizon, s, samples: vec![Quaternion::ZERO; horizon * s] }
    }

    pub fn from_fn(horizon: usize, s: usize, f: impl Fn(f64) -> Quaternion) -> Self {
        let samples = (1..=horizon * s).map(|k| f(k as f64 / s as f64)).collect();
        GridFunction { horizon, s, samples }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.s as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i` (0-based).
    pub fn t(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.s as f64
    }

    /// Value at grid index `k` (`t = k / s`), zero outside `1 ..= T s`.
    pub fn at(&self, k: i64) -> Quaternion {
        if k >= 1 && (k as usize) <= self.samples.len() {
            self.samples[k as usize - 1]
        } else {
            Quaternion::ZERO
        }
    }

    /// Limit at `0+` by quadratic extrapolation.
    pub fn value_at_zero(&self) -> Quaternion {
        match self.samples.len() {
            0 => Quaternion::ZERO,
            1 | 2 => self.samples[0],
            _ => self.samples[0] * 3.0 - self.samples[1] * 3.0 + self.samples[2],
        }
    }

    fn same_grid(&self, o: &GridFunction) -> Result<()> {
        if self.horizon != o.horizon || self.s != o.s {
            return Err(Error::DimensionMismatch("grid functions on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &GridFunction) -> Result<GridFunction> {
        self.same_grid(o)?;
        Ok(self.zip(o, |a, b| a + b))
    }

    pub fn sub(&self, o: &GridFunction) -> Result<GridFunction> {
        self.same_grid(o)?;
        Ok(self.zip(o, |a, b| a - b))
    }

    fn zip(&self, o: &GridFunction, f: impl Fn(Quaternion, Quaternion) -> Quaternion) -> GridFunction {
        let samples = self.samples.iter().zip(&o.samples).map(|(&a, &b)| f(a, b)).collect();
        GridFunction { samples, ..*self }
    }

    pub fn map(&self, f: impl Fn(Quaternion) -> Quaternion) -> GridFunction {
        GridFunction { samples: self.samples.iter().map(|&q| f(q)).collect(), ..*self }
    }

    pub fn left_mul(&self, q: Quaternion) -> GridFunction {
        self.map(|x| q * x)
    }

    pub fn right_mul(&self, q: Quaternion) -> GridFunction {
        self.map(|x| x * q)
    }

    /// Grid `L2` norm over samples with `t <= upto`.
    pub fn l2_norm_upto(&self, upto: f64) -> f64 {
        let h = self.h();
        let last = ((upto * self.s as f64).floor().max(0.0) as usize).min(self.samples.len());
        (h * self.samples[..last].iter().map(|q| q.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_upto(self.horizon as f64)
    }

    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// Largest `|phi(t)|` over `0 < t <= upto`.
    pub fn max_norm_upto(&self, upto: f64) -> f64 {
        let last = ((upto * self.s as f64).round().max(0.0) as usize).min(self.samples.len());
        self.samples[..last].iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// CSV with header `t,w,x,y,z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "w", "x", "y", "z"])?;
        for (i, q) in self.samples.iter().enumerate() {
            wr.serialize((self.t(i), q.w, q.x, q.y, q.z))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV format of [`GridFunction::write_csv`]; the grid step must be uniform starting at `h`.
    pub fn read_csv<R: Read>(r: R) -> Result<GridFunction> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != ["t", "w", "x", "y", "z"] {
            return Err(Error::InvalidInput(format!("expected header t,w,x,y,z, got {}", header.join(","))));
        }
        let mut ts = vec![];
        let mut samples = vec![];
        for rec in rd.deserialize() {
            let (t, w, x, y, z): (f64, f64, f64, f64, f64) = rec?;
            ts.push(t);
            samples.push(Quaternion::new(w, x, y, z));
        }
        let Some(&h) = ts.first() else {
            return Err(Error::InvalidInput("empty grid".into()));
        };
        let s = (1.0 / h).round();
        if !(s >= 1.0) || ((1.0 / h) - s).abs() > 1e-6 * s {
            return Err(Error::InvalidInput("first sample must sit at t = 1/s for an integer s".into()));
        }
        let s = s as usize;
        for (i, &t) in ts.iter().enumerate() {
            if (t - (i + 1) as f64 / s as f64).abs() > 1e-9 * (1.0 + t) {
                return Err(Error::InvalidInput(format!("sample {i} is off the uniform grid")));
            }
        }
        if samples.len() % s != 0 {
            return Err(Error::InvalidInput("horizon must be a whole number of units".into()));
        }
        GridFunction::new(samples.len() / s, s, samples)
    }
}

/// `(A phi)(t) = sum_n a_n phi(t - n)` with symbol `sum_n p^n a_n`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DifferenceOperator {
    pub terms: BTreeMap<i64, Quaternion>,
}

impl DifferenceOperator {
    pub fn new(terms: impl IntoIterator<Item = (i64, Quaternion)>) -> Self {
        let mut out = BTreeMap::new();
        for (n, a) in terms {
            *out.entry(n).or_insert(Quaternion::ZERO) += a;
        }
        DifferenceOperator { terms: out }
    }

    pub fn identity() -> Self {
        Self::new([(0, Quaternion::ONE)])
    }

    /// Operator with the given scalar symbol.
    pub fn from_series(s: &LaurentQSeries) -> Result<Self> {
        if !s.is_scalar() {
            return Err(Error::NotScalar);
        }
        Ok(Self::new(s.terms().map(|(u, c)| (u, c[(0, 0)]))))
    }

    pub fn symbol(&self) -> LaurentQSeries {
        let terms: Vec<(i64, Quaternion)> = self.terms.iter().map(|(&n, &a)| (n, a)).collect();
        LaurentQSeries::scalar(&terms)
    }

    /// Largest `n` with `a_{-n} != 0`, i.e. how far into the future the operator reads.
    pub fn anticausal_reach(&self) -> usize {
        self.terms.iter().filter(|(_, a)| a.norm() > 0.0).map(|(&n, _)| (-n).max(0) as usize).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct DiffTerm {
    n: i64,
    a: Quaternion,
}

#[derive(Serialize, Deserialize)]
struct DiffRepr {
    terms: Vec<DiffTerm>,
}

impl Serialize for DifferenceOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DiffRepr { terms: self.terms.iter().map(|(&n, &a)| DiffTerm { n, a }).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DifferenceOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DiffRepr::deserialize(d)?;
        Ok(DifferenceOperator::new(r.terms.into_iter().map(|t| (t.n, t.a))))
    }
}

/// `Sum_n a_n (n-shifted phi)`, reading zeros outside `(0, T]`.
pub fn apply_difference(a: &DifferenceOperator, phi: &GridFunction) -> GridFunction {
    let s = phi.s as i64;
    let samples = (1..=phi.len() as i64)
        .map(|k| a.terms.iter().map(|(&n, &c)| c * phi.at(k - n * s)).sum())
        .collect();
    GridFunction { samples, ..*phi }
}

/// `U^k`: right shift by `k` units for `k >= 0`, left shift `U^{(k)}` for `k < 0`; zero fill.
pub fn shift_u(k: i64, phi: &GridFunction) -> GridFunction {
    apply_difference(&DifferenceOperator::new([(k, Quaternion::ONE)]), phi)
}

/// Side of an exponential kernel term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Supported on `u > 0`.
    Causal,
    /// Supported on `u < 0`.
    Anticausal,
}

/// Kernel term `coeff |u|^power e^{-rate |u|}` on one side of the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coeff: Quaternion,
    pub power: u32,
    pub rate: f64,
    pub side: Side,
}

impl ExpTerm {
    fn value(&self, u: f64) -> Quaternion {
        let v = match self.side {
            Side::Causal => u,
            Side::Anticausal => -u,
        };
        if v < 0.0 {
            return Quaternion::ZERO;
        }
        let f = v.powi(self.power as i32) * (-self.rate * v).exp();
        if v == 0.0 {
            // Mean of the one-sided limits.
            return self.coeff * (0.5 * f);
        }
        self.coeff * f
    }

    /// Distance beyond which the term is below `eps` relative to its coefficient.
    fn reach(&self, eps: f64) -> f64 {
        let j = self.power as f64;
        let mut u = (j / self.rate).max(0.0);
        while u.powf(j) * (-self.rate * u).exp() > eps {
            u += 0.5 / self.rate;
        }
        u
    }

    /// `j! / (rate -+ p)^{j + 1}` times the coefficient, as a rational function of `p`.
    fn symbol(&self) -> RationalQMatrix {
        let j = self.power as usize;
        let fact: f64 = (1..=j).map(|x| x as f64).product();
        let lin = match self.side {
            Side::Causal => RealPoly::new(vec![self.rate, -1.0]),
            Side::Anticausal => RealPoly::new(vec![self.rate, 1.0]),
        };
        RationalQMatrix::new(QPoly::scalar(&[(0, self.coeff * fact)]), lin.powi(j + 1)).expect("nonzero denominator")
    }
}

/// Kernel samples on `[-L, L]` with step `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledKernel {
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
    pub samples: Vec<Quaternion>,
}

impl SampledKernel {
    fn value(&self, u: f64) -> Quaternion {
        let x = (u + self.l) / self.h;
        if x < 0.0 || x > (self.samples.len() - 1) as f64 {
            return Quaternion::ZERO;
        }
        let i = (x.floor() as usize).min(self.samples.len() - 2);
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }
}

/// `(B phi)(t) = c phi(t) + int_0^inf k(t - s) phi(s) ds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionOperator {
    pub c: Quaternion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<SampledKernel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exp_terms: Vec<ExpTerm>,
}

impl ConvolutionOperator {
    pub fn identity() -> Self {
        ConvolutionOperator { c: Quaternion::ONE, kernel: None, exp_terms: vec![] }
    }

    /// `phi - 2 int_0^t e^{s - t} phi(s) ds`, with symbol `(p + 1)/(p - 1)`.
    pub fn v() -> Self {
        ConvolutionOperator {
            c: Quaternion::ONE,
            kernel: None,
            exp_terms: vec![ExpTerm { coeff: Quaternion::real(-2.0), power: 0, rate: 1.0, side: Side::Causal }],
        }
    }

    /// `phi - 2 int_t^inf e^{t - s} phi(s) ds`, with symbol `(p - 1)/(p + 1)`.
    pub fn v_left_inverse() -> Self {
        ConvolutionOperator {
            c: Quaternion::ONE,
            kernel: None,
            exp_terms: vec![ExpTerm { coeff: Quaternion::real(-2.0), power: 0, rate: 1.0, side: Side::Anticausal }],
        }
    }

    pub fn kernel_value(&self, u: f64) -> Quaternion {
        let mut v: Quaternion = self.exp_terms.iter().map(|e| e.value(u)).sum();
        if let Some(k) = &self.kernel {
            v += k.value(u);
        }
        v
    }

    fn has_samples(&self) -> bool {
        self.kernel.as_ref().is_some_and(|k| k.samples.iter().any(|q| q.norm() > 0.0))
    }

    /// Rational symbol `c + sum_terms`; fails for sampled kernels.
    pub fn symbol_rational(&self) -> Result<RationalQMatrix> {
        if self.has_samples() {
            return Err(Error::SymbolNotRational("the kernel has a sampled part".into()));
        }
        let mut out = RationalQMatrix::polynomial(QPoly::scalar(&[(0, self.c)]))?;
        for e in &self.exp_terms {
            out = out.add(&e.symbol())?;
        }
        Ok(out.reduced(1e-12))
    }

    /// Symbol as an element of the almost-periodic algebra (sampled part only).
    pub fn symbol_b(&self) -> Result<BElement> {
        let l1 = match &self.kernel {
            Some(k) => Some(L1Part::symmetric(k.l, k.h, k.samples.iter().map(|&q| QMatrix::scalar(1, q)).collect())?),
            None => None,
        };
        BElement::new(1, vec![(0.0, QMatrix::scalar(1, self.c))], l1)
    }

    /// Operator with a proper scalar rational symbol whose poles are simple, real and nonzero.
    pub fn from_rational(f: &RationalQMatrix) -> Result<Self> {
        if f.n() != 1 || !f.is_proper() {
            return Err(Error::InvalidInput("need a proper scalar rational symbol".into()));
        }
        let f = f.reduced(1e-12);
        let den = f.den();
        let deg = den.degree() as i64;
        let c = f.num().coeff_or_zero(deg)[(0, 0)] * (1.0 / den.leading());
        let roots = den.roots();
        let mut exp_terms = vec![];
        let deriv = den.derivative();
        for (i, r) in roots.iter().enumerate() {
            let simple = roots.iter().enumerate().all(|(j, o)| j == i || (o - r).norm() > 1e-6 * (1.0 + r.norm()));
            if r.im.abs() > 1e-9 || !simple || r.re.abs() < 1e-9 {
                return Err(Error::OutOfScope("only simple real nonzero poles are supported".into()));
            }
            let p0 = r.re;
            let n_at = f.num().evaluate(Quaternion::real(p0))?[(0, 0)];
            let rho = n_at * (1.0 / deriv.eval(p0));
            let term = if p0 > 0.0 {
                ExpTerm { coeff: -rho, power: 0, rate: p0, side: Side::Causal }
            } else {
                ExpTerm { coeff: rho, power: 0, rate: -p0, side: Side::Anticausal }
            };
            exp_terms.push(term);
        }
        Ok(ConvolutionOperator { c, kernel: None, exp_terms })
    }

    /// Distance into the future read by the kernel.
    pub fn anticausal_reach(&self) -> f64 {
        let e = self
            .exp_terms
            .iter()
            .filter(|e| e.side == Side::Anticausal && e.coeff.norm() > 0.0)
            .map(|e| e.reach(1e-12 / (1.0 + e.coeff.norm())))
            .fold(0.0, f64::max);
        let k = self.kernel.as_ref().map_or(0.0, |k| k.l);
        e.max(k)
    }
}

/// `M_i = int_0^h v^i e^{-rate v} dv` for `i = 0 ..= top`.
fn exp_moments(rate: f64, h: f64, top: usize) -> Vec<f64> {
    let x = rate * h;
    if x <= 1.0 {
        // Power series in -rate v, exact to round-off for small steps.
        (0..=top)
            .map(|i| {
                let mut term = h.powi(i as i32 + 1);
                let mut sum = term / (i + 1) as f64;
                for n in 1..80 {
                    term *= -x / n as f64;
                    let add = term / (n + i + 1) as f64;
                    sum += add;
                    if add.abs() <= 1e-18 * sum.abs() {
                        break;
                    }
                }
                sum
            })
            .collect()
    } else {
        let e = (-x).exp();
        let mut m = vec![(1.0 - e) / rate];
        for i in 1..=top {
            m.push((i as f64 * m[i - 1] - h.powi(i as i32) * e) / rate);
        }
        m
    }
}

/// `int (t - s)^j e^{-rate (t - s)} phi(s) ds` over `s < t` (causal) or the mirrored
/// integral over `s > t`, for the piecewise-linear interpolant of `phi` with value
/// `phi0` at zero.  Returns the values at every grid point.
fn exp_integral(rate: f64, power: u32, side: Side, phi: &GridFunction, phi0: Quaternion) -> Vec<Quaternion> {
    let j = power as usize;
    let h = phi.h();
    let e = (-rate * h).exp();
    let m = exp_moments(rate, h, j + 1);
    // Weight on the far node (a) and the near node (b) of each step.
    let a: Vec<f64> = (0..=j).map(|i| m[i + 1] / h).collect();
    let b: Vec<f64> = (0..=j).map(|i| m[i] - m[i + 1] / h).collect();
    // binom[i][l] h^{i - l}
    let shift: Vec<Vec<f64>> = (0..=j)
        .map(|i| {
            let mut row = vec![0.0; i + 1];
            let mut c = 1.0;
            for l in (0..=i).rev() {
                row[l] = c * h.powi((i - l) as i32);
                c = c * (l as f64) / (i - l + 1) as f64;
            }
            row
        })
        .collect();
    let n = phi.len();
    let mut state = vec![Quaternion::ZERO; j + 1];
    let step = |state: &mut Vec<Quaternion>, far: Quaternion, near: Quaternion| {
        let old = state.clone();
        for i in 0..=j {
            let carried: Quaternion = (0..=i).map(|l| old[l] * shift[i][l]).sum();
            state[i] = carried * e + far * a[i] + near * b[i];
        }
    };
    let mut out = vec![Quaternion::ZERO; n];
    match side {
        Side::Causal => {
            let mut prev = phi0;
            for (k, &cur) in phi.samples.iter().enumerate() {
                step(&mut state, prev, cur);
                out[k] = state[j];
                prev = cur;
            }
        }
        Side::Anticausal => {
            for k in (0..n.saturating_sub(1)).rev() {
                step(&mut state, phi.samples[k + 1], phi.samples[k]);
                out[k] = state[j];
            }
        }
    }
    out
}

/// `c phi + int k(t - s) phi(s) ds` on the grid.
///
/// Exponential terms are integrated exactly against the linear interpolant of
/// `phi`; a sampled kernel uses the trapezoid rule with its mean value at a jump.
pub fn apply_convolution(b: &ConvolutionOperator, phi: &GridFunction) -> GridFunction {
    let n = phi.len();
    let h = phi.h();
    let phi0 = phi.value_at_zero();
    let mut out: Vec<Quaternion> = phi.samples.iter().map(|&x| b.c * x).collect();
    for e in &b.exp_terms {
        for (o, v) in out.iter_mut().zip(exp_integral(e.rate, e.power, e.side, phi, phi0)) {
            *o += e.coeff * v;
        }
    }
    if let Some(kernel) = &b.kernel {
        // Kernel values on the grid of differences.
        let table: Vec<Quaternion> = (-(n as i64)..=(n as i64)).map(|d| kernel.value(d as f64 * h)).collect();
        let k_at = |d: i64| table[(d + n as i64) as usize];
        for (m, o) in out.iter_mut().enumerate() {
            let m1 = m as i64 + 1;
            let mut acc = k_at(m1) * phi0 * 0.5;
            for k in 1..=n as i64 {
                let w = if k == n as i64 { 0.5 } else { 1.0 };
                acc += k_at(m1 - k) * phi.samples[k as usize - 1] * w;
            }
            *o += acc * h;
        }
    }
    GridFunction { samples: out, ..*phi }
}

/// `V^m` for `m >= 0` and `V^{(m)}` (the left inverse, reading the future) for `m < 0`.
pub fn op_v(m: i64, phi: &GridFunction) -> GridFunction {
    let mut out = phi.clone();
    for _ in 0..m.unsigned_abs() {
        out = if m > 0 {
            let j = exp_integral(1.0, 0, Side::Causal, &out, out.value_at_zero());
            GridFunction { samples: out.samples.iter().zip(j).map(|(&x, y)| x - y * 2.0).collect(), ..out }
        } else {
            let j = exp_integral(1.0, 0, Side::Anticausal, &out, Quaternion::ZERO);
            GridFunction { samples: out.samples.iter().zip(j).map(|(&x, y)| x - y * 2.0).collect(), ..out }
        };
    }
    out
}

/// `sum_u S_u V^u phi` for a scalar series in the Cayley variable.
pub fn apply_v_series(s: &LaurentQSeries, phi: &GridFunction) -> Result<GridFunction> {
    if !s.is_scalar() {
        return Err(Error::NotScalar);
    }
    let mut out = GridFunction::zeros(phi.horizon, phi.s);
    let Some((lo, hi)) = s.support() else {
        return Ok(out);
    };
    let mut pos = phi.clone();
    for u in 0..=hi.max(0) {
        if u >= lo {
            out = out.add(&pos.left_mul(s.coeff_or_zero(u)[(0, 0)]))?;
        }
        if u < hi {
            pos = op_v(1, &pos);
        }
    }
    let mut neg = phi.clone();
    for u in 1..=(-lo).max(0) {
        neg = op_v(-1, &neg);
        if -u <= hi {
            out = out.add(&neg.left_mul(s.coeff_or_zero(-u)[(0, 0)]))?;
        }
    }
    Ok(out)
}

/// A Cayley-variable factor as a single series, when its scalar denominator is a monomial.
fn cayley_factor_series(f: &CayleyFactor) -> Result<LaurentQSeries> {
    let den = RealPoly::new(f.scalar_den.clone());
    let deg = den.degree();
    if den.coeffs()[..deg].iter().any(|&c| c != 0.0) {
        return Err(Error::InternalInvariantViolation("factor denominator is not a monomial".into()));
    }
    let num = RealPoly::new(f.scalar_num.clone()).scale(1.0 / den.leading());
    let scalar = qpoly_mul_real(&LaurentQSeries::identity(1), &num).shift(-(deg as i64));
    f.series.star_mul(&scalar)
}

/// One moment `int_0^inf g(t) t^k e^{-t} dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub k: u32,
    pub value: Quaternion,
    /// Bound on the part of the integral beyond the horizon.
    pub tail_bound: f64,
    pub pass: bool,
}

/// Composite Simpson weights for `n` intervals (Simpson 3/8 on the last three when `n` is odd).
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let even = if n % 2 == 0 { n } else { n.saturating_sub(3) };
    for i in (0..even).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if n % 2 == 1 && n >= 3 {
        for (o, c) in [(0, 1.0), (1, 3.0), (2, 3.0), (3, 1.0)] {
            w[even + o] += 3.0 * h / 8.0 * c;
        }
    } else if n == 1 {
        w[0] += h / 2.0;
        w[1] += h / 2.0;
    }
    w
}

/// Moments of `g` against `t^k e^{-t}`, `k < m`, with a bound on the truncated tail added to `tol`.
pub fn moment_test(g: &GridFunction, m: u32, tol: f64) -> Vec<MomentValue> {
    let n = g.len();
    let h = g.h();
    let w = simpson_weights(n, h);
    let big_t = g.horizon as f64;
    let tail_sup = g.samples[n.saturating_sub(g.s)..].iter().map(|q| q.norm()).fold(0.0, f64::max);
    (0..m)
        .map(|k| {
            let mut value = if k == 0 { g.value_at_zero() * w[0] } else { Quaternion::ZERO };
            for i in 1..=n {
                let t = i as f64 * h;
                value += g.samples[i - 1] * (w[i] * t.powi(k as i32) * (-t).exp());
            }
            // int_T^inf t^k e^{-t} dt = e^{-T} sum_{i <= k} k!/i! T^i
            let mut term = 1.0;
            let mut gamma = 0.0;
            for i in (0..=k).rev() {
                gamma += term * big_t.powi(i as i32);
                term *= i.max(1) as f64;
            }
            let tail_bound = tail_sup * (-big_t).exp() * gamma;
            MomentValue { k, value, tail_bound, pass: value.norm() <= tol + tail_bound }
        })
        .collect()
}

/// Outcome of a half-line solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    /// Factorization index of the symbol.
    pub index: i64,
    pub solvable: bool,
    pub verdict: String,
    pub solution: Option<GridFunction>,
    /// Basis (over the quaternions acting on the right) of the homogeneous solutions.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub homogeneous_basis: Vec<GridFunction>,
    /// Grid `L2` norm of `A psi - g` on `(0, T - guard_band]`.
    pub residual: f64,
    /// Width of the band below the horizon where outputs depend on data beyond it.
    pub guard_band: f64,
    /// For a positive index: the quantity that must vanish for solvability.
    pub obstruction: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub moments: Vec<MomentValue>,
}

/// Solves `A psi = g` for a difference operator with invertible symbol.
pub fn solve_difference(a: &DifferenceOperator, g: &GridFunction, frame: &SliceFrame, tol: f64) -> Result<SolveReport> {
    let fr = factor_discrete(&a.symbol(), frame, &FactorOptions::default())?;
    let k = fr.indices[0];
    let a_minus_inv = DifferenceOperator::from_series(&fr.f_minus_inv)?;
    let a_plus_inv = DifferenceOperator::from_series(&fr.f_plus_inv)?;
    let y = apply_difference(&a_minus_inv, g);
    let guard = a.anticausal_reach() as f64;
    let s = g.s as i64;
    let mut report = SolveReport {
        schema_version: 1,
        index: k,
        solvable: true,
        verdict: String::new(),
        solution: None,
        homogeneous_basis: vec![],
        residual: f64::NAN,
        guard_band: guard,
        obstruction: 0.0,
        moments: vec![],
    };
    let x = if k > 0 {
        report.obstruction = y.max_norm_upto(k as f64);
        if report.obstruction > tol {
            report.solvable = false;
            report.verdict = format!("unsolvable: nonzero on (0,{k}]");
            return Ok(report);
        }
        shift_u(-k, &y)
    } else {
        shift_u(-k, &y)
    };
    let psi = apply_difference(&a_plus_inv, &x);
    if k < 0 {
        for b in 1..=(-k * s) {
            let mut delta = GridFunction::zeros(g.horizon, g.s);
            delta.samples[b as usize - 1] = Quaternion::ONE;
            report.homogeneous_basis.push(apply_difference(&a_plus_inv, &delta));
        }
    }
    let r = apply_difference(a, &psi).sub(g)?;
    report.residual = r.l2_norm_upto(g.horizon as f64 - guard);
    report.verdict = match k {
        0 => "unique solution".into(),
        k if k > 0 => "solvable: unique solution".into(),
        k => format!("solvable: particular solution plus {}-unit homogeneous family", -k),
    };
    report.solution = Some(psi);
    Ok(report)
}

/// Solves `B psi = g` for a convolution operator with a rational invertible symbol.
pub fn solve_convolution(b: &ConvolutionOperator, g: &GridFunction, frame: &SliceFrame, tol: f64) -> Result<SolveReport> {
    let symbol = b.symbol_rational()?;
    let fr = factor_continuous(&symbol, frame, &FactorOptions::default())?;
    let m = fr.indices[0];
    let b_minus_inv = cayley_factor_series(&fr.f_minus_inv)?;
    let b_plus_inv = cayley_factor_series(&fr.f_plus_inv)?;
    let y = apply_v_series(&b_minus_inv, g)?;
    let guard = b.anticausal_reach().min(g.horizon as f64 / 2.0);
    let mut report = SolveReport {
        schema_version: 1,
        index: m,
        solvable: true,
        verdict: String::new(),
        solution: None,
        homogeneous_basis: vec![],
        residual: f64::NAN,
        guard_band: guard,
        obstruction: 0.0,
        moments: vec![],
    };
    if m > 0 {
        report.moments = moment_test(&y, m as u32, tol);
        report.obstruction = report.moments.iter().map(|v| v.value.norm()).fold(0.0, f64::max);
        if report.moments.iter().any(|v| !v.pass) {
            report.solvable = false;
            report.verdict = format!("unsolvable: moments of order < {m} do not vanish");
            return Ok(report);
        }
    }
    let x = op_v(-m, &y);
    let psi = apply_v_series(&b_plus_inv, &x)?;
    if m < 0 {
        for j in 0..(-m) {
            let basis = GridFunction::from_fn(g.horizon, g.s, |t| Quaternion::real(t.powi(j as i32) * (-t).exp()));
            report.homogeneous_basis.push(apply_v_series(&b_plus_inv, &basis)?);
        }
    }
    let r = apply_convolution(b, &psi).sub(g)?;
    report.residual = r.l2_norm_upto(g.horizon as f64 - guard);
    report.verdict = match m {
        0 => "unique solution".into(),
        m if m > 0 => "solvable: unique solution".into(),
        m => format!("solvable: particular solution plus {}-dimensional homogeneous family", -m),
    };
    report.solution = Some(psi);
    Ok(report)
}

/// Symbol of an operator, for [`index_of_symbol`].
#[derive(Clone, Debug)]
pub enum Symbol {
    Discrete(LaurentQSeries),
    Continuous(RationalQMatrix),
}

/// Factorization index of a symbol: winding of `det omega` on the circle, or half
/// its argument increment along the line.
pub fn index_of_symbol(symbol: &Symbol, frame: &SliceFrame) -> Result<i64> {
    match symbol {
        Symbol::Discrete(s) => crate::circle::winding_index(s, frame, 64),
        Symbol::Continuous(r) => continuous_index(r, frame),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: usize = 64;
    const T: usize = 32;

    fn bump(t: f64) -> Quaternion {
        // Smooth, compactly supported in (0, 6).
        if t <= 0.0 || t >= 6.0 {
            return Quaternion::ZERO;
        }
        let b = (-1.0 / (t * (6.0 - t))).exp() * 20.0;
        Quaternion::new(b, 0.5 * b * t.sin(), -b, 0.3 * b * t)
    }

    #[test]
    fn shifts_and_difference_operators() {
        let phi = GridFunction::from_fn(T, S, bump);
        assert_eq!(apply_difference(&DifferenceOperator::identity(), &phi), phi);
        let sh = shift_u(1, &phi);
        assert_eq!(sh.samples[S], phi.samples[0]);
        assert!(sh.samples[..S].iter().all(|q| *q == Quaternion::ZERO));
        assert_eq!(shift_u(-1, &shift_u(1, &phi)), phi);
        let boxed = GridFunction::from_fn(T, S, |t| if t <= 1.0 { Quaternion::ONE } else { Quaternion::ZERO });
        assert!(shift_u(1, &shift_u(-1, &boxed)).max_norm() == 0.0);
    }

    #[test]
    fn geometric_telescoping() {
        let q = Quaternion::new(0.0, 0.6, 0.0, 0.8);
        let a = DifferenceOperator::new([(0, Quaternion::ONE), (1, -q * 0.5)]);
        let phi = GridFunction::from_fn(T, S, |t| {
            let n = (t - 1e-12).floor().max(0.0) as i32;
            let mut p = Quaternion::ONE;
            for _ in 0..n {
                p = p * q * 0.5;
            }
            p
        });
        let out = apply_difference(&a, &phi);
        for (i, v) in out.samples.iter().enumerate() {
            let expect = if out.t(i) <= 1.0 + 1e-12 { Quaternion::ONE } else { Quaternion::ZERO };
            assert!((*v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_equation_image() {
        let frame = SliceFrame::default();
        let a = DifferenceOperator::new([(1, Quaternion::ONE)]);
        let boxed = GridFunction::from_fn(T, S, |t| if t <= 1.0 { Quaternion::ONE } else { Quaternion::ZERO });
        let r = solve_difference(&a, &boxed, &frame, 1e-8).unwrap();
        assert!(!r.solvable);
        assert_eq!(r.verdict, "unsolvable: nonzero on (0,1]");
        let g = shift_u(1, &GridFunction::from_fn(T, S, bump));
        let r = solve_difference(&a, &g, &frame, 1e-8).unwrap();
        assert!(r.solvable);
        let psi = r.solution.unwrap();
        assert!(psi.sub(&shift_u(-1, &g)).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn planted_difference_solution() {
        let frame = SliceFrame::default();
        let q = Quaternion::new(0.0, 0.6, 0.0, 0.8);
        let r = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        for k in [-1i64, 0, 1, 2] {
            let sym = LaurentQSeries::scalar(&[(0, Quaternion::ONE), (-1, -q * 0.5)])
                .star_mul(&LaurentQSeries::scalar(&[(k, Quaternion::ONE)]))
                .unwrap()
                .star_mul(&LaurentQSeries::scalar(&[(0, Quaternion::ONE), (1, -r * (1.0 / 3.0))]))
                .unwrap();
            let a = DifferenceOperator::from_series(&sym).unwrap();
            let psi = GridFunction::from_fn(T, S, bump);
            let g = apply_difference(&a, &psi);
            let rep = solve_difference(&a, &g, &frame, 1e-8).unwrap();
            assert_eq!(rep.index, k);
            assert!(rep.solvable);
            assert!(rep.residual < 1e-8, "k={k} residual {}", rep.residual);
            if k >= 0 {
                let err = rep.solution.unwrap().sub(&psi).unwrap().l2_norm();
                assert!(err < 1e-6, "k={k} error {err}");
            } else {
                for basis in rep.homogeneous_basis.iter().step_by(7) {
                    let ab = apply_difference(&a, basis);
                    assert!(ab.l2_norm_upto(T as f64 - rep.guard_band) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn v_of_exponential() {
        let phi = GridFunction::from_fn(T, S, |t| Quaternion::real((-t).exp()));
        let out = op_v(1, &phi);
        let exact = GridFunction::from_fn(T, S, |t| Quaternion::real((1.0 - 2.0 * t) * (-t).exp()));
        let e1 = out.sub(&exact).unwrap().max_norm();
        assert!(e1 < 1e-4);
        // Second order: halving h reduces the error about fourfold.
        let fine = op_v(1, &GridFunction::from_fn(T, 2 * S, |t| Quaternion::real((-t).exp())));
        let e2 = fine.sub(&GridFunction::from_fn(T, 2 * S, |t| Quaternion::real((1.0 - 2.0 * t) * (-t).exp()))).unwrap().max_norm();
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
        // Left inverse.
        let back = op_v(-1, &out);
        assert!(back.sub(&phi).unwrap().l2_norm() < 1e-4);
    }

    #[test]
    fn convolution_matches_closed_forms() {
        // c = 0, k = box on [0, 1], phi = box on (0, 1]: triangular ramp min(t, 2 - t) on [0, 2].
        let kernel = SampledKernel {
            l: 2.0,
            h: 1.0 / S as f64,
            samples: (0..=4 * S).map(|j| {
                let u = -2.0 + j as f64 / S as f64;
                if (0.0..=1.0).contains(&u) { Quaternion::ONE } else { Quaternion::ZERO }
            }).collect(),
        };
        let b = ConvolutionOperator { c: Quaternion::ZERO, kernel: Some(kernel), exp_terms: vec![] };
        let phi = GridFunction::from_fn(4, S, |t| if t <= 1.0 { Quaternion::ONE } else { Quaternion::ZERO });
        let out = apply_convolution(&b, &phi);
        for (i, v) in out.samples.iter().enumerate() {
            let t = out.t(i);
            let exact = if t <= 1.0 { t } else if t <= 2.0 { 2.0 - t } else { 0.0 };
            assert!((v.w - exact).abs() < 2.0 / S as f64, "t={t} {} {exact}", v.w);
        }
        // V as a convolution operator agrees with op_v.
        let phi = GridFunction::from_fn(T, S, bump);
        let d = apply_convolution(&ConvolutionOperator::v(), &phi).sub(&op_v(1, &phi)).unwrap();
        assert!(d.max_norm() < 1e-12);
        // Right linearity.
        let q = Quaternion::new(0.1, 2.0, -1.0, 0.4);
        let lhs = apply_convolution(&ConvolutionOperator::v(), &phi.right_mul(q));
        let rhs = apply_convolution(&ConvolutionOperator::v(), &phi).right_mul(q);
        assert!(lhs.sub(&rhs).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn moments_of_known_functions() {
        let g1 = GridFunction::from_fn(T, S, |t| Quaternion::real((1.0 - 2.0 * t) * (-t).exp()));
        let g2 = GridFunction::from_fn(T, S, |t| Quaternion::real((-t).exp()));
        let m1 = moment_test(&g1, 1, 1e-6);
        let m2 = moment_test(&g2, 1, 1e-6);
        assert!(m1[0].pass && m1[0].value.norm() < 1e-6);
        assert!(!m2[0].pass && (m2[0].value.w - 0.5).abs() < 1e-6);
        assert!(moment_test(&GridFunction::zeros(T, S), 3, 1e-12).iter().all(|m| m.pass));
    }

    #[test]
    fn v_equation() {
        let frame = SliceFrame::default();
        let v = ConvolutionOperator::v();
        assert_eq!(index_of_symbol(&Symbol::Continuous(v.symbol_rational().unwrap()), &frame).unwrap(), 1);
        let g = GridFunction::from_fn(T, S, |t| Quaternion::real((1.0 - 2.0 * t) * (-t).exp()));
        let r = solve_convolution(&v, &g, &frame, 1e-6).unwrap();
        assert_eq!(r.index, 1);
        assert!(r.solvable);
        assert!(r.residual < 1e-4, "{}", r.residual);
        let psi = r.solution.unwrap();
        let exact = GridFunction::from_fn(T, S, |t| Quaternion::real((-t).exp()));
        assert!(psi.sub(&exact).unwrap().l2_norm() < 1e-4);
        let bad = GridFunction::from_fn(T, S, |t| Quaternion::real((-t).exp()));
        let r = solve_convolution(&v, &bad, &frame, 1e-6).unwrap();
        assert!(!r.solvable);
    }

    #[test]
    fn left_inverse_of_v_has_exponential_kernel() {
        let frame = SliceFrame::default();
        let b = ConvolutionOperator::v_left_inverse();
        let g = |s: usize| GridFunction::from_fn(T, s, |t| Quaternion::new(1.0, 0.0, -0.5, 0.2) * (t * t * (-t).exp()));
        let r = solve_convolution(&b, &g(S), &frame, 1e-6).unwrap();
        assert_eq!(r.index, -1);
        assert_eq!(r.homogeneous_basis.len(), 1);
        let hb = apply_convolution(&b, &r.homogeneous_basis[0]);
        assert!(hb.l2_norm_upto(T as f64 - r.guard_band) < 1e-4);
        assert!(r.residual < 1e-4, "{}", r.residual);
        let fine = solve_convolution(&b, &g(2 * S), &frame, 1e-6).unwrap();
        assert!(r.residual / fine.residual > 3.5, "{} {}", r.residual, fine.residual);
    }

    #[test]
    fn identity_operators() {
        let frame = SliceFrame::default();
        let g = GridFunction::from_fn(T, S, bump);
        let r = solve_difference(&DifferenceOperator::identity(), &g, &frame, 1e-8).unwrap();
        assert_eq!(r.index, 0);
        assert_eq!(r.solution.unwrap(), g);
        let r = solve_convolution(&ConvolutionOperator::identity(), &g, &frame, 1e-8).unwrap();
        assert_eq!(r.index, 0);
        assert!(r.solution.unwrap().sub(&g).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn rational_round_trip_and_csv() {
        let f = ConvolutionOperator {
            c: Quaternion::new(1.0, 0.2, 0.0, 0.0),
            kernel: None,
            exp_terms: vec![
                ExpTerm { coeff: Quaternion::new(0.0, 0.5, 0.1, 0.0), power: 0, rate: 2.0, side: Side::Causal },
                ExpTerm { coeff: Quaternion::real(0.3), power: 0, rate: 3.0, side: Side::Anticausal },
            ],
        };
        let back = ConvolutionOperator::from_rational(&f.symbol_rational().unwrap()).unwrap();
        let phi = GridFunction::from_fn(8, 16, bump);
        assert!(apply_convolution(&f, &phi).sub(&apply_convolution(&back, &phi)).unwrap().max_norm() < 1e-10);
        let mut buf = vec![];
        phi.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,w,x,y,z\n"));
        let read = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(read, phi);
        let js = serde_json::to_string(&DifferenceOperator::new([(1, Quaternion::ONE)])).unwrap();
        assert_eq!(js, r#"{"terms":[{"n":1,"a":[1.0,0.0,0.0,0.0]}]}"#);
    }
}
