//! Seeded generators for planted test instances.
#![allow(dead_code)]

use qwiener::apw::{box_kernel, BElement};
use qwiener::factorization::diag_powers;
use qwiener::rational::{QPoly, RationalQMatrix, RealPoly};
use qwiener::series::LaurentQSeries;
use qwiener::{QMatrix, Quaternion, SliceFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quat(r: &mut impl Rng) -> Quaternion {
    Quaternion::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

pub fn unit_quat(r: &mut impl Rng) -> Quaternion {
    loop {
        let q = quat(r);
        let n = q.norm();
        if n > 0.1 {
            return q * (1.0 / n);
        }
    }
}

pub fn qmatrix(r: &mut impl Rng, rows: usize, cols: usize) -> QMatrix {
    QMatrix::from_fn(rows, cols, |_, _| quat(r))
}

pub fn frame(r: &mut impl Rng) -> SliceFrame {
    loop {
        if let Ok(f) = SliceFrame::orthonormalized(quat(r).imag(), quat(r).imag()) {
            return f;
        }
    }
}

/// Identity plus a small perturbation, so the matrix is comfortably invertible.
pub fn well_conditioned(r: &mut impl Rng, n: usize) -> QMatrix {
    let e = qmatrix(r, n, n).scale(0.3 / n as f64);
    &QMatrix::identity(n) + &e
}

/// `C (I + p N)` with `||N|| < 1/2`: invertible in the causal algebra.
pub fn plus_factor(r: &mut impl Rng, n: usize) -> LaurentQSeries {
    let c = well_conditioned(r, n);
    let nn = qmatrix(r, n, n).scale(0.4 / (2.0 * n as f64));
    let f = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (1, nn)]).unwrap();
    LaurentQSeries::constant(c).unwrap().star_mul(&f).unwrap()
}

/// `(I + p^{-1} L) C` with `||L|| < 1/2`: invertible in the anticausal algebra.
pub fn minus_factor(r: &mut impl Rng, n: usize) -> LaurentQSeries {
    let c = well_conditioned(r, n);
    let l = qmatrix(r, n, n).scale(0.4 / (2.0 * n as f64));
    let f = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (-1, l)]).unwrap();
    f.star_mul(&LaurentQSeries::constant(c).unwrap()).unwrap()
}

/// A planted symbol `F_- D F_+` together with its indices.
pub struct Planted {
    pub f: LaurentQSeries,
    pub indices: Vec<i64>,
}

pub fn planted_factorization(r: &mut impl Rng, n: usize, indices: &[i64]) -> Planted {
    assert_eq!(indices.len(), n);
    let f = minus_factor(r, n).star_mul(&diag_powers(indices)).unwrap().star_mul(&plus_factor(r, n)).unwrap();
    let mut sorted = indices.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    Planted { f, indices: sorted }
}

pub fn random_indices(r: &mut impl Rng, n: usize) -> Vec<i64> {
    (0..n).map(|_| r.gen_range(-2..=2)).collect()
}

/// `F_- diag(p - q, 1, ..) F_+`; `det omega` vanishes on the circle iff `|q| = 1`.
pub fn planted_with_root(r: &mut impl Rng, n: usize, q: Quaternion) -> LaurentQSeries {
    let mut terms = vec![(0, QMatrix::identity(n))];
    let mut c0 = QMatrix::identity(n);
    c0[(0, 0)] = -q;
    terms[0].1 = c0;
    let mut c1 = QMatrix::zeros(n, n);
    c1[(0, 0)] = Quaternion::ONE;
    terms.push((1, c1));
    let mid = LaurentQSeries::from_terms(n, terms).unwrap();
    minus_factor(r, n).star_mul(&mid).unwrap().star_mul(&plus_factor(r, n)).unwrap()
}

/// Random scalar Laurent polynomial on `lo..=hi`.
pub fn scalar_series(r: &mut impl Rng, lo: i64, hi: i64) -> LaurentQSeries {
    let terms: Vec<(i64, Quaternion)> = (lo..=hi).map(|u| (u, quat(r))).collect();
    LaurentQSeries::scalar(&terms)
}

/// Random scalar element of `B`: a few frequencies plus a box kernel.
pub fn scalar_b(r: &mut impl Rng) -> BElement {
    let ap: Vec<(f64, QMatrix)> =
        (0..3).map(|_| (r.gen_range(-2.0..2.0), QMatrix::scalar(1, quat(r)))).collect();
    let a = r.gen_range(-1.0..0.5);
    let kernel = box_kernel(a, a + r.gen_range(0.2..1.0), 0.05, quat(r) * 0.5);
    BElement::new(1, ap, Some(kernel)).unwrap()
}

/// `F_- F_+` with `F_+ = I + p S N S^{-1}`, `F_- = I + p^{-1} S L S^{-1}`, `N` strictly upper and
/// `L` strictly lower: a canonical rational symbol with denominator `p`.
pub fn planted_canonical(r: &mut impl Rng, n: usize) -> (RationalQMatrix, LaurentQSeries, LaurentQSeries) {
    let s = well_conditioned(r, n);
    let s_inv = qwiener::embedding::qinverse(&s).unwrap();
    let raw = qmatrix(r, n, n);
    let upper = QMatrix::from_fn(n, n, |a, b| if b > a { raw[(a, b)] } else { Quaternion::ZERO });
    let lower = QMatrix::from_fn(n, n, |a, b| if b < a { raw[(a, b)] * 0.5 } else { Quaternion::ZERO });
    let conj = |m: &QMatrix| s.try_mul(m).unwrap().try_mul(&s_inv).unwrap();
    let fp = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (1, conj(&upper))]).unwrap();
    let fm = LaurentQSeries::from_terms(n, [(0, QMatrix::identity(n)), (-1, conj(&lower))]).unwrap();
    let prod = fm.star_mul(&fp).unwrap().shift(1);
    (RationalQMatrix::new(prod, RealPoly::new(vec![0.0, 1.0])).unwrap(), fm, fp)
}

/// A Laurent symbol with nonnegative shift `m` turned into a rational function `p^m F / p^m`.
pub fn series_as_rational(f: &LaurentQSeries) -> RationalQMatrix {
    let lo = f.support().map_or(0, |(lo, _)| lo.min(0));
    let mut den = vec![0.0; (-lo) as usize + 1];
    den[(-lo) as usize] = 1.0;
    RationalQMatrix::new(f.shift(-lo), RealPoly::new(den)).unwrap()
}

/// Random rational matrix with real denominator of degree `deg_den` and numerator of degree `deg_num`.
pub fn random_rational(r: &mut impl Rng, n: usize, deg_num: usize, deg_den: usize) -> RationalQMatrix {
    let roots: Vec<f64> = (0..deg_den).map(|_| r.gen_range(-3.0..3.0)).collect();
    let den = real_poly(&roots);
    let num = QPoly::from_terms(n, (0..=deg_num).map(|d| (d as i64, qmatrix(r, n, n)))).unwrap();
    RationalQMatrix::new(num, den).unwrap()
}

/// Scalar proper rational `prod (p - q_i) / prod (p - b_i)` with index
/// `#{Re q_i < 0} - #{b_i < 0}` on the imaginary line.
pub fn planted_line_symbol(r: &mut impl Rng, zeros: usize) -> (RationalQMatrix, i64) {
    let mut num = QPoly::identity(1);
    let mut index = 0;
    let mut roots = vec![];
    for _ in 0..zeros {
        let mut q = quat(r);
        let re = r.gen_range(0.3..2.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        q.w = re;
        if re < 0.0 {
            index += 1;
        }
        num = num.star_mul(&LaurentQSeries::scalar(&[(0, -q), (1, Quaternion::ONE)])).unwrap();
        let b = r.gen_range(0.3..2.5) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        if b < 0.0 {
            index -= 1;
        }
        roots.push(b);
    }
    (RationalQMatrix::new(num, real_poly(&roots)).unwrap(), index)
}

/// `prod (x - a)` over the given real roots.
pub fn real_poly(roots: &[f64]) -> RealPoly {
    roots.iter().fold(RealPoly::one(), |acc, &a| acc.mul(&RealPoly::linear(a)))
}
