//! Sampling on the unit circle: invertibility certificates, winding numbers
//! and FFT-based star-inversion.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::embedding::{self, chi_inverse};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::series::{ComplexLaurentSeries, LaurentQSeries};
use crate::quaternion::SliceFrame;

/// Largest grid used by adaptive refinement.
pub const GRID_CAP: usize = 1 << 20;
/// Largest truncation used by adaptive star-inversion.
pub const TRUNC_CAP: i64 = 1 << 15;

/// Outcome of an invertibility test on the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityCertificate {
    pub invertible: bool,
    /// Minimum of `|det omega(F)|` over the sampled and locally refined circle.
    pub min_modulus: f64,
    /// Angle where the minimum was found.
    pub argmin: f64,
    pub grid: usize,
    /// Winding number of `det omega(F)`; present when invertible.
    pub det_winding: Option<i64>,
    /// Half the determinant winding; present when invertible.
    pub index: Option<i64>,
}

/// Roots of unity `e^{2 pi i k / n}`.
pub fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / n as f64)).collect()
}

/// Values of a complex Laurent series on an `n`-point circle grid.
pub fn sample_series(f: &ComplexLaurentSeries, n: usize) -> Vec<CMatrix> {
    let w = roots_of_unity(n);
    let size = f.size();
    let mut out = vec![CMatrix::zeros(size, size); n];
    for (u, c) in f.terms() {
        let step = u.rem_euclid(n as i64) as usize;
        for (k, v) in out.iter_mut().enumerate() {
            *v += c * w[(k * step) % n];
        }
    }
    out
}

/// Fourier coefficients `c_u = (1/n) sum_k S_k z_k^{-u}` for `u` in `[-n/2, n/2)`.
pub fn fourier_coefficients(samples: &[CMatrix]) -> Vec<(i64, CMatrix)> {
    let n = samples.len();
    if n == 0 {
        return vec![];
    }
    let (r, c) = samples[0].shape();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut coeffs = vec![CMatrix::zeros(r, c); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for a in 0..r {
        for b in 0..c {
            for (k, s) in samples.iter().enumerate() {
                buf[k] = s[(a, b)];
            }
            fft.process(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                coeffs[k][(a, b)] = v * scale;
            }
        }
    }
    let half = (n / 2) as i64;
    let mut out: Vec<(i64, CMatrix)> = coeffs
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let k = k as i64;
            (if k >= half { k - n as i64 } else { k }, m)
        })
        .collect();
    out.sort_by_key(|(u, _)| *u);
    out
}

/// Fourier coefficients of a scalar sample sequence, `u` in `[-n/2, n/2)`.
pub fn fourier_coefficients_scalar(samples: &[Complex64]) -> Vec<(i64, Complex64)> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let half = (n / 2) as i64;
    let mut out: Vec<(i64, Complex64)> = buf
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let k = k as i64;
            (if k >= half { k - n as i64 } else { k }, v / n as f64)
        })
        .collect();
    out.sort_by_key(|(u, _)| *u);
    out
}

/// Winding number of a closed sampled curve, or `None` if some step turns by `pi/2` or more.
pub fn winding_of_samples(values: &[Complex64]) -> Option<i64> {
    let n = values.len();
    let mut total = 0.0;
    for k in 0..n {
        let a = values[k];
        let b = values[(k + 1) % n];
        let d = (b / a).arg();
        if !d.is_finite() || d.abs() >= PI / 2.0 {
            return None;
        }
        total += d;
    }
    Some((total / TAU).round() as i64)
}

/// Minimizes `g` on `[a, b]` by golden-section search.
pub fn golden_min(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..iters {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if gc < gd { (c, gc) } else { (d, gd) }
}

/// Minimum of `|h(e^{i theta})|` from grid samples refined near the smallest local minima.
pub fn refined_min_modulus(
    samples: &[Complex64],
    h: impl Fn(Complex64) -> Complex64,
) -> (f64, f64) {
    let n = samples.len();
    let abs: Vec<f64> = samples.iter().map(|z| z.norm()).collect();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| abs[k] <= abs[(k + n - 1) % n] && abs[k] <= abs[(k + 1) % n])
        .collect();
    minima.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    minima.truncate(16);
    let step = TAU / n as f64;
    let mut best = (abs.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    if let Some(k) = (0..n).min_by(|&a, &b| abs[a].total_cmp(&abs[b])) {
        best.1 = k as f64 * step;
    }
    for k in minima {
        let t = k as f64 * step;
        let (theta, val) = golden_min(|s| h(Complex64::from_polar(1.0, s)).norm(), t - step, t + step, 80);
        if val < best.0 {
            best = (val, theta.rem_euclid(TAU));
        }
    }
    best
}

fn det_of(f: &ComplexLaurentSeries, z: Complex64) -> Complex64 {
    linalg::det(&f.eval(z))
}

/// Initial grid size for a series of the given support width.
pub fn default_grid(width: i64, requested: usize) -> usize {
    requested.max(8 * width.max(1) as usize).max(16).next_power_of_two()
}

/// Tests invertibility of `F` in the Wiener algebra via `det omega(F)` on the circle.
pub fn is_invertible(
    f_series: &LaurentQSeries,
    frame: &SliceFrame,
    grid: usize,
    tol: f64,
) -> Result<InvertibilityCertificate> {
    let om = f_series.omega(frame);
    is_invertible_complex(&om, f_series.width(), grid, tol)
}

/// Same test for a complex Laurent series.
pub fn is_invertible_complex(
    om: &ComplexLaurentSeries,
    width: i64,
    grid: usize,
    tol: f64,
) -> Result<InvertibilityCertificate> {
    let mut n = default_grid(width, grid);
    loop {
        let dets: Vec<Complex64> = sample_series(om, n).iter().map(linalg::det).collect();
        let (min_modulus, argmin) = refined_min_modulus(&dets, |z| det_of(om, z));
        if min_modulus <= tol || om.support().is_none() {
            return Ok(InvertibilityCertificate {
                invertible: false,
                min_modulus,
                argmin,
                grid: n,
                det_winding: None,
                index: None,
            });
        }
        if let Some(w) = winding_of_samples(&dets) {
            return Ok(InvertibilityCertificate {
                invertible: true,
                min_modulus,
                argmin,
                grid: n,
                det_winding: Some(w),
                index: Some(w.div_euclid(2)),
            });
        }
        n *= 2;
        if n > GRID_CAP {
            return Err(Error::GridTooCoarse { grid: n / 2 });
        }
    }
}

/// Half the winding number of `det omega(F)` along the unit circle.
pub fn winding_index(f_series: &LaurentQSeries, frame: &SliceFrame, grid: usize) -> Result<i64> {
    let cert = is_invertible(f_series, frame, grid, 1e-12)?;
    winding_from_certificate(&cert)
}

pub(crate) fn winding_from_certificate(cert: &InvertibilityCertificate) -> Result<i64> {
    let w = cert.det_winding.ok_or(Error::NotInvertible { min_modulus: cert.min_modulus })?;
    if w % 2 != 0 {
        return Err(Error::InternalInvariantViolation(format!("odd determinant winding {w}")));
    }
    Ok(w / 2)
}

/// Laurent coefficients of `omega(F)^{-1}` computed on an `n`-point grid.
pub fn inverse_coefficients(om: &ComplexLaurentSeries, n: usize, tol: f64) -> Result<Vec<(i64, CMatrix)>> {
    let samples = sample_series(om, n);
    let mut inv = Vec::with_capacity(n);
    for s in &samples {
        let d = linalg::det(s).norm();
        if d <= tol {
            return Err(Error::NotInvertible { min_modulus: d });
        }
        inv.push(linalg::inverse(s)?);
    }
    Ok(fourier_coefficients(&inv))
}

/// Options for [`star_inverse`].
#[derive(Clone, Copy, Debug)]
pub struct InverseOptions {
    /// Initial truncation half-width; `None` means `8 x width`.
    pub trunc: Option<i64>,
    /// Minimum FFT grid size.
    pub grid: usize,
    pub tol: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions { trunc: None, grid: 0, tol: 1e-10 }
    }
}

/// Star-inverse of an invertible series, truncated to `|u| <= trunc` with tail below `tol`.
pub fn star_inverse(f_series: &LaurentQSeries, frame: &SliceFrame, opts: InverseOptions) -> Result<LaurentQSeries> {
    let om = f_series.omega(frame);
    let width = f_series.width().max(1);
    let mut trunc = opts.trunc.unwrap_or(8 * width).max(1);
    let fnorm = f_series.norm().max(1.0);
    loop {
        let n = opts.grid.max(8 * (width + trunc) as usize).next_power_of_two();
        let coeffs = inverse_coefficients(&om, n, opts.tol)?;
        let tail: f64 = coeffs
            .iter()
            .filter(|(u, _)| u.abs() > trunc)
            .map(|(_, c)| linalg::spectral_norm(c))
            .sum();
        if tail < opts.tol {
            let kept: Vec<(i64, CMatrix)> = coeffs.into_iter().filter(|(u, _)| u.abs() <= trunc).collect();
            let max = kept.iter().map(|(_, c)| linalg::spectral_norm(c)).fold(0.0, f64::max);
            let mut g = LaurentQSeries::zero(f_series.n());
            for (u, c) in kept {
                if linalg::spectral_norm(&c) > 1e-15 * max {
                    g.add_term(u, chi_inverse(&c, frame, 1e-8)?)?;
                }
            }
            let residual = f_series.star_mul(&g)?.sub(&LaurentQSeries::identity(f_series.n()))?.norm();
            let bound = 10.0 * opts.tol * fnorm;
            if residual > bound {
                return Err(Error::ResidualTooLarge { residual, tol: bound });
            }
            return Ok(g);
        }
        if trunc >= TRUNC_CAP {
            return Err(Error::TailTooHeavy { tail, trunc });
        }
        trunc *= 2;
    }
}

/// Operator-norm sup of `omega(F)` over an `n`-point grid.
pub fn sup_norm(f_series: &LaurentQSeries, frame: &SliceFrame, n: usize) -> f64 {
    sample_series(&f_series.omega(frame), n).iter().map(linalg::spectral_norm).fold(0.0, f64::max)
}

/// Wiener norm of the coefficients of `F` with powers of the wrong sign.
pub fn wrong_side_mass(f_series: &LaurentQSeries, causal: bool) -> f64 {
    f_series
        .terms()
        .filter(|(u, _)| if causal { *u < 0 } else { *u > 0 })
        .map(|(_, c)| embedding::operator_norm(c))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Quaternion;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn fourier_recovers_laurent_coefficients() {
        let f = LaurentQSeries::scalar(&[(-2, q(0.5, 0.1, 0.0, 0.0)), (3, q(0.0, 0.0, 1.0, -1.0))]);
        let om = f.omega(&SliceFrame::default());
        let c = fourier_coefficients(&sample_series(&om, 16));
        for (u, m) in c {
            let expect = om.coeff(u).cloned().unwrap_or_else(|| CMatrix::zeros(2, 2));
            assert!((m - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn p_minus_unit_quaternion_is_not_invertible() {
        let u = q(0.6, 0.0, 0.8, 0.0);
        let f = LaurentQSeries::scalar(&[(1, Quaternion::ONE), (0, -u)]);
        let cert = is_invertible(&f, &SliceFrame::default(), 64, 1e-8).unwrap();
        assert!(!cert.invertible);
        assert!(cert.min_modulus < 1e-8);
    }

    #[test]
    fn p_minus_half_quaternion_has_index_one() {
        let f = LaurentQSeries::scalar(&[(1, Quaternion::ONE), (0, q(-0.5, 0.0, 0.0, 0.0))]);
        let cert = is_invertible(&f, &SliceFrame::default(), 64, 1e-8).unwrap();
        assert!(cert.invertible);
        assert_eq!(cert.det_winding, Some(2));
        assert_eq!(winding_index(&f, &SliceFrame::default(), 64).unwrap(), 1);
    }

    #[test]
    fn geometric_series_inverse() {
        let a = q(0.0, 0.3, 0.2, -0.3) * 0.5;
        let f = LaurentQSeries::scalar(&[(0, Quaternion::ONE), (1, -a)]);
        let g = star_inverse(&f, &SliceFrame::default(), InverseOptions { tol: 1e-12, ..Default::default() }).unwrap();
        for u in 0..20 {
            let expect = a.powi(u as u32);
            let got = g.coeff(u).map_or(Quaternion::ZERO, |c| c[(0, 0)]);
            assert!((got - expect).norm() < 1e-13, "u = {u}");
        }
        assert!(g.terms().all(|(u, _)| u >= 0));
    }
}
