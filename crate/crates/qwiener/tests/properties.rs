//! Property tests for the algebraic invariants.

mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use qwiener::circle::{star_inverse, winding_index, InverseOptions};
use qwiener::continuous::cayley_point_c;
use qwiener::embedding::{chi, chi_inverse, rho, rho_inverse};
use qwiener::factorization::{factor_discrete, FactorOptions};
use qwiener::realization::{assemble_realization, eval_realization};
use qwiener::solvers::{op_v, shift_u, ConvolutionOperator, GridFunction};
use qwiener::rational::{qpoly_mul_real, RationalQMatrix};
use qwiener::series::LaurentQSeries;
use qwiener::{QMatrix, Quaternion};
use rand::Rng;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn qdiff(a: &QMatrix, b: &QMatrix) -> f64 {
    (a - b).max_abs()
}

fn off_axis(r: &mut impl Rng) -> Quaternion {
    let mut p = quat(r);
    let im = p.imag();
    let n = im.norm().max(1e-3);
    let scale = r.gen_range(0.5..2.0) / n;
    p.x *= scale;
    p.y *= scale;
    p.z *= scale;
    p
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn chi_is_a_star_homomorphism(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let (a, b) = (qmatrix(&mut r, n, n), qmatrix(&mut r, n, n));
        let prod = chi(&(&a * &b), &f) - chi(&a, &f) * chi(&b, &f);
        prop_assert!(prod.norm() < 1e-12);
        let adj = chi(&a.adjoint(), &f) - chi(&a, &f).adjoint();
        prop_assert!(adj.norm() < 1e-12);
        let back = chi_inverse(&chi(&a, &f), &f, 1e-10).unwrap();
        prop_assert!(qdiff(&back, &a) < 1e-12);
    }

    #[test]
    fn rho_intertwines_chi(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let a = qmatrix(&mut r, n, n);
        let w: Vec<Quaternion> = (0..n).map(|_| quat(&mut r)).collect();
        let aw: Vec<Quaternion> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * w[j]).sum()).collect();
        let lhs = rho(&aw, &f) - chi(&a, &f) * rho(&w, &f);
        prop_assert!(lhs.norm() < 1e-12);
        let back = rho_inverse(&rho(&w, &f), &f).unwrap();
        for (x, y) in back.iter().zip(&w) {
            prop_assert!((*x - *y).norm() < 1e-12);
        }
    }

    #[test]
    fn star_product_is_associative_and_omega_multiplicative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let (a, b, c) = (scalar_series(&mut r, -2, 1), scalar_series(&mut r, -1, 2), scalar_series(&mut r, 0, 2));
        let left = a.star_mul(&b).unwrap().star_mul(&c).unwrap();
        let right = a.star_mul(&b.star_mul(&c).unwrap()).unwrap();
        prop_assert!(left.sub(&right).unwrap().norm() < 1e-12);
        let om = a.star_mul(&b).unwrap().omega(&f);
        let prod = a.omega(&f).mul(&b.omega(&f)).unwrap();
        let z = Complex64::from_polar(1.0, r.gen_range(0.0..6.28));
        prop_assert!((om.eval(z) - prod.eval(z)).norm() < 1e-12);
    }

    #[test]
    fn frame_split_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let q = quat(&mut r);
        let (a, b) = f.split(q);
        let err = (f.join(a, b) - q).norm();
        prop_assert!(err < 1e-12, "split/join error {err:e}");
        let z = Complex64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let s = f.slice(z);
        prop_assert!((s.w - z.re).abs() < 1e-12 && (s.imag().norm() - z.im.abs()).abs() < 1e-12);
    }

    #[test]
    fn cayley_map_is_an_involution(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let z = Complex64::new(re, im);
        prop_assume!((z - 1.0).norm() > 1e-3);
        let w = cayley_point_c(z);
        prop_assume!((w - 1.0).norm() > 1e-3);
        let back = cayley_point_c(w);
        prop_assert!((back - z).norm() < 1e-9 * (1.0 + z.norm_sqr()));
        // The imaginary axis maps to the unit circle.
        prop_assert!((cayley_point_c(Complex64::new(0.0, im)).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_shifts_are_exact(seed in any::<u64>(), k in 0i64..3) {
        let mut r = rng(seed);
        let q = quat(&mut r);
        let phi = GridFunction::from_fn(6, 8, |t| q * (t * 1.3).sin());
        let back = shift_u(-k, &shift_u(k, &phi));
        let keep = (6 - k as usize) * 8;
        for i in 0..keep {
            prop_assert!((back.samples[i] - phi.samples[i]).norm() == 0.0);
        }
        let up = shift_u(k, &phi);
        for i in 0..(k as usize * 8) {
            prop_assert!(up.samples[i].norm() == 0.0);
        }
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = scalar_series(&mut r, -2, 2);
        let back: LaurentQSeries = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert!(back.sub(&s).unwrap().norm() == 0.0);
        let f = random_rational(&mut r, 2, 2, 2);
        let back: RationalQMatrix = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        let p = off_axis(&mut r);
        let want = f.evaluate(p).unwrap();
        prop_assert!(qdiff(&back.evaluate(p).unwrap(), &want) == 0.0);
        let q = quat(&mut r);
        let g = GridFunction::from_fn(2, 4, |t| q * t);
        let mut buf = vec![];
        g.write_csv(&mut buf).unwrap();
        let h = GridFunction::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!((h.horizon, h.s), (2, 4));
        for (a, b) in h.samples.iter().zip(&g.samples) {
            prop_assert!((*a - *b).norm() == 0.0);
        }
    }

    #[test]
    fn reduction_preserves_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_rational(&mut r, 1, 2, 2);
        let extra = r.gen_range(-2.0..2.0);
        let common = real_poly(&[extra]);
        let padded = RationalQMatrix::new(
            qpoly_mul_real(f.num(), &common),
            f.den().mul(&common),
        ).unwrap();
        let red = padded.reduced(1e-9);
        let p = off_axis(&mut r);
        let scale = 1.0 + f.evaluate(p).unwrap().max_abs();
        prop_assert!(qdiff(&red.evaluate(p).unwrap(), &f.evaluate(p).unwrap()) < 1e-8 * scale);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn realization_matches_rational(seed in any::<u64>(), n in 1usize..3) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let sym = random_rational(&mut r, n, 2, 2);
        let real = assemble_realization(&sym, &QMatrix::identity(n)).unwrap();
        for _ in 0..4 {
            let p = off_axis(&mut r);
            let want = sym.evaluate(p).unwrap();
            let got = eval_realization(&real, p, &f).unwrap();
            prop_assert!(qdiff(&got, &want) < 1e-8 * (1.0 + want.max_abs()));
        }
    }

    #[test]
    fn star_inverse_has_small_residual(seed in any::<u64>(), n in 1usize..3) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let sym = minus_factor(&mut r, n).star_mul(&plus_factor(&mut r, n)).unwrap();
        let inv = star_inverse(&sym, &f, InverseOptions::default()).unwrap();
        let res = sym.star_mul(&inv).unwrap().sub(&LaurentQSeries::identity(n)).unwrap().norm();
        prop_assert!(res < 1e-8);
    }

    #[test]
    fn partial_indices_sum_to_winding(seed in any::<u64>(), n in 1usize..3) {
        let mut r = rng(seed);
        let f = frame(&mut r);
        let ix = random_indices(&mut r, n);
        let planted = planted_factorization(&mut r, n, &ix);
        let total: i64 = ix.iter().sum();
        prop_assert_eq!(winding_index(&planted.f, &f, 64).unwrap(), total);
        let fact = factor_discrete(&planted.f, &f, &FactorOptions::default()).unwrap();
        prop_assert_eq!(&fact.indices, &planted.indices);
    }

    #[test]
    fn frame_choice_does_not_change_indices(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (f1, f2) = (frame(&mut r), frame(&mut r));
        let ix = random_indices(&mut r, 2);
        let planted = planted_factorization(&mut r, 2, &ix);
        let a = factor_discrete(&planted.f, &f1, &FactorOptions::default()).unwrap();
        let b = factor_discrete(&planted.f, &f2, &FactorOptions::default()).unwrap();
        prop_assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn exponential_kernels_round_trip_through_symbols(a in 0.3f64..3.0, b in 0.3f64..3.0, c in -2.0f64..2.0) {
        let sym = RationalQMatrix::new(
            LaurentQSeries::scalar(&[(0, Quaternion::new(c, 0.0, 0.0, 0.0)), (2, Quaternion::ONE)]),
            real_poly(&[a, -b]),
        ).unwrap();
        prop_assume!((a - b).abs() > 1e-3);
        let op = ConvolutionOperator::from_rational(&sym).unwrap();
        let back = op.symbol_rational().unwrap();
        for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let p = Quaternion::new(0.0, t, 0.0, 0.0);
            prop_assert!(qdiff(&back.evaluate(p).unwrap(), &sym.evaluate(p).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn v_then_its_left_inverse_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = quat(&mut r);
        let c = r.gen_range(0.5..2.0);
        let f = move |t: f64| q * (t * t * (-c * t).exp());
        let phi = GridFunction::from_fn(16, 64, f);
        let back = op_v(-1, &op_v(1, &phi));
        let err = back.sub(&phi).unwrap().l2_norm_upto(8.0);
        prop_assert!(err < 1e-4 * (1.0 + phi.l2_norm()));
    }
}
