use std::f64::consts::TAU;

use conelab::asymptotics::{fit_exponents, FitOptions};
use conelab::cone_symbol::{apply_symbol, invert_symbol, pole_pair};
use conelab::cross_section::CrossSection;
use conelab::mellin::{ConeGrid, FieldState};
use conelab::spectral_lab::{complexify, imaginary_power, random_spd, resolvent, spectral_norm};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_roundtrip_on_sphere(re in -6.0f64..6.0, im in 0.05f64..4.0, c in proptest::collection::vec(-1.0f64..1.0, 9)) {
        let cs = CrossSection::sphere(2, 2).unwrap();
        let z = Complex64::new(re, im);
        let coeffs: Vec<Complex64> = c.iter().map(|v| Complex64::new(*v, 0.5 * v)).collect();
        let back = apply_symbol(z, &invert_symbol(z, &coeffs, &cs).unwrap(), &cs).unwrap();
        for (a, b) in back.iter().zip(&coeffs) {
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-3));
        }
    }

    #[test]
    fn pole_pairs_sum_to_n_minus_one(j in 0usize..6) {
        let cs = CrossSection::sphere(2, 6).unwrap();
        let (p, m) = pole_pair(&cs, j);
        prop_assert!(((p + m).value() - 1.0).abs() < 1e-14);
        prop_assert!((p * m).value() - cs.eigenvalue(j) < 1e-12);
    }

    #[test]
    fn exponent_fit_is_scale_invariant(a in -1.0f64..3.0, c2 in -0.3f64..0.3, scale in 1e-6f64..1e6) {
        let cs = CrossSection::circle(TAU, 1).unwrap();
        let g = ConeGrid::new(8.0, 0.05, cs).unwrap();
        let u = FieldState::from_fn(&g, -0.5, 2.0, |m, t| if m == 0 { (-a * t).exp() * (1.0 - c2 * t) } else { 0.0 });
        let opts = FitOptions::default();
        let one = fit_exponents(&u, 0, (3.0, 7.0), &g, &opts).unwrap();
        let many = fit_exponents(&u.scaled(scale), 0, (3.0, 7.0), &g, &opts).unwrap();
        prop_assert!((one.a_hat - many.a_hat).abs() <= 1e-10, "{} {}", one.a_hat, many.a_hat);
    }

    #[test]
    fn exponent_fit_recovers_power_and_log(a in -1.0f64..3.0, c2 in prop_oneof![Just(0.0), -0.3f64..-5e-3, 5e-3f64..0.3]) {
        // a weak log term c leaves a second valley at a + 2c, separated
        // from the true one only at third order
        let cs = CrossSection::circle(TAU, 1).unwrap();
        let g = ConeGrid::new(8.0, 0.05, cs).unwrap();
        let u = FieldState::from_fn(&g, -0.5, 2.0, |m, t| if m == 0 { (-a * t).exp() * (1.0 - c2 * t) } else { 0.0 });
        let fit = fit_exponents(&u, 0, (3.0, 7.0), &g, &FitOptions::default()).unwrap();
        prop_assert!((fit.a_hat - a).abs() < 1e-6, "{} {}", fit.a_hat, a);
        prop_assert_eq!(fit.log_detected, c2 != 0.0);
        if c2 != 0.0 {
            prop_assert!((fit.log_coeff - c2).abs() < 1e-6 * c2.abs().max(1e-2));
        }
    }

    #[test]
    fn imaginary_powers_form_a_group(seed in 0u64..1000, s in -2.0f64..2.0, t in -2.0f64..2.0, dim in 1usize..7) {
        let a = random_spd(dim, &mut ChaCha8Rng::seed_from_u64(seed));
        let lhs = imaginary_power(&a, s).unwrap() * imaginary_power(&a, t).unwrap();
        let rhs = imaginary_power(&a, s + t).unwrap();
        prop_assert!(spectral_norm(&(lhs - rhs)) <= 1e-10);
        // unitary for self-adjoint A
        prop_assert!((spectral_norm(&imaginary_power(&a, t).unwrap()) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn resolvent_identity(seed in 0u64..1000, z in (0.1f64..5.0, -5.0f64..5.0), w in (0.1f64..5.0, -5.0f64..5.0), dim in 1usize..7) {
        let a = complexify(&random_spd(dim, &mut ChaCha8Rng::seed_from_u64(seed)));
        let (z, w) = (Complex64::new(z.0, z.1), Complex64::new(w.0, w.1));
        let (rz, rw) = (resolvent(&a, z).unwrap(), resolvent(&a, w).unwrap());
        let lhs = &rz - &rw;
        let rhs = (&rz * &rw) * (w - z);
        prop_assert!(spectral_norm(&(lhs - rhs)) <= 1e-10 * (1.0 + spectral_norm(&rz) * spectral_norm(&rw)));
    }
}
