use chiamp::appendix::{correlation_factored, correlation_parseval, CorrelationParams, RationalPhase};
use chiamp::arith::{gcd, inv_mod, is_prime};
use chiamp::chi_formula::{pi0_chain, reciprocity_check, AmplifierPair};
use chiamp::{
    correlation_sum, crt_combine, crt_split, d3, kloosterman, rational_phase_sum, sigma_amplified, sigma_direct,
    CoefficientSource, DirichletCharacter, FourierPair, InertFunction, Modulus, ResidueClass,
};
use proptest::prelude::*;

const SMALL_PRIMES: [u64; 10] = [5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(SMALL_PRIMES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_is_inverse(m in 2u64..5000, x in 0u64..5000) {
        let x = x % m;
        match inv_mod(x, m) {
            Some(y) => prop_assert_eq!(x * y % m, 1),
            None => prop_assert!(gcd(x, m) > 1),
        }
    }

    #[test]
    fn crt_round_trip(m1 in 2u64..200, m2 in 2u64..200, x in 0i64..40000) {
        prop_assume!(gcd(m1, m2) == 1);
        let m = Modulus::new(m1 * m2).unwrap();
        let r = ResidueClass::new(x, &m);
        let (a, b) = crt_split(&r, &Modulus::new(m1).unwrap(), &Modulus::new(m2).unwrap()).unwrap();
        prop_assert_eq!(crt_combine(&a, &b).unwrap().residue(), r.residue());
    }

    #[test]
    fn kloosterman_symmetric_and_real(c in 1u64..120, a in -200i64..200, b in -200i64..200) {
        let m = Modulus::new(c).unwrap();
        let s = kloosterman(a, b, &m).value;
        let t = kloosterman(b, a, &m).value;
        prop_assert!((s - t).norm() < 1e-9);
        prop_assert!(s.im.abs() < 1e-9);
        if is_prime(c) && (a * b).rem_euclid(c as i64) != 0 {
            prop_assert!(s.norm() <= 2.0 * (c as f64).sqrt() + 1e-9);
        }
    }

    #[test]
    fn characters_are_multiplicative(q in prime(), k in 0u64..40, m in 1i64..500, n in 1i64..500) {
        let chi = DirichletCharacter::new(q, k % (q - 1)).unwrap();
        prop_assert!((chi.eval(m * n) - chi.eval(m) * chi.eval(n)).norm() < 1e-12);
    }

    #[test]
    fn d3_is_multiplicative(m in 1u64..3000, n in 1u64..3000) {
        prop_assume!(gcd(m, n) == 1);
        prop_assert_eq!(d3(m * n), d3(m) * d3(n));
    }

    #[test]
    fn reciprocity_holds(q in prime(), r in 1u64..40, s in 1u64..40, t in -50i64..50, n in -50i64..50) {
        prop_assume!(gcd(r * s, q) == 1);
        prop_assert!(reciprocity_check(t, n, r, s, q).unwrap() < 1e-12);
    }

    #[test]
    fn amplification_is_an_identity(q in prime(), k in 1u64..36, n in 5.0f64..60.0, s in 2u64..6, t in 2u64..6) {
        let chi = DirichletCharacter::new(q, 1 + k % (q - 2)).unwrap();
        let amp = match AmplifierPair::new(&chi, s, t) {
            Ok(a) => a,
            Err(_) => return Ok(()),
        };
        let lambda = CoefficientSource::ternary_divisor(300);
        let v = InertFunction::standard();
        let a = sigma_direct(&lambda, &chi, &v, n).unwrap();
        let b = sigma_amplified(&lambda, &chi, &v, n, &amp).unwrap();
        prop_assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn pi0_routes_agree(q in prop::sample::select(vec![5u64, 7, 11, 13]), k in 1u64..12,
                        s in prop::array::uniform2(1u64..20), t in prop::array::uniform2(1u64..20),
                        h in prop::array::uniform2(1u64..20)) {
        prop_assume!(s.iter().chain(&t).chain(&h).all(|v| v % q != 0));
        let chi = DirichletCharacter::new(q, 1 + k % (q - 2)).unwrap();
        let c = pi0_chain(&chi, s, t, h).unwrap();
        prop_assert!(c.residual() < 1e-8);
        let expected = if c.argument.rem_euclid(q as i64) == 0 { q as i64 - 1 } else { -1 };
        prop_assert_eq!(c.ramanujan, expected);
    }

    #[test]
    fn correlation_forms_agree(s1 in 1u64..40, s2 in 1u64..40, l1 in 0i64..40, l2 in 0i64..40, xi in -40i64..40) {
        let cp = CorrelationParams::from_ell(s1, s2, l1, l2, xi).unwrap();
        let direct = correlation_sum(&cp).value;
        prop_assert!((correlation_parseval(&cp) - direct).norm() < 1e-9);
        prop_assert!((correlation_factored(&cp) - direct).norm() < 1e-9);
    }

    #[test]
    fn rational_phase_unit_scaling(p in prop::sample::select(vec![3u64, 5, 7]), n in 1u32..3,
                                   a in 0i64..50, b in 0i64..50, c in 0i64..50, u in 1i64..50) {
        let s = p.pow(n);
        prop_assume!(gcd(u as u64, s) == 1);
        let x = rational_phase_sum(&RationalPhase::new(s, a, b, c, 1).unwrap()).sum.value;
        let y = rational_phase_sum(&RationalPhase::new(s, a * u * u, b * u, c * u, 1).unwrap()).sum.value;
        prop_assert!((x - y).norm() < 1e-12);
    }

    #[test]
    fn inert_transform_is_hermitian(xi in -50.0f64..50.0) {
        let v = InertFunction::standard();
        let a = v.fourier(xi).unwrap();
        let b = v.fourier(-xi).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-11);
    }
}
