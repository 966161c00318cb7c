use caputo_core::{ml_derivative, ml_eval, ml_eval_real, Complex64, MlError, MlParams};
use proptest::prelude::*;

fn params(a: f64, b: f64) -> MlParams {
    MlParams::new(a, b).unwrap()
}

#[test]
fn alpha_alpha_positive_on_the_real_line() {
    for a in [0.3, 0.5, 0.8] {
        let p = params(a, a);
        for k in 0..=400 {
            let s = -100.0 + 0.5 * k as f64;
            match ml_eval_real(p, s) {
                Ok(v) => assert!(v > 0.0, "E_{{{a},{a}}}({s}) = {v}"),
                Err(MlError::Overflow { .. }) => assert!(s > 0.0),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn eighth_order_values_increase_on_the_negative_axis() {
    let p = params(0.8, 0.8);
    let values: Vec<f64> = (0..=100).map(|k| ml_eval_real(p, -10.0 + 0.1 * k as f64).unwrap()).collect();
    assert!(values.iter().all(|&v| v > 0.0));
    assert!(values.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn one_one_is_exp(re in -30.0f64..30.0, im in -30.0f64..30.0) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() <= 30.0);
        let v = ml_eval(params(1.0, 1.0), z).unwrap();
        let want = z.exp();
        let err = (v.value - want).norm();
        prop_assert!(err <= 1e-10 * want.norm().max(1.0), "{z}: {err:e}");
    }

    #[test]
    fn conjugate_symmetry(re in -40.0f64..40.0, im in 0.0f64..40.0, a in 0.1f64..1.0, b in -1.0f64..3.0) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() <= 50.0);
        let p = params(a, b);
        match (ml_eval(p, z), ml_eval(p, z.conj())) {
            (Ok(u), Ok(w)) => prop_assert_eq!(u.value.conj(), w.value),
            (Err(e1), Err(e2)) => prop_assert_eq!(std::mem::discriminant(&e1), std::mem::discriminant(&e2)),
            (u, w) => prop_assert!(false, "{u:?} vs {w:?}"),
        }
    }

    #[test]
    fn derivative_matches_central_difference(re in -5.0f64..5.0, im in -5.0f64..5.0, a in 0.3f64..1.0) {
        let p = params(a, 1.0);
        let z = Complex64::new(re, im);
        let h = 1e-5;
        let f = |w: Complex64| ml_eval(p, w).unwrap().value;
        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
        let d = ml_derivative(p, z).unwrap().value;
        prop_assert!((fd - d).norm() <= 1e-5 * d.norm().max(1.0), "{z}: {fd} vs {d}");
    }

    #[test]
    fn recurrence_in_beta(re in -8.0f64..8.0, im in -8.0f64..8.0, a in 0.4f64..1.0, b in 0.5f64..2.0) {
        // E_{α,β}(z) = 1/Γ(β) + z·E_{α,α+β}(z)
        let z = Complex64::new(re, im);
        let lhs = ml_eval(params(a, b), z).unwrap().value;
        let rhs = caputo_core::rgamma(b) + z * ml_eval(params(a, a + b), z).unwrap().value;
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}
