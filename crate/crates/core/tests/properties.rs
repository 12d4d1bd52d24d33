use heatwalk::characteristic::error_decomposition;
use heatwalk::spectral::{apply_semigroup, eval_datum};
use heatwalk::{Datum, ModelParams, StepDistribution};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex(r: f64, theta: f64) -> Complex64 {
    Complex64::from_polar(r, theta)
}

fn datum() -> impl Strategy<Value = Datum> {
    prop::collection::vec((-3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(|atoms| {
        Datum::new(atoms.into_iter().map(|(k, re, im)| (k as f64 * 0.5, Complex64::new(re, im)))).unwrap()
    })
}

proptest! {
    #[test]
    fn floor_term_within_its_bound(
        order in 2u32..8,
        r in 0.1f64..2.0,
        phase in 0.0f64..std::f64::consts::TAU,
        lr in 0.0f64..1.5,
        lphase in 0.0f64..std::f64::consts::TAU,
        n in 1u64..100_000,
        t in -2.0f64..2.0,
    ) {
        let params = ModelParams::new(order, complex(r, phase)).unwrap();
        let d = error_decomposition(&params, n, t, complex(lr, lphase)).unwrap();
        prop_assert!(d.g_n.norm() <= d.g_bound * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn step_law_is_rotation_invariant(
        order in 2u32..9,
        r in 0.1f64..3.0,
        phase in 0.0f64..std::f64::consts::TAU,
        lr in 0.0f64..2.0,
        lphase in 0.0f64..std::f64::consts::TAU,
        j in 0u32..9,
    ) {
        let step = StepDistribution::new(ModelParams::new(order, complex(r, phase)).unwrap());
        let lambda = complex(lr, lphase);
        let zeta = complex(1.0, std::f64::consts::TAU * j as f64 / order as f64);
        let a = step.char_fn(lambda);
        let b = step.char_fn(lambda * zeta);
        prop_assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn semigroup_composes(
        order in 2u32..7,
        phase in 0.0f64..std::f64::consts::TAU,
        d in datum(),
        s in -0.5f64..0.5,
        t in -0.5f64..0.5,
        x in -3.0f64..3.0,
    ) {
        let params = ModelParams::new(order, complex(1.0, phase)).unwrap();
        let once = apply_semigroup(&params, &d, s + t).unwrap();
        let twice = apply_semigroup(&params, &apply_semigroup(&params, &d, s).unwrap(), t).unwrap();
        let (a, b) = (eval_datum(&once, Complex64::from(x)), eval_datum(&twice, Complex64::from(x)));
        prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn datum_evaluation_is_linear(a in datum(), b in datum(), x in -5.0f64..5.0, k in -2.0f64..2.0) {
        let z = Complex64::from(x);
        let sum = a.add(&b.scale(Complex64::from(k)));
        let direct = eval_datum(&a, z) + eval_datum(&b, z) * k;
        prop_assert!((eval_datum(&sum, z) - direct).norm() < 1e-12 * (1.0 + direct.norm()));
    }
}
