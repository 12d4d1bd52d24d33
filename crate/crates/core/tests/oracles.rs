//! Cross-checks of the library against independent computations.

use heatwalk::characteristic::char_s_scaled;
use heatwalk::lattice::to_complex;
use heatwalk::solver::{solve_walk_exact, solve_walk_mc};
use heatwalk::spectral::eval_datum;
use heatwalk::walk::{enumerate_distribution, WalkSampler};
use heatwalk::{Backend, Datum, ModelParams};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use statrs::distribution::{Binomial, Discrete};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn order_two_walk_is_binomial() {
    let params = ModelParams::real(2, 1.0).unwrap();
    for n in [1u64, 5, 12] {
        let dist = enumerate_distribution(&params, n).unwrap();
        let binom = Binomial::new(0.5, n).unwrap();
        let mut seen = 0.0;
        for (p, _) in dist.iter() {
            let pos = to_complex(p, &params, 1.0).re.round() as i64;
            let k = (pos + n as i64) / 2;
            let prob = dist.probability(p).to_f64().unwrap();
            assert!((prob - binom.pmf(k as u64)).abs() < 1e-14, "n={n} k={k}");
            seen += prob;
        }
        assert!((seen - 1.0).abs() < 1e-14);
    }
}

#[test]
fn walk_exact_matches_enumeration() {
    let datum = Datum::new([(1.0, c(0.5, 0.25)), (-2.0, c(0.0, 1.0)), (0.5, c(-0.3, 0.0))]).unwrap();
    let xs = [-0.7, 0.0, 1.3];
    for order in 2..=6u32 {
        let params = ModelParams::new(order, c(0.8, -0.3)).unwrap();
        for n in 1..=8u64 {
            let fast = solve_walk_exact(&params, &datum, n, 1.0, &xs).unwrap();
            let dist = enumerate_distribution(&params, n).unwrap();
            let scale = (n as f64).powf(-1.0 / order as f64);
            for (x, u) in xs.iter().zip(&fast) {
                let brute = dist.expectation(&params, scale, |z| eval_datum(&datum, z + x));
                assert!((u - brute).norm() < 1e-10 * (1.0 + brute.norm()), "N={order} n={n} x={x}");
            }
        }
    }
}

#[test]
fn scaled_characteristic_function_matches_enumeration() {
    for order in [3u32, 4, 5] {
        let params = ModelParams::new(order, c(1.0, 0.5)).unwrap();
        let lambda = c(0.7, -0.2);
        for n in [1u64, 3, 7] {
            let dist = enumerate_distribution(&params, n).unwrap();
            let scale = (n as f64).powf(-1.0 / order as f64);
            let brute = dist.expectation(&params, scale, |z| (c(0.0, 1.0) * lambda * z).exp());
            let psi = char_s_scaled(&params, n, lambda).unwrap();
            assert!((psi - brute).norm() < 1e-12, "N={order} n={n}");
        }
    }
}

#[test]
fn monte_carlo_is_the_plain_sample_mean() {
    let params = ModelParams::real(3, 1.0).unwrap();
    let datum = Datum::cosine(1.0);
    let (n, t, replicas, seed) = (200, 0.8, 5000, 42);
    let xs = [0.0, 0.4];
    let mc = solve_walk_mc(&params, &datum, n, t, &xs, replicas, seed, Backend::Sequential).unwrap();
    let draws = WalkSampler::new(params, n).unwrap().replicas(t, replicas, seed);
    for (x, v) in xs.iter().zip(&mc) {
        let mean = draws.iter().map(|w| eval_datum(&datum, w + x)).sum::<Complex64>() / replicas as f64;
        assert!((v.estimate - mean).norm() < 1e-12, "x={x}");
    }
}

#[test]
fn monte_carlo_backends_agree_bitwise() {
    let params = ModelParams::new(4, c(-1.0, 0.0)).unwrap();
    let datum = Datum::sine(2.0);
    let xs = [0.1, 0.9];
    let seq = solve_walk_mc(&params, &datum, 300, 1.0, &xs, 6000, 9, Backend::Sequential).unwrap();
    let par = solve_walk_mc(&params, &datum, 300, 1.0, &xs, 6000, 9, Backend::Parallel).unwrap();
    let two = solve_walk_mc(&params, &datum, 300, 1.0, &xs, 6000, 9, Backend::Workers(2)).unwrap();
    for ((a, b), d) in seq.iter().zip(&par).zip(&two) {
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.estimate, d.estimate);
        assert_eq!(a.stderr(), b.stderr());
    }
}
