//! The single step ξ, uniform on the N points `α^(1/N) e^(2πik/N)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `N` and coefficient `α` of `∂_t u = (α/N!) ∂_x^N u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    order: u32,
    alpha: Complex64,
    root: Complex64,
}

impl ModelParams {
    pub fn new(order: u32, alpha: Complex64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        if !(alpha.re.is_finite() && alpha.im.is_finite()) || alpha == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidAlpha(format!("{alpha}")));
        }
        Ok(ModelParams { order, alpha, root: principal_root(alpha, order) })
    }

    pub fn real(order: u32, alpha: f64) -> Result<Self> {
        Self::new(order, Complex64::new(alpha, 0.0))
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    /// Principal N-th root `|α|^(1/N) e^(i Arg(α)/N)`, `Arg ∈ (-π, π]`.
    pub fn root(&self) -> Complex64 {
        self.root
    }

    /// N = 2 is accepted for classical cross-checks but lies outside the
    /// higher-order theory.
    pub fn is_classical(&self) -> bool {
        self.order == 2
    }

    /// `i^N`.
    pub fn i_pow_n(&self) -> Complex64 {
        i_pow(self.order)
    }

    /// `N!` as a float.
    pub fn n_factorial(&self) -> f64 {
        factorial(self.order)
    }

    /// Symbol of the generator: `i^N α / N!`, so the multiplier is
    /// `exp(symbol · y^N · t)`.
    pub fn symbol(&self) -> Complex64 {
        self.i_pow_n() * self.alpha / self.n_factorial()
    }

    /// `1/(2N)! - 1/(2 (N!)^2)`, the second-order coefficient of `log ψ_ξ`.
    pub fn second_order_coefficient(&self) -> f64 {
        let nf = self.n_factorial();
        1.0 / factorial(2 * self.order) - 1.0 / (2.0 * nf * nf)
    }
}

pub(crate) fn principal_root(alpha: Complex64, order: u32) -> Complex64 {
    let n = order as f64;
    Complex64::from_polar(alpha.norm().powf(1.0 / n), alpha.arg() / n)
}

pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `e^(2πik/N)` for `k = 0..N`.
pub(crate) fn unit_roots(order: u32) -> Vec<Complex64> {
    (0..order).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / order as f64)).collect()
}

/// Uniform integer in `0..n` from 32-bit draws (multiply-shift with rejection).
#[inline]
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: u32) -> u32 {
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = u64::from(rng.next_u32()) * u64::from(n);
        if (m as u32) >= threshold {
            return (m >> 32) as u32;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    params: ModelParams,
    atoms: Vec<Complex64>,
}

impl StepDistribution {
    pub fn new(params: ModelParams) -> Self {
        Self::with_branch(params, 0)
    }

    /// Same law built from a non-principal root `α^(1/N) ζ^branch`; the atom
    /// set is a cyclic relabelling of the principal one.
    pub fn with_branch(params: ModelParams, branch: u32) -> Self {
        let n = params.order();
        let root = params.root() * Complex64::from_polar(1.0, 2.0 * PI * (branch % n) as f64 / n as f64);
        let atoms = unit_roots(n).into_iter().map(|z| root * z).collect();
        StepDistribution { params, atoms }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn atoms(&self) -> &[Complex64] {
        &self.atoms
    }

    /// `E[ξ^m]`: `α^(m/N)` when `N | m`, zero otherwise.
    pub fn moment(&self, m: u32) -> Complex64 {
        let n = self.params.order();
        if m.is_multiple_of(n) {
            self.params.alpha().powu(m / n)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `(1/N) Σ atom_k^m`, the moment by direct summation.
    pub fn moment_direct(&self, m: u32) -> Complex64 {
        self.atoms.iter().map(|a| a.powu(m)).sum::<Complex64>() / self.atoms.len() as f64
    }

    /// `E[|ξ|^m] = |α|^(m/N)`.
    pub fn abs_moment(&self, m: u32) -> f64 {
        self.params.alpha().norm().powf(m as f64 / self.params.order() as f64)
    }

    /// `ψ_ξ(λ) = (1/N) Σ_k exp(i λ atom_k)`.
    pub fn char_fn(&self, lambda: Complex64) -> Complex64 {
        let i = Complex64::i();
        self.atoms.iter().map(|a| (i * lambda * a).exp()).sum::<Complex64>() / self.atoms.len() as f64
    }

    /// `½ |α|^(2/N) I` as a row-major 2×2 matrix.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let s = 0.5 * self.abs_moment(2);
        [[s, 0.0], [0.0, s]]
    }

    /// Covariance of the atoms viewed as points of the plane.
    pub fn planar_covariance(&self) -> [[f64; 2]; 2] {
        let n = self.atoms.len() as f64;
        let mean: Complex64 = self.atoms.iter().sum::<Complex64>() / n;
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for a in &self.atoms {
            let d = a - mean;
            xx += d.re * d.re;
            xy += d.re * d.im;
            yy += d.im * d.im;
        }
        [[xx / n, xy / n], [xy / n, yy / n]]
    }

    /// Draws one step; returns the direction index and its complex value.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (usize, Complex64) {
        let k = uniform_index(rng, self.params.order()) as usize;
        (k, self.atoms[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn params_validation() {
        assert!(matches!(ModelParams::real(1, 1.0), Err(Error::InvalidOrder(1))));
        assert!(matches!(ModelParams::real(3, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(ModelParams::new(3, c(f64::NAN, 0.0)).is_err());
        assert!(ModelParams::real(2, 1.0).unwrap().is_classical());
        assert!(!ModelParams::real(3, 1.0).unwrap().is_classical());
    }

    #[test]
    fn principal_root_branch() {
        let p = ModelParams::real(4, -1.0).unwrap();
        assert!(close(p.root(), Complex64::from_polar(1.0, PI / 4.0), 1e-15));
        assert!(close(p.root().powu(4), c(-1.0, 0.0), 1e-14));
        let q = ModelParams::new(3, c(0.0, 8.0)).unwrap();
        assert!(close(q.root(), Complex64::from_polar(2.0, PI / 6.0), 1e-15));
    }

    #[test]
    fn moment_examples() {
        let d3 = StepDistribution::new(ModelParams::real(3, 1.0).unwrap());
        assert_eq!(d3.moment(3), c(1.0, 0.0));
        assert_eq!(d3.moment(2), c(0.0, 0.0));
        let d4 = StepDistribution::new(ModelParams::real(4, 2.0).unwrap());
        assert_eq!(d4.moment(8), c(4.0, 0.0));
    }

    #[test]
    fn abs_moment_examples() {
        let d3 = StepDistribution::new(ModelParams::real(3, 1.0).unwrap());
        assert_eq!(d3.abs_moment(7), 1.0);
        assert_eq!(d3.abs_moment(0), 1.0);
        let d4 = StepDistribution::new(ModelParams::real(4, 16.0).unwrap());
        assert!((d4.abs_moment(4) - 16.0).abs() < 1e-12);
        for a in d4.atoms() {
            assert!((a.norm() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn char_fn_examples() {
        let d4 = StepDistribution::new(ModelParams::real(4, 1.0).unwrap());
        assert!(close(d4.char_fn(c(0.0, 0.0)), c(1.0, 0.0), 1e-15));
        let expected = (1f64.cos() + 1f64.cosh()) / 2.0;
        assert!(close(d4.char_fn(c(1.0, 0.0)), c(expected, 0.0), 1e-15));
        assert!((expected - 1.041_691_47).abs() < 1e-8);
    }

    /// j-th derivative at 0 of an entire function by the trapezoid rule on
    /// the Cauchy integral over a circle of radius `r`.
    fn contour_derivative(f: impl Fn(Complex64) -> Complex64, j: u32, r: f64) -> Complex64 {
        let m = 128;
        let sum: Complex64 = (0..m)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / m as f64;
                f(Complex64::from_polar(r, theta)) * Complex64::from_polar(1.0, -(j as f64) * theta)
            })
            .sum();
        sum / m as f64 * factorial(j) / r.powi(j as i32)
    }

    #[test]
    fn char_fn_derivatives_are_moments() {
        let d = StepDistribution::new(ModelParams::real(3, 1.0).unwrap());
        let f = |z: Complex64| d.char_fn(z);
        // first derivative by central differences with step 1e-6
        let h = 1e-6;
        let first = (f(c(h, 0.0)) - f(c(-h, 0.0))) / (2.0 * h);
        assert!(first.norm() < 1e-4);
        for j in 1..=9u32 {
            let numeric = contour_derivative(f, j, 0.5);
            let expected = i_pow(j) * d.moment(j);
            assert!(
                (numeric - expected).norm() <= 1e-4 * expected.norm().max(1.0),
                "j={j}: {numeric} vs {expected}"
            );
        }
    }

    #[test]
    fn covariance_matches_atoms() {
        for (n, alpha) in [(4u32, c(1.0, 0.0)), (3, c(64.0, 0.0)), (5, c(0.6, 0.8)), (7, c(-2.0, 3.0))] {
            let d = StepDistribution::new(ModelParams::new(n, alpha).unwrap());
            let cov = d.covariance();
            let planar = d.planar_covariance();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((cov[i][j] - planar[i][j]).abs() < 1e-12 * cov[0][0].max(1.0));
                }
            }
            let mean: Complex64 = d.atoms().iter().sum();
            assert!(mean.norm() < 1e-12 * d.abs_moment(1).max(1.0));
        }
        let d = StepDistribution::new(ModelParams::real(3, 64.0).unwrap());
        assert!((d.covariance()[0][0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible_and_uniform() {
        let d = StepDistribution::new(ModelParams::real(5, 1.0).unwrap());
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut a).0, d.sample(&mut b).0);
        }
        let draws = 1_000_000;
        let mut counts = [0u64; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..draws {
            let (k, z) = d.sample(&mut rng);
            assert_eq!(z, d.atoms()[k]);
            counts[k] += 1;
        }
        let sigma = (0.2f64 * 0.8 / draws as f64).sqrt();
        for &cnt in &counts {
            let freq = cnt as f64 / draws as f64;
            assert!((freq - 0.2).abs() <= 3.0 * sigma, "freq {freq}");
        }
    }

    #[test]
    fn uniform_index_handles_non_power_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2u32, 3, 7, 12, 1000] {
            for _ in 0..1000 {
                assert!(uniform_index(&mut rng, n) < n);
            }
        }
    }

    proptest! {
        #[test]
        fn closed_moments_match_atom_sums(
            n in 2u32..=9,
            re in -3.0f64..3.0,
            im in -3.0f64..3.0,
            m in 0u32..=40,
        ) {
            prop_assume!(re.abs() + im.abs() > 0.1);
            let d = StepDistribution::new(ModelParams::new(n, c(re, im)).unwrap());
            let closed = d.moment(m);
            let direct = d.moment_direct(m);
            let scale = d.abs_moment(m).max(1e-300);
            prop_assert!((closed - direct).norm() <= 1e-12 * scale, "{} vs {}", closed, direct);
        }

        #[test]
        fn char_fn_is_branch_independent(
            n in 2u32..=9,
            branch in 0u32..9,
            re in -2.0f64..2.0,
            im in -2.0f64..2.0,
            lre in -2.0f64..2.0,
            lim in -1.0f64..1.0,
        ) {
            prop_assume!(re.abs() + im.abs() > 0.1);
            let p = ModelParams::new(n, c(re, im)).unwrap();
            let a = StepDistribution::new(p).char_fn(c(lre, lim));
            let b = StepDistribution::with_branch(p, branch).char_fn(c(lre, lim));
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
