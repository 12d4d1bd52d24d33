//! Characteristic functions of `S̃_n` and `W_n(t)`, their limit, error
//! constants and exact finite-n moments.

use std::io::Write;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Backend;
use crate::step::{factorial, ModelParams, StepDistribution};
use crate::walk::walk_steps;

/// Largest `ln |value|` accepted before a power is declared out of range.
const LOG_RANGE: f64 = 700.0;

fn guarded_pow(base: Complex64, exponent: u64) -> Result<Complex64> {
    if exponent == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let log_mag = exponent as f64 * base.norm().ln();
    if log_mag > LOG_RANGE {
        return Err(Error::Range(format!(
            "characteristic function power |ψ|^{exponent} = e^{log_mag:.1} overflows"
        )));
    }
    let value = match u32::try_from(exponent) {
        Ok(e) => base.powu(e),
        Err(_) => {
            let mut acc = Complex64::new(1.0, 0.0);
            let mut b = base;
            let mut e = exponent;
            while e > 0 {
                if e & 1 == 1 {
                    acc *= b;
                }
                b *= b;
                e >>= 1;
            }
            acc
        }
    };
    Ok(value)
}

fn guarded_exp(z: Complex64, what: &str) -> Result<Complex64> {
    if z.re > LOG_RANGE {
        return Err(Error::Range(format!("{what}: exponent real part {:.1} overflows", z.re)));
    }
    Ok(z.exp())
}

/// `ψ_n(λ) = E[exp(iλ S̃_n)] = ψ_ξ(λ n^(-1/N))^n`.
pub fn char_s_scaled(params: &ModelParams, n: u64, lambda: Complex64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let step = StepDistribution::new(*params);
    let s = lambda * (n as f64).powf(-1.0 / params.order() as f64);
    guarded_pow(step.char_fn(s), n)
}

/// `E[exp(iλ W_n(t))]`. Negative times rotate the argument by `e^(iπ/N)`.
pub fn char_w(params: &ModelParams, n: u64, t: f64, lambda: Complex64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let order = params.order() as f64;
    let step = StepDistribution::new(*params);
    let mut s = lambda * (n as f64).powf(-1.0 / order);
    if t < 0.0 {
        s *= Complex64::from_polar(1.0, std::f64::consts::PI / order);
    }
    guarded_pow(step.char_fn(s), walk_steps(n, t))
}

/// `exp(i^N α λ^N t / N!)`.
pub fn limit_char(params: &ModelParams, t: f64, lambda: Complex64) -> Result<Complex64> {
    guarded_exp(params.symbol() * lambda.powu(params.order()) * t, "limit characteristic function")
}

/// Limit of `n (ψ_n(λ) - exp(i^N α λ^N / N!))`:
/// `(-1)^N c₂ α² λ^(2N) exp(i^N α λ^N / N!)` with `c₂ = 1/(2N)! - 1/(2(N!)²)`.
pub fn clt_error_constant(params: &ModelParams, lambda: Complex64) -> Result<Complex64> {
    let order = params.order();
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let alpha = params.alpha();
    Ok(limit_char(params, 1.0, lambda)?
        * sign
        * params.second_order_coefficient()
        * alpha
        * alpha
        * lambda.powu(2 * order))
}

/// Leading terms of `char_W - limit_char`: `f_n` from the second cumulant,
/// `g_n` from the floor in `⌊nt⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    pub f_n: Complex64,
    pub g_n: Complex64,
    pub g_bound: f64,
}

pub fn error_decomposition(params: &ModelParams, n: u64, t: f64, lambda: Complex64) -> Result<ErrorDecomposition> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let order = params.order();
    let limit = limit_char(params, t, lambda)?;
    let alpha = params.alpha();
    let nf = n as f64;
    let steps = walk_steps(n, t) as f64;
    let signed_steps = if t < 0.0 { -steps } else { steps };
    let lambda_n = lambda.powu(order);
    // i^(2N) = (-1)^N
    let i2n = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let f_n = limit * (steps / (nf * nf)) * params.second_order_coefficient() * i2n * lambda_n * lambda_n * alpha * alpha;
    let g_n = limit * params.symbol() * lambda_n * (signed_steps / nf - t);
    let g_bound = (alpha * lambda_n).norm() / params.n_factorial() / nf * limit.norm();
    Ok(ErrorDecomposition { f_n, g_n, g_bound })
}

/// `K(t, λ) = |exp(i^N λ^N α t/N!)| (|αλ^N|/N! + |α² t λ^(2N)| (1/(2(N!)²) - 1/(2N)!))`.
/// Negative times enter through `|t|`.
pub fn error_bound_k(params: &ModelParams, t: f64, lambda: Complex64) -> Result<f64> {
    let lambda_n = lambda.powu(params.order());
    let alpha = params.alpha();
    let limit = limit_char(params, t, lambda)?;
    Ok(limit.norm()
        * ((alpha * lambda_n).norm() / params.n_factorial()
            + (alpha * alpha * lambda_n * lambda_n).norm() * t.abs() * -params.second_order_coefficient()))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub n: u64,
    pub error: f64,
    pub bound: f64,
}

/// Result of checking `|char_W - limit_char| <= slack · K / n` along an n-grid.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub t: f64,
    pub lambda: Complex64,
    pub k: f64,
    pub slack: f64,
    pub rows: Vec<BoundRow>,
    /// Smallest grid `n` from which the bound holds at every later grid point.
    pub n_epsilon: Option<u64>,
}

impl ThresholdReport {
    pub fn holds_from_threshold(&self) -> bool {
        self.n_epsilon.is_some()
    }
}

/// Empirical threshold `n_ε` for the characteristic-function bound.
pub fn bound_threshold(
    params: &ModelParams,
    t: f64,
    lambda: Complex64,
    n_grid: &[u64],
    slack: f64,
) -> Result<ThresholdReport> {
    let k = error_bound_k(params, t, lambda)?;
    let limit = limit_char(params, t, lambda)?;
    let rows = n_grid
        .iter()
        .map(|&n| {
            Ok(BoundRow {
                n,
                error: (char_w(params, n, t, lambda)? - limit).norm(),
                bound: slack * k / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_ok = rows.iter().rposition(|r| r.error > r.bound).map_or(0, |i| i + 1);
    let n_epsilon = rows.get(first_ok).map(|r| r.n);
    Ok(ThresholdReport { t, lambda, k, slack, rows, n_epsilon })
}

/// Default n-grid for threshold sweeps: `1..=20`, then four points per decade
/// up to `10^6`.
pub fn default_threshold_grid() -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=20).collect();
    grid.extend((6..=24).map(|i| 10f64.powf(i as f64 / 4.0).round() as u64).filter(|&n| n > 20));
    grid.dedup();
    grid
}

/// Multiplicities `m_l` of the parts `l` in every partition of `total`.
fn partitions(total: u32) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, max_part: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            current[part as usize - 1] += 1;
            rec(remaining - part, part, current, out);
            current[part as usize - 1] -= 1;
        }
    }
    let mut out = Vec::new();
    rec(total, total, &mut vec![0; total as usize], &mut out);
    out
}

fn big_factorial(k: u64) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, j| acc * j)
}

/// Exact rational `Q` with `E[S̃_n^k] = α^(k/N) Q` when `N | k`, and `Q = 0`
/// otherwise.
///
/// Faà di Bruno applied to `ψ_ξ(λ n^(-1/N))^n`: only derivatives of order
/// `lN` of `ψ_ξ` are nonzero at the origin, so the sum runs over partitions of
/// `M = k/N` with multiplicities `m_l`, weighted by
/// `k!/Π(m_l! ((lN)!)^m_l) · n(n-1)⋯(n-Σm_l+1) · n^(-M)`.
pub fn moment_coefficient(order: u32, n: u64, k: u32) -> Result<BigRational> {
    if n == 0 || k == 0 {
        return Err(Error::Precondition(format!("moment needs n >= 1 and k >= 1, got n={n}, k={k}")));
    }
    if !k.is_multiple_of(order) {
        return Ok(BigRational::zero());
    }
    let m_total = k / order;
    let k_fact = big_factorial(k as u64);
    let n_big = BigInt::from(n);
    let mut sum = BigRational::zero();
    for mult in partitions(m_total) {
        let parts: u64 = mult.iter().map(|&m| m as u64).sum();
        if parts > n {
            continue;
        }
        let falling = (0..parts).fold(BigInt::one(), |acc, j| acc * (&n_big - j));
        let mut den = BigInt::one();
        for (l, &m) in mult.iter().enumerate() {
            if m > 0 {
                let lf = big_factorial((l as u64 + 1) * order as u64);
                den *= big_factorial(m as u64) * lf.pow(m);
            }
        }
        sum += BigRational::new(&k_fact * falling, den);
    }
    Ok(sum / BigRational::from_integer(n_big.pow(m_total)))
}

/// `E[S̃_n^k]` from the exact Faà di Bruno coefficient.
pub fn moment_faadibruno(params: &ModelParams, n: u64, k: u32) -> Result<Complex64> {
    let q = moment_coefficient(params.order(), n, k)?;
    if q.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let q = q.to_f64().ok_or_else(|| Error::Range("moment coefficient".into()))?;
    Ok(params.alpha().powu(k / params.order()) * q)
}

/// Limit of `E[S̃_n^m]`: `(α/N!)^(m/N) m!/(m/N)!` when `N | m`, else 0.
pub fn moment_limit(params: &ModelParams, m: u32) -> Complex64 {
    let order = params.order();
    if !m.is_multiple_of(order) {
        return Complex64::new(0.0, 0.0);
    }
    let big_m = m / order;
    (params.alpha() / params.n_factorial()).powu(big_m) * (factorial(m) / factorial(big_m))
}

/// One row of a characteristic-function convergence table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub lambda: Complex64,
    pub value: Complex64,
    pub limit: Complex64,
    pub error: Complex64,
    pub n_times_err_abs: f64,
}

/// `char_W(n, t, λ) - limit_char(t, λ)` over all pairs of `lambdas × ns`,
/// in row-major order (λ outer).
pub fn convergence_table(
    params: &ModelParams,
    t: f64,
    lambdas: &[Complex64],
    ns: &[u64],
    backend: Backend,
) -> Result<Vec<ConvergenceRow>> {
    let cells = lambdas.len() * ns.len();
    backend
        .map(cells, |i| {
            let lambda = lambdas[i / ns.len()];
            let n = ns[i % ns.len()];
            let value = char_w(params, n, t, lambda)?;
            let limit = limit_char(params, t, lambda)?;
            let error = value - limit;
            Ok(ConvergenceRow { n, lambda, value, limit, error, n_times_err_abs: n as f64 * error.norm() })
        })
        .into_iter()
        .collect()
}

/// CSV with header `n,lambda_re,lambda_im,err_re,err_im,n_times_err_abs`.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut w: W) -> Result<()> {
    writeln!(w, "n,lambda_re,lambda_im,err_re,err_im,n_times_err_abs")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n, r.lambda.re, r.lambda.im, r.error.re, r.error.im, r.n_times_err_abs
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(n: u32, re: f64, im: f64) -> ModelParams {
        ModelParams::new(n, c(re, im)).unwrap()
    }

    #[test]
    fn trivial_values() {
        let p = params(3, 1.0, 0.0);
        assert_eq!(char_s_scaled(&p, 10, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(char_w(&p, 10, 0.0, c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(limit_char(&p, 1.0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(clt_error_constant(&p, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(error_bound_k(&p, 1.0, c(0.0, 0.0)).unwrap(), 0.0);
        assert!(char_s_scaled(&p, 0, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn char_w_at_one_is_char_s() {
        let p = params(4, -1.0, 0.3);
        for n in [1u64, 7, 100] {
            let l = c(0.8, -0.2);
            assert_eq!(char_w(&p, n, 1.0, l).unwrap(), char_s_scaled(&p, n, l).unwrap());
        }
    }

    #[test]
    fn negative_time_rotates_lambda() {
        let p = params(3, 1.0, 0.0);
        let rot = Complex64::from_polar(1.0, std::f64::consts::PI / 3.0);
        for t in [-0.3, -1.0, -2.7] {
            let l = c(1.1, 0.0);
            let a = char_w(&p, 500, t, l).unwrap();
            let b = char_w(&p, 500, -t, l * rot).unwrap();
            assert!((a - b).norm() < 1e-12);
            let la = limit_char(&p, t, l).unwrap();
            let lb = limit_char(&p, -t, l * rot).unwrap();
            assert!((la - lb).norm() < 1e-13);
        }
        let far = char_w(&p, 1_000_000, -1.0, c(1.0, 0.0)).unwrap();
        assert!((far - c(0.0, 1.0 / 6.0).exp()).norm() < 1e-6);
    }

    #[test]
    fn limit_examples() {
        let p2 = params(2, 1.0, 0.0);
        for l in [0.3, 1.0, 2.0] {
            let v = limit_char(&p2, 1.0, c(l, 0.0)).unwrap();
            assert!((v - c((-l * l / 2.0).exp(), 0.0)).norm() < 1e-15);
        }
        let p4 = params(4, -1.0, 0.0);
        let v = limit_char(&p4, 1.0, c(1.0, 0.0)).unwrap();
        assert!((v.re - (-1.0f64 / 24.0).exp()).abs() < 1e-15 && v.im.abs() < 1e-15);
        assert!(matches!(limit_char(&params(4, 1.0, 0.0), 1e6, c(3.0, 0.0)), Err(Error::Range(_))));
    }

    #[test]
    fn clt_constant_magnitude() {
        let p = params(3, 1.0, 0.0);
        let k = clt_error_constant(&p, c(1.0, 0.0)).unwrap();
        assert!((k.norm() - 0.0125).abs() < 1e-15);
        assert!((error_bound_k(&p, 1.0, c(1.0, 0.0)).unwrap() - (1.0 / 6.0 + 1.0 / 80.0)).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_reported() {
        let p = params(4, 1.0, 0.0);
        assert!(matches!(char_s_scaled(&p, 1000, c(20.0, 0.0)), Err(Error::Range(_))));
    }

    #[test]
    fn decomposition_vanishing_floor_term() {
        let p = params(3, 1.0, 0.0);
        for n in [3u64, 10, 1000] {
            for t in [1.0, 2.0, -1.0] {
                let d = error_decomposition(&p, n, t, c(1.3, 0.0)).unwrap();
                assert_eq!(d.g_n, c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn partition_enumeration() {
        assert_eq!(partitions(1), vec![vec![1]]);
        assert_eq!(partitions(4).len(), 5);
        assert_eq!(partitions(10).len(), 42);
    }

    #[test]
    fn moment_coefficients() {
        // k = 2N at N = 3, n = 10: 10·(9/10) + 1/10
        let q = moment_coefficient(3, 10, 6).unwrap();
        assert_eq!(q, BigRational::new(BigInt::from(91), BigInt::from(10)));
        for n in 1..=20 {
            assert_eq!(moment_coefficient(4, n, 4).unwrap(), BigRational::one());
        }
        assert!(moment_coefficient(3, 10, 5).unwrap().is_zero());
        // one step: E[ξ^6] = α² for N = 3
        assert_eq!(moment_coefficient(3, 1, 6).unwrap(), BigRational::one());
        assert!(moment_coefficient(3, 0, 3).is_err());
    }

    #[test]
    fn moment_limit_examples() {
        let p = params(3, 0.5, 0.5);
        assert!((moment_limit(&p, 3) - p.alpha()).norm() < 1e-15);
        assert_eq!(moment_limit(&p, 5), c(0.0, 0.0));
        assert!((moment_limit(&params(2, 1.0, 0.0), 4) - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn moments_approach_limit() {
        let p = params(3, 1.0, 0.0);
        let limit = moment_limit(&p, 6);
        let large = moment_faadibruno(&p, 1_000_000, 6).unwrap();
        assert!((large - limit).norm() < 1e-4);
    }

    #[test]
    fn threshold_report() {
        let p = params(3, 1.0, 0.0);
        let rep = bound_threshold(&p, 0.3, c(1.0, 0.0), &default_threshold_grid(), 1.1).unwrap();
        let n_eps = rep.n_epsilon.unwrap();
        assert!(rep.rows.iter().filter(|r| r.n >= n_eps).all(|r| r.error <= r.bound));
    }

    #[test]
    fn convergence_csv_layout() {
        let p = params(3, 1.0, 0.0);
        let rows = convergence_table(&p, 1.0, &[c(1.0, 0.0), c(0.0, 0.0)], &[10, 100], Backend::Sequential).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].error, c(0.0, 0.0));
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,lambda_re,lambda_im,err_re,err_im,n_times_err_abs\n10,1,0,"));
    }
}
