//! `u_n(t, x) = E[f(x + W_n(t))]`, evaluated exactly through the
//! characteristic function of `W_n(t)` or estimated by Monte Carlo, and
//! compared against the spectral solution.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characteristic::char_w;
use crate::error::{Error, Result};
use crate::exec::{block_count, block_range, Backend, REPLICA_BLOCK};
use crate::spectral::{exact_solution, multiplier, Datum};
use crate::stats::{log_log_fit, LineFit};
use crate::step::ModelParams;
use crate::walk::{replica_rng, walk_steps, WalkSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spectral,
    WalkExact,
    WalkMc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    pub params: ModelParams,
    pub datum: Datum,
    pub t: f64,
    /// Initial time; the solution depends on `t - t0` only.
    pub t0: f64,
    pub xs: Vec<f64>,
    pub n: u64,
    pub method: Method,
    pub replicas: usize,
    pub seed: u64,
    #[serde(skip)]
    pub backend: Backend,
}

impl SolveRequest {
    pub fn new(params: ModelParams, datum: Datum, t: f64, xs: Vec<f64>, n: u64, method: Method) -> Self {
        SolveRequest {
            params,
            datum,
            t,
            t0: 0.0,
            xs,
            n,
            method,
            replicas: 10_000,
            seed: 0,
            backend: Backend::default(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.t - self.t0
    }

    fn validate(&self) -> Result<()> {
        if self.xs.is_empty() {
            return Err(Error::Precondition("x-grid must not be empty".into()));
        }
        if self.n == 0 {
            return Err(Error::Precondition("n must be at least 1".into()));
        }
        if self.method == Method::WalkMc && self.replicas == 0 {
            return Err(Error::Precondition("Monte Carlo needs at least one replica".into()));
        }
        if !self.elapsed().is_finite() {
            return Err(Error::Precondition("time must be finite".into()));
        }
        Ok(())
    }
}

/// `n` points spaced evenly over `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// 257 points on `[-π, π]`.
pub fn default_x_grid() -> Vec<f64> {
    linspace(-PI, PI, 257)
}

/// Exact finite-n value `Σ c_j e^(i x y_j) E[e^(i y_j W_n(t))]`.
pub fn solve_walk_exact(params: &ModelParams, datum: &Datum, n: u64, t: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    let weights = datum
        .atoms()
        .iter()
        .map(|a| Ok((a.y, a.c * char_w(params, n, t, Complex64::new(a.y, 0.0))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(xs.iter().map(|&x| evaluate(&weights, x)).collect())
}

fn evaluate(weights: &[(f64, Complex64)], x: f64) -> Complex64 {
    weights.iter().map(|(y, c)| c * Complex64::from_polar(1.0, x * y)).sum()
}

/// Spectral solution on a grid.
pub fn solve_spectral(params: &ModelParams, datum: &Datum, t: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    xs.iter().map(|&x| exact_solution(params, datum, t, x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McValue {
    pub estimate: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl McValue {
    /// `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}

/// Sums of `Z = (Re e^(i y_j W), Im e^(i y_j W))_j` and of `Z Zᵀ`.
#[derive(Clone)]
struct PhaseSums {
    count: f64,
    sum: Vec<f64>,
    cross: Vec<f64>,
}

impl PhaseSums {
    fn new(dim: usize) -> Self {
        PhaseSums { count: 0.0, sum: vec![0.0; dim], cross: vec![0.0; dim * dim] }
    }

    fn push(&mut self, z: &[f64]) {
        let dim = z.len();
        self.count += 1.0;
        for (i, zi) in z.iter().enumerate() {
            self.sum[i] += zi;
            for (j, zj) in z.iter().enumerate().skip(i) {
                self.cross[i * dim + j] += zi * zj;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
        self
    }

    fn covariance(&self, i: usize, j: usize) -> f64 {
        let dim = self.sum.len();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.count;
        if n < 2.0 {
            return f64::NAN;
        }
        (self.cross[i * dim + j] - self.sum[i] * self.sum[j] / n) / (n - 1.0)
    }

    fn quadratic_form(&self, w: &[f64]) -> f64 {
        let dim = w.len();
        let mut q = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                q += w[i] * w[j] * self.covariance(i, j);
            }
        }
        q.max(0.0)
    }
}

/// Monte Carlo estimate of `E[f(x + W_n(t))]` with standard errors.
///
/// Every replica contributes `e^(i y_j W)` for all atoms, so one set of
/// walks serves the whole x-grid. Replica `r` uses stream `r` of `seed`, and
/// blocks of [`REPLICA_BLOCK`] replicas are reduced in a fixed tree, so the
/// result does not depend on the backend.
#[allow(clippy::too_many_arguments)]
pub fn solve_walk_mc(
    params: &ModelParams,
    datum: &Datum,
    n: u64,
    t: f64,
    xs: &[f64],
    replicas: usize,
    seed: u64,
    backend: Backend,
) -> Result<Vec<McValue>> {
    if replicas == 0 {
        return Err(Error::Precondition("Monte Carlo needs at least one replica".into()));
    }
    let sampler = WalkSampler::new(*params, n)?;
    let freqs: Vec<f64> = datum.atoms().iter().map(|a| a.y).collect();
    let dim = 2 * freqs.len();
    let steps = walk_steps(n, t);
    let negative = t < 0.0;
    let order = params.order() as usize;
    let sums = backend
        .map_reduce(
            block_count(replicas, REPLICA_BLOCK),
            |b| {
                let (start, len) = block_range(b, REPLICA_BLOCK, replicas);
                let mut acc = PhaseSums::new(dim);
                let mut counts = vec![0u64; order];
                let mut z = vec![0.0; dim];
                for r in start..start + len {
                    let mut rng = replica_rng(seed, r as u64);
                    sampler.draw_counts(steps, &mut rng, &mut counts);
                    let w = sampler.position(&counts, negative);
                    for (j, y) in freqs.iter().enumerate() {
                        let e = (Complex64::new(0.0, *y) * w).exp();
                        z[2 * j] = e.re;
                        z[2 * j + 1] = e.im;
                    }
                    acc.push(&z);
                }
                acc
            },
            PhaseSums::merge,
        )
        .unwrap_or_else(|| PhaseSums::new(dim));
    let count = sums.count;
    let out = xs
        .iter()
        .map(|&x| {
            let mut estimate = Complex64::new(0.0, 0.0);
            let mut w_re = vec![0.0; dim];
            let mut w_im = vec![0.0; dim];
            for (j, atom) in datum.atoms().iter().enumerate() {
                let a = atom.c * Complex64::from_polar(1.0, x * atom.y);
                let mean = Complex64::new(sums.sum[2 * j], sums.sum[2 * j + 1]) / count;
                estimate += a * mean;
                w_re[2 * j] = a.re;
                w_re[2 * j + 1] = -a.im;
                w_im[2 * j] = a.im;
                w_im[2 * j + 1] = a.re;
            }
            let (se_re, se_im) = if count > 1.0 {
                ((sums.quadratic_form(&w_re) / count).sqrt(), (sums.quadratic_form(&w_im) / count).sqrt())
            } else {
                (f64::NAN, f64::NAN)
            };
            McValue { estimate, stderr_re: se_re, stderr_im: se_im }
        })
        .collect();
    Ok(out)
}

/// `C(t) = |α|/N! Σ|c_j||y_j|^N|m_t(y_j)| + |α|²|t| (1/(2(N!)²) - 1/(2N)!) Σ|c_j||y_j|^(2N)|m_t(y_j)|`
/// with `m_t` the semigroup multiplier.
pub fn error_bound_c(params: &ModelParams, datum: &Datum, t: f64) -> Result<f64> {
    let order = params.order() as i32;
    let a = params.alpha().norm();
    let mut first = 0.0;
    let mut second = 0.0;
    for atom in datum.atoms() {
        let m = multiplier(params, atom.y, t)?.norm();
        let yn = atom.y.abs().powi(order);
        first += atom.c.norm() * yn * m;
        second += atom.c.norm() * yn * yn * m;
    }
    Ok(a / params.n_factorial() * first + a * a * t.abs() * -params.second_order_coefficient() * second)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRow {
    pub x: f64,
    /// Spectral solution `u(t, x)`.
    pub u: Complex64,
    /// Requested method's value.
    pub un: Complex64,
    pub abs_err: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub method: Method,
    pub n: u64,
    pub t: f64,
    pub t0: f64,
    pub rows: Vec<SolutionRow>,
}

impl SolveResult {
    pub fn sup_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_err).fold(0.0, f64::max)
    }

    /// CSV `x,u_re,u_im,un_re,un_im,abs_err,stderr`; `stderr` is empty
    /// except for Monte Carlo.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,u_re,u_im,un_re,un_im,abs_err,stderr")?;
        for r in &self.rows {
            let se = r.stderr.map(|s| s.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{},{}", r.x, r.u.re, r.u.im, r.un.re, r.un.im, r.abs_err, se)?;
        }
        Ok(())
    }
}

/// Solves with the requested method and reports it next to the spectral
/// solution.
pub fn solve(req: &SolveRequest) -> Result<SolveResult> {
    req.validate()?;
    let t = req.elapsed();
    let exact = solve_spectral(&req.params, &req.datum, t, &req.xs)?;
    let (values, stderr): (Vec<Complex64>, Vec<Option<f64>>) = match req.method {
        Method::Spectral => (exact.clone(), vec![None; exact.len()]),
        Method::WalkExact => {
            let v = solve_walk_exact(&req.params, &req.datum, req.n, t, &req.xs)?;
            let len = v.len();
            (v, vec![None; len])
        }
        Method::WalkMc => solve_walk_mc(&req.params, &req.datum, req.n, t, &req.xs, req.replicas, req.seed, req.backend)?
            .into_iter()
            .map(|v| (v.estimate, Some(v.stderr())))
            .unzip(),
    };
    let rows = req
        .xs
        .iter()
        .zip(exact)
        .zip(values)
        .zip(stderr)
        .map(|(((&x, u), un), stderr)| SolutionRow { x, u, un, abs_err: (u - un).norm(), stderr })
        .collect();
    Ok(SolveResult { method: req.method, n: req.n, t: req.t, t0: req.t0, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub order: u32,
    pub t: f64,
    pub x_grid: GridSummary,
    pub n_grid: Vec<u64>,
    /// Sup over the x-grid of `|u - u_n|`.
    pub errors: Vec<f64>,
    /// Fit of `ln error` against `ln n`.
    pub fit: LineFit,
    pub slope: f64,
    pub c_t: f64,
    pub slack: f64,
    /// `slack · C(t) / n`.
    pub bound_curve: Vec<f64>,
    pub bound_satisfied: Vec<bool>,
    /// Smallest grid `n` from which every later error lies under the bound.
    pub n_epsilon: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSummary {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl ConvergenceReport {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.slope)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Sup-grid error of the exact walk solution against the spectral solution
/// along an increasing n-grid.
pub fn convergence_study(
    params: &ModelParams,
    datum: &Datum,
    t: f64,
    xs: &[f64],
    n_grid: &[u64],
    slack: f64,
) -> Result<ConvergenceReport> {
    if n_grid.len() < 4 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::Precondition("n-grid must be increasing, positive and have at least 4 points".into()));
    }
    if xs.is_empty() {
        return Err(Error::Precondition("x-grid must not be empty".into()));
    }
    let exact = solve_spectral(params, datum, t, xs)?;
    let errors = n_grid
        .iter()
        .map(|&n| {
            let un = solve_walk_exact(params, datum, n, t, xs)?;
            Ok(exact.iter().zip(&un).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let fit = log_log_fit(&ns, &errors)
        .ok_or_else(|| Error::Precondition("errors vanish; no convergence rate to fit".into()))?;
    let c_t = error_bound_c(params, datum, t)?;
    let bound_curve: Vec<f64> = ns.iter().map(|n| slack * c_t / n).collect();
    let bound_satisfied: Vec<bool> = errors.iter().zip(&bound_curve).map(|(e, b)| e <= b).collect();
    let first_ok = bound_satisfied.iter().rposition(|ok| !ok).map_or(0, |i| i + 1);
    let n_epsilon = n_grid.get(first_ok).copied();
    Ok(ConvergenceReport {
        order: params.order(),
        t,
        x_grid: GridSummary {
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            points: xs.len(),
        },
        n_grid: n_grid.to_vec(),
        errors,
        slope: fit.slope,
        fit,
        c_t,
        slack,
        bound_curve,
        bound_satisfied,
        n_epsilon,
    })
}
