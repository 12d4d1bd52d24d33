//! The random walk `S_n`, its normalisation `n^(-1/N) S_n` and the
//! piecewise-constant processes `W_n(t)` on positive and negative time.
//!
//! Exact laws are enumerated on the cyclotomic lattice with big-integer path
//! counts. Monte Carlo routines draw per-replica ChaCha streams
//! (`seed`, stream = replica index), so estimates do not depend on how
//! replicas are scheduled across workers.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{block_count, block_range, Backend, REPLICA_BLOCK};
use crate::lattice::{is_prime, to_complex, CyclotomicPoint, Lattice};
use crate::stats::{linear_fit, log_log_fit, LineFit};
use crate::step::{uniform_index, ModelParams, StepDistribution};

/// Default bound on the number of distinct lattice points held by the
/// enumeration.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// `⌊n·|t|⌋`, the number of steps taken by `W_n` up to time `t`.
///
/// Products that land within a relative `1e-9` of an integer are snapped to
/// it, so `n·0.29` counts 29 steps for `n = 100` as intended.
pub fn walk_steps(n: u64, t: f64) -> u64 {
    let x = n as f64 * t.abs();
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.floor() as u64
    }
}

/// Signed `⌊nt⌋/n` with the convention `⌊-t⌋ = -⌊t⌋`.
pub fn discrete_time(n: u64, t: f64) -> f64 {
    let k = walk_steps(n, t) as f64 / n as f64;
    if t < 0.0 {
        -k
    } else {
        k
    }
}

/// Independent stream for Monte Carlo replica `replica` under `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

pub(crate) fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    let shift = den.bits().saturating_sub(1000);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Exact law of `S_n`: path counts per canonical lattice point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    order: u32,
    steps: u64,
    counts: BTreeMap<CyclotomicPoint, BigUint>,
}

impl ExactDistribution {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `N^n`, the number of step sequences.
    pub fn total(&self) -> BigUint {
        BigUint::from(self.order).pow(self.steps as u32)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CyclotomicPoint, &BigUint)> {
        self.counts.iter()
    }

    pub fn count(&self, p: &CyclotomicPoint) -> BigUint {
        self.counts.get(p).cloned().unwrap_or_default()
    }

    pub fn probability(&self, p: &CyclotomicPoint) -> BigRational {
        BigRational::new(BigInt::from(self.count(p)), BigInt::from(self.total()))
    }

    /// `E[f(scale · S_n)]` with positions mapped through the principal root.
    pub fn expectation(&self, params: &ModelParams, scale: f64, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
        let total = self.total();
        self.counts
            .iter()
            .map(|(p, c)| f(to_complex(p, params, scale)) * ratio_f64(c, &total))
            .sum()
    }

    /// `E[(n^(-1/N) S_n)^k]` by summation over the support.
    pub fn normalized_moment(&self, params: &ModelParams, k: u32) -> Complex64 {
        let scale = if self.steps == 0 { 1.0 } else { (self.steps as f64).powf(-1.0 / self.order as f64) };
        self.expectation(params, scale, |z| z.powu(k))
    }
}

/// Exact law of `S_n` by dynamic programming over canonical lattice points.
pub fn enumerate_distribution(params: &ModelParams, n: u64) -> Result<ExactDistribution> {
    enumerate_distribution_with_cap(params, n, DEFAULT_STATE_CAP)
}

pub fn enumerate_distribution_with_cap(params: &ModelParams, n: u64, cap: usize) -> Result<ExactDistribution> {
    let mut dp = LatticeDp::new(params.order(), cap)?;
    for _ in 0..n {
        dp.step()?;
    }
    Ok(dp.finish())
}

/// Path counts `#{paths with S_n = 0}` for `n = 0..=n_max`, from one DP pass.
pub fn return_counts(params: &ModelParams, n_max: u64, cap: usize) -> Result<Vec<BigUint>> {
    let mut dp = LatticeDp::new(params.order(), cap)?;
    let zero = dp.lattice.zero();
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(BigUint::one());
    for _ in 0..n_max {
        dp.step()?;
        out.push(dp.current.get(&zero).cloned().unwrap_or_default());
    }
    Ok(out)
}

struct LatticeDp {
    lattice: Lattice,
    cap: usize,
    steps: u64,
    current: HashMap<CyclotomicPoint, BigUint>,
}

impl LatticeDp {
    fn new(order: u32, cap: usize) -> Result<Self> {
        let lattice = Lattice::new(order)?;
        let mut current = HashMap::new();
        current.insert(lattice.zero(), BigUint::one());
        Ok(LatticeDp { lattice, cap, steps: 0, current })
    }

    fn step(&mut self) -> Result<()> {
        let mut next: HashMap<CyclotomicPoint, BigUint> = HashMap::with_capacity(self.current.len() * 2);
        for (p, c) in &self.current {
            for d in self.lattice.directions() {
                *next.entry(p.try_add(d)?).or_default() += c;
            }
            if next.len() > self.cap {
                return Err(Error::CapExceeded {
                    what: format!("lattice state count at step {}", self.steps + 1),
                    cap: self.cap,
                });
            }
        }
        self.current = next;
        self.steps += 1;
        Ok(())
    }

    fn finish(self) -> ExactDistribution {
        ExactDistribution {
            order: self.lattice.order(),
            steps: self.steps,
            counts: self.current.into_iter().collect(),
        }
    }
}

/// `P(S_{Nm} = 0) = (Nm)! / ((m!)^N N^(Nm))` for prime `N`.
pub fn return_probability_closed(params: &ModelParams, m: u64) -> Result<BigRational> {
    Ok(closed_return_sequence(params, m)?.pop().expect("m >= 1 yields one entry"))
}

/// Closed-form return probabilities for `m = 1..=m_max`.
fn closed_return_sequence(params: &ModelParams, m_max: u64) -> Result<Vec<BigRational>> {
    let n = params.order() as u64;
    if !is_prime(n) {
        return Err(Error::Unsupported(format!(
            "closed-form return probability needs a prime order, got {n}; use the enumeration"
        )));
    }
    if m_max == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(m_max as usize);
    let mut p = BigRational::one();
    let nn = BigInt::from(n).pow(n as u32);
    for m in 1..=m_max {
        let mut num = BigInt::one();
        for j in 1..=n {
            num *= BigInt::from(n * (m - 1) + j);
        }
        let den = BigInt::from(m).pow(n as u32) * &nn;
        p *= BigRational::new(num, den);
        out.push(p.clone());
    }
    Ok(out)
}

/// Stirling form `√(2πNm) (2πm)^(-N/2)` of the closed-form return probability.
pub fn return_asymptote(params: &ModelParams, m: u64) -> Result<f64> {
    let n = params.order() as u64;
    if !is_prime(n) {
        return Err(Error::Unsupported(format!("return asymptote needs a prime order, got {n}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok((2.0 * PI * nf * mf).sqrt() * (2.0 * PI * mf).powf(-nf / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnRoute {
    ClosedForm,
    Enumeration,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub order: u32,
    pub route: ReturnRoute,
    /// Walk lengths `n` with `P(S_n = 0) > 0`, up to `N·m_max`.
    pub times: Vec<u64>,
    /// Exact probabilities as reduced fractions.
    pub exact: Vec<String>,
    pub probabilities: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Fit of `ln P` against `ln n`.
    pub fit: LineFit,
    /// `P·n^(-slope)` at the last point, the empirical decay constant.
    pub fitted_constant: f64,
}

/// Return probabilities up to `n = N·m_max`, their partial sums and the
/// log-log decay exponent. Prime orders use the closed form; composite
/// orders use the enumeration (with the default state cap).
pub fn recurrence_diagnostic(params: &ModelParams, m_max: u64) -> Result<RecurrenceReport> {
    if m_max < 10 {
        return Err(Error::Precondition(format!("m_max must be at least 10, got {m_max}")));
    }
    let order = params.order();
    let n = order as u64;
    let (route, times, exact): (_, Vec<u64>, Vec<BigRational>) = if is_prime(n) {
        let seq = closed_return_sequence(params, m_max)?;
        (ReturnRoute::ClosedForm, (1..=m_max).map(|m| n * m).collect(), seq)
    } else {
        let counts = return_counts(params, n * m_max, DEFAULT_STATE_CAP)?;
        let mut times = Vec::new();
        let mut exact = Vec::new();
        let base = BigInt::from(n);
        for (k, c) in counts.iter().enumerate().skip(1) {
            if !c.is_zero() {
                times.push(k as u64);
                exact.push(BigRational::new(BigInt::from(c.clone()), base.pow(k as u32)));
            }
        }
        (ReturnRoute::Enumeration, times, exact)
    };
    let probabilities: Vec<f64> = exact.iter().map(|p| p.to_f64().unwrap_or(0.0)).collect();
    let partial_sums = probabilities
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let xs: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let fit = log_log_fit(&xs, &probabilities)
        .ok_or_else(|| Error::Precondition("not enough returns to fit a decay exponent".into()))?;
    let last = probabilities.len() - 1;
    let fitted_constant = probabilities[last] * xs[last].powf(-fit.slope);
    Ok(RecurrenceReport {
        order,
        route,
        times,
        exact: exact.iter().map(|p| p.to_string()).collect(),
        probabilities,
        partial_sums,
        fit,
        fitted_constant,
    })
}

/// Number of paths returning to the origin at step `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReturnRow {
    pub n: u64,
    pub paths: BigUint,
    /// `N^n`.
    pub total: BigUint,
    pub probability: BigRational,
}

/// Exact return counts at every reachable `n <= N·m_max`: the closed form at
/// `n = N m` for prime orders, the enumeration otherwise.
pub fn return_table(params: &ModelParams, m_max: u64) -> Result<(ReturnRoute, Vec<ReturnRow>)> {
    let order = params.order() as u64;
    let base = BigUint::from(order);
    if is_prime(order) {
        let rows = closed_return_sequence(params, m_max)?
            .into_iter()
            .zip(1..)
            .map(|(p, m)| {
                let n = order * m;
                let total = base.pow(n as u32);
                let paths = (p.numer() * BigInt::from(total.clone()) / p.denom())
                    .to_biguint()
                    .expect("probabilities are nonnegative");
                ReturnRow { n, paths, total, probability: p }
            })
            .collect();
        return Ok((ReturnRoute::ClosedForm, rows));
    }
    if m_max == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let rows = return_counts(params, order * m_max, DEFAULT_STATE_CAP)?
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| !c.is_zero())
        .map(|(n, paths)| {
            let total = base.pow(n as u32);
            let probability = BigRational::new(BigInt::from(paths.clone()), BigInt::from(total.clone()));
            ReturnRow { n: n as u64, paths, total, probability }
        })
        .collect();
    Ok((ReturnRoute::Enumeration, rows))
}

/// Element of the dihedral group of `R(N)`, acting on direction indices by
/// `k ↦ rotation + k` or, when `reflect` is set, `k ↦ rotation - k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symmetry {
    pub rotation: u32,
    pub reflect: bool,
}

impl Symmetry {
    pub fn identity() -> Self {
        Symmetry { rotation: 0, reflect: false }
    }

    pub fn rotation(j: u32) -> Self {
        Symmetry { rotation: j, reflect: false }
    }

    pub fn reflection(j: u32) -> Self {
        Symmetry { rotation: j, reflect: true }
    }

    /// All `2N` elements.
    pub fn dihedral_group(order: u32) -> Vec<Symmetry> {
        (0..order).flat_map(|j| [Symmetry::rotation(j), Symmetry::reflection(j)]).collect()
    }

    pub fn image_index(&self, k: usize, order: u32) -> usize {
        let n = order as usize;
        let j = self.rotation as usize % n;
        if self.reflect {
            (j + n - k % n) % n
        } else {
            (j + k) % n
        }
    }

    /// Recognises a permutation of direction indices as a dihedral element.
    /// Permutations not induced by a real-linear map of the plane (for
    /// example `k ↦ 2k` when N = 5) are rejected.
    pub fn from_index_map(order: u32, map: &[usize]) -> Result<Symmetry> {
        if map.len() != order as usize {
            return Err(Error::InvalidSymmetry(format!("expected {order} images, got {}", map.len())));
        }
        Symmetry::dihedral_group(order)
            .into_iter()
            .find(|s| (0..order as usize).all(|k| s.image_index(k, order) == map[k]))
            .ok_or_else(|| Error::InvalidSymmetry(format!("{map:?} does not preserve R({order}) linearly")))
    }
}

/// Pushforward of an exact distribution under a dihedral symmetry.
pub fn apply_lattice_symmetry(dist: &ExactDistribution, sym: Symmetry) -> Result<ExactDistribution> {
    if sym.rotation >= dist.order {
        return Err(Error::InvalidSymmetry(format!(
            "rotation index {} out of range for order {}",
            sym.rotation, dist.order
        )));
    }
    let lattice = Lattice::new(dist.order)?;
    let mut counts = BTreeMap::new();
    for (p, c) in &dist.counts {
        let img = lattice.permute(p, |k| sym.image_index(k, dist.order))?;
        *counts.entry(img).or_insert_with(BigUint::zero) += c;
    }
    Ok(ExactDistribution { order: dist.order, steps: dist.steps, counts })
}

/// Draws of `W_n(t)` for a fixed `n`.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    step: StepDistribution,
    n: u64,
    scale: f64,
    backward: Complex64,
}

impl WalkSampler {
    pub fn new(params: ModelParams, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("n must be at least 1".into()));
        }
        let order = params.order() as f64;
        Ok(WalkSampler {
            step: StepDistribution::new(params),
            n,
            scale: (n as f64).powf(-1.0 / order),
            backward: Complex64::from_polar(1.0, PI / order),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn step_distribution(&self) -> &StepDistribution {
        &self.step
    }

    /// Direction counts of `steps` uniform draws, written into `counts`.
    #[inline]
    pub fn draw_counts<R: RngCore + ?Sized>(&self, steps: u64, rng: &mut R, counts: &mut [u64]) {
        counts.iter_mut().for_each(|c| *c = 0);
        let order = self.step.params().order();
        for _ in 0..steps {
            counts[uniform_index(rng, order) as usize] += 1;
        }
    }

    /// `n^(-1/N) Σ counts_k atom_k`, rotated by `e^(iπ/N)` for negative time.
    pub fn position(&self, counts: &[u64], negative_time: bool) -> Complex64 {
        let s: Complex64 = counts.iter().zip(self.step.atoms()).map(|(&c, a)| a * c as f64).sum();
        let w = s * self.scale;
        if negative_time {
            w * self.backward
        } else {
            w
        }
    }

    /// One draw of `W_n(t)`.
    pub fn sample<R: RngCore + ?Sized>(&self, t: f64, rng: &mut R) -> Complex64 {
        let mut counts = vec![0u64; self.step.atoms().len()];
        self.sample_with(t, rng, &mut counts)
    }

    #[inline]
    pub(crate) fn sample_with<R: RngCore + ?Sized>(&self, t: f64, rng: &mut R, counts: &mut [u64]) -> Complex64 {
        self.draw_counts(walk_steps(self.n, t), rng, counts);
        self.position(counts, t < 0.0)
    }

    /// `W_n(t)` for replicas `0..replicas` with the per-replica streams used
    /// by the Monte Carlo solver.
    pub fn replicas(&self, t: f64, replicas: usize, seed: u64) -> Vec<Complex64> {
        let mut counts = vec![0u64; self.step.atoms().len()];
        (0..replicas)
            .map(|r| self.sample_with(t, &mut replica_rng(seed, r as u64), &mut counts))
            .collect()
    }
}

/// One draw of `W_n(t)`: `n^(-1/N)` times a sum of `⌊n|t|⌋` steps, rotated by
/// `e^(iπ/N)` when `t < 0`.
pub fn sample_w<R: RngCore + ?Sized>(params: &ModelParams, n: u64, t: f64, rng: &mut R) -> Result<Complex64> {
    Ok(WalkSampler::new(*params, n)?.sample(t, rng))
}

/// A sampled trajectory of `W_n` on the grid `k/n`.
#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub params: ModelParams,
    pub n: u64,
    pub seed: u64,
    /// Signed step index `k`, time `k/n`.
    pub steps: Vec<i64>,
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Direction indices of the forward copies `X^(1), X^(2), …`.
    pub forward_directions: Vec<u32>,
    /// Direction indices of the backward copies `X^(-1), X^(-2), …`.
    pub backward_directions: Vec<u32>,
}

impl PathSample {
    /// CSV rows `step,t,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,t,re,im")?;
        for ((k, t), z) in self.steps.iter().zip(&self.times).zip(&self.values) {
            writeln!(w, "{k},{t},{},{}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Samples `W_n` on `[t_min, t_max]` (with `t_min <= 0 <= t_max`); the two
/// time directions use independent streams 0 and 1 of `seed`.
pub fn sample_path(params: &ModelParams, n: u64, t_min: f64, t_max: f64, seed: u64) -> Result<PathSample> {
    sample_path_replica(params, n, t_min, t_max, seed, 0)
}

/// Path number `replica` of a family; its time directions use streams
/// `2·replica` and `2·replica + 1` of `seed`.
pub fn sample_path_replica(
    params: &ModelParams,
    n: u64,
    t_min: f64,
    t_max: f64,
    seed: u64,
    replica: u64,
) -> Result<PathSample> {
    if !(t_min <= 0.0 && 0.0 <= t_max) {
        return Err(Error::Precondition(format!("time window [{t_min}, {t_max}] must contain 0")));
    }
    let sampler = WalkSampler::new(*params, n)?;
    let order = params.order();
    let draw = |steps: u64, stream: u64| -> Vec<u32> {
        let mut rng = replica_rng(seed, stream);
        (0..steps).map(|_| uniform_index(&mut rng, order)).collect()
    };
    let forward = draw(walk_steps(n, t_max), 2 * replica);
    let backward = draw(walk_steps(n, t_min), 2 * replica + 1);
    let trace = |dirs: &[u32], negative: bool| -> Vec<Complex64> {
        let mut counts = vec![0u64; order as usize];
        let mut out = vec![Complex64::new(0.0, 0.0)];
        for &d in dirs {
            counts[d as usize] += 1;
            out.push(sampler.position(&counts, negative));
        }
        out
    };
    let fwd = trace(&forward, false);
    let bwd = trace(&backward, true);
    let mut steps = Vec::with_capacity(fwd.len() + bwd.len() - 1);
    let mut values = Vec::with_capacity(steps.capacity());
    for (k, z) in bwd.iter().enumerate().skip(1).rev() {
        steps.push(-(k as i64));
        values.push(*z);
    }
    for (k, z) in fwd.iter().enumerate() {
        steps.push(k as i64);
        values.push(*z);
    }
    let times = steps.iter().map(|&k| k as f64 / n as f64).collect();
    Ok(PathSample {
        params: *params,
        n,
        seed,
        steps,
        times,
        values,
        forward_directions: forward,
        backward_directions: backward,
    })
}

/// Unnormalised trajectory `S_0 = 0, S_1, …, S_steps` of replica `replica`.
pub fn sample_trace(params: &ModelParams, steps: u64, seed: u64, replica: u64) -> Vec<Complex64> {
    let step = StepDistribution::new(*params);
    let mut rng = replica_rng(seed, replica);
    let mut z = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(z);
    for _ in 0..steps {
        z += step.sample(&mut rng).1;
        out.push(z);
    }
    out
}

/// `1 - exp(-ε² / (|α|^(2/N) n))`: Gaussian approximation of `P(|S_n| <= ε)`.
pub fn gaussian_ball_probability(params: &ModelParams, epsilon: f64, n: u64) -> f64 {
    let sigma2 = params.alpha().norm().powf(2.0 / params.order() as f64);
    -(-epsilon * epsilon / (sigma2 * n as f64)).exp_m1()
}

/// `exp(-ε² |α|^(-2/N) n^(2/N - 1))`: Gaussian approximation of
/// `P(|n^(-1/N) S_n| > ε)`.
pub fn escape_reference(params: &ModelParams, n: u64, epsilon: f64) -> f64 {
    let order = params.order() as f64;
    let sigma2 = params.alpha().norm().powf(2.0 / order);
    (-epsilon * epsilon / sigma2 * (n as f64).powf(2.0 / order - 1.0)).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct NeighborhoodReport {
    pub order: u32,
    pub epsilon: f64,
    pub n_max: u64,
    pub replicas: usize,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    /// Mean number of `n <= checkpoint` with `|S_n| <= ε`; estimates
    /// `Σ_{n<=checkpoint} P(|S_n| <= ε)`.
    pub mean_visits: Vec<f64>,
    pub visits_stderr: Vec<f64>,
    /// Partial sums of [`gaussian_ball_probability`].
    pub gaussian_reference: Vec<f64>,
    /// Checkpoints used for the `c·ln n + b` fit.
    pub fit_window: (u64, u64),
    pub log_fit: LineFit,
}

fn log_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..)
        .map(|i| 10f64.powf(i as f64 / 20.0).round() as u64)
        .take_while(|&c| c < n_max)
        .collect();
    out.push(n_max);
    out.dedup();
    out
}

#[derive(Clone)]
struct MomentSums {
    count: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl MomentSums {
    fn new(dim: usize) -> Self {
        MomentSums { count: 0.0, sum: vec![0.0; dim], sum_sq: vec![0.0; dim] }
    }

    fn push(&mut self, values: impl Iterator<Item = f64>) {
        self.count += 1.0;
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sum_sq.iter_mut().zip(&other.sum_sq).for_each(|(a, b)| *a += b);
        self
    }

    fn mean_and_stderr(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let mean = s / n;
                let var = if n > 1.0 { ((q - n * mean * mean) / (n - 1.0)).max(0.0) } else { f64::NAN };
                (mean, (var / n).sqrt())
            })
            .unzip()
    }
}

/// Monte Carlo estimate of the expected number of visits of `S_n` to the
/// closed ball `B(0, ε)` for `n <= n_max`, sampled at log-spaced checkpoints.
pub fn neighborhood_visit_stats(
    params: &ModelParams,
    epsilon: f64,
    n_max: u64,
    replicas: usize,
    seed: u64,
    backend: Backend,
) -> Result<NeighborhoodReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    if n_max == 0 || replicas == 0 {
        return Err(Error::Precondition("n_max and replicas must be positive".into()));
    }
    let checkpoints = log_checkpoints(n_max);
    let step = StepDistribution::new(*params);
    let eps2 = epsilon * epsilon;
    let dim = checkpoints.len();
    let blocks = block_count(replicas, REPLICA_BLOCK);
    let sums = backend
        .map_reduce(
            blocks,
            |b| {
                let (start, len) = block_range(b, REPLICA_BLOCK, replicas);
                let mut acc = MomentSums::new(dim);
                let mut visits_at = vec![0u64; dim];
                for r in start..start + len {
                    let mut rng = replica_rng(seed, r as u64);
                    let mut z = Complex64::new(0.0, 0.0);
                    let mut visits = 0u64;
                    let mut next = 0;
                    for k in 1..=n_max {
                        z += step.sample(&mut rng).1;
                        if z.norm_sqr() <= eps2 {
                            visits += 1;
                        }
                        if k == checkpoints[next] {
                            visits_at[next] = visits;
                            next += 1;
                        }
                    }
                    acc.push(visits_at.iter().map(|&v| v as f64));
                }
                acc
            },
            MomentSums::merge,
        )
        .expect("at least one block");
    let (mean_visits, visits_stderr) = sums.mean_and_stderr();
    let mut gaussian_reference = Vec::with_capacity(dim);
    let mut acc = 0.0;
    let mut k = 0u64;
    for &c in &checkpoints {
        while k < c {
            k += 1;
            acc += gaussian_ball_probability(params, epsilon, k);
        }
        gaussian_reference.push(acc);
    }
    let lo = (n_max / 100).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = checkpoints
        .iter()
        .zip(&mean_visits)
        .filter(|(c, _)| **c >= lo)
        .map(|(c, v)| ((*c as f64).ln(), *v))
        .unzip();
    let log_fit = linear_fit(&xs, &ys).unwrap_or(LineFit { slope: f64::NAN, intercept: f64::NAN, rmse: f64::NAN });
    Ok(NeighborhoodReport {
        order: params.order(),
        epsilon,
        n_max,
        replicas,
        seed,
        checkpoints,
        mean_visits,
        visits_stderr,
        gaussian_reference,
        fit_window: (lo, n_max),
        log_fit,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EscapeEstimate {
    pub n: u64,
    pub epsilon: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// [`escape_reference`] at the same `(n, ε)`.
    pub reference: f64,
}

/// Monte Carlo estimate of `P(|n^(-1/N) S_n| > ε)`.
pub fn escape_probability(
    params: &ModelParams,
    n: u64,
    epsilon: f64,
    replicas: usize,
    seed: u64,
    backend: Backend,
) -> Result<EscapeEstimate> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    if replicas == 0 {
        return Err(Error::Precondition("replicas must be positive".into()));
    }
    let sampler = WalkSampler::new(*params, n)?;
    let blocks = block_count(replicas, REPLICA_BLOCK);
    let escaped: u64 = backend
        .map_reduce(
            blocks,
            |b| {
                let (start, len) = block_range(b, REPLICA_BLOCK, replicas);
                let mut counts = vec![0u64; params.order() as usize];
                (start..start + len)
                    .filter(|&r| {
                        let w = sampler.sample_with(1.0, &mut replica_rng(seed, r as u64), &mut counts);
                        w.norm() > epsilon
                    })
                    .count() as u64
            },
            |a, b| a + b,
        )
        .unwrap_or(0);
    let p = escaped as f64 / replicas as f64;
    Ok(EscapeEstimate {
        n,
        epsilon,
        estimate: p,
        stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
        reference: escape_reference(params, n, epsilon),
    })
}
