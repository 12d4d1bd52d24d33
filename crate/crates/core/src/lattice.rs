//! Exact lattice arithmetic for walk positions.
//!
//! A position of the walk is an integer combination of the N-th roots of
//! unity. It is stored as a coefficient vector in the basis
//! `1, ζ, …, ζ^(φ(N)-1)`, reduced modulo the N-th cyclotomic polynomial, so
//! two positions are the same complex number iff their vectors are equal.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::ModelParams;

/// Largest admissible `φ(N)` unless a lattice is built with a custom cap.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Monic integer polynomial, coefficients from degree 0 upwards.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CyclotomicPolynomial {
    order: u32,
    coeffs: Vec<i64>,
}

impl CyclotomicPolynomial {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c as f64)
    }
}

impl fmt::Display for CyclotomicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (deg, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else { "+" };
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.unsigned_abs();
            match (deg, mag) {
                (0, m) => write!(f, "{m}")?,
                (1, 1) => write!(f, "x")?,
                (1, m) => write!(f, "{m}x")?,
                (d, 1) => write!(f, "x^{d}")?,
                (d, m) => write!(f, "{m}x^{d}")?,
            }
        }
        Ok(())
    }
}

pub fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            while n.is_multiple_of(p) {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// Φ_N from `x^N - 1 = Π_{d | N} Φ_d`.
pub fn cyclotomic_polynomial(order: u32) -> Result<CyclotomicPolynomial> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    let mut memo = BTreeMap::new();
    let coeffs = cyclotomic_coeffs(order, &mut memo)?;
    Ok(CyclotomicPolynomial { order, coeffs })
}

fn cyclotomic_coeffs(n: u32, memo: &mut BTreeMap<u32, Vec<i64>>) -> Result<Vec<i64>> {
    if let Some(c) = memo.get(&n) {
        return Ok(c.clone());
    }
    // x^n - 1
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in (1..n).filter(|d| n.is_multiple_of(*d)) {
        let divisor = cyclotomic_coeffs(d, memo)?;
        num = exact_monic_division(&num, &divisor)?;
    }
    memo.insert(n, num.clone());
    Ok(num)
}

fn exact_monic_division(num: &[i64], den: &[i64]) -> Result<Vec<i64>> {
    let overflow = || Error::Range("cyclotomic coefficient overflow".into());
    let dn = den.len() - 1;
    let mut rem = num.to_vec();
    let qlen = num.len() - dn;
    let mut quot = vec![0i64; qlen];
    for i in (0..qlen).rev() {
        let c = rem[i + dn];
        quot[i] = c;
        if c != 0 {
            for (j, &dj) in den.iter().enumerate() {
                let prod = c.checked_mul(dj).ok_or_else(overflow)?;
                rem[i + j] = rem[i + j].checked_sub(prod).ok_or_else(overflow)?;
            }
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0), "division by a cyclotomic factor is exact");
    Ok(quot)
}

/// Canonical coefficient vector of a lattice point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CyclotomicPoint {
    order: u32,
    coeffs: Vec<i64>,
}

impl CyclotomicPoint {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn try_add(&self, other: &CyclotomicPoint) -> Result<CyclotomicPoint> {
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.checked_add(*b).ok_or_else(|| Error::Range("lattice coefficient overflow".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(CyclotomicPoint { order: self.order, coeffs })
    }

    /// `Σ coeffs_j ζ^j` for the point's own order, without the α-root factor.
    pub fn unit_complex(&self) -> Complex64 {
        let n = self.order as f64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(j, &c)| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n) * c as f64)
            .sum()
    }
}

impl fmt::Display for CyclotomicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Canonical sum of two points of the same order.
pub fn add(a: &CyclotomicPoint, b: &CyclotomicPoint) -> Result<CyclotomicPoint> {
    a.try_add(b)
}

/// `scale · α^(1/N) · Σ coeffs_j ζ^j` with the principal root of α.
pub fn to_complex(p: &CyclotomicPoint, params: &ModelParams, scale: f64) -> Complex64 {
    debug_assert_eq!(p.order, params.order());
    params.root() * p.unit_complex() * scale
}

/// The additive lattice `Z[ζ_N]` with its reduction tables.
#[derive(Debug, Clone)]
pub struct Lattice {
    poly: CyclotomicPolynomial,
    directions: Vec<CyclotomicPoint>,
}

impl Lattice {
    pub fn new(order: u32) -> Result<Self> {
        Self::with_degree_cap(order, DEFAULT_DEGREE_CAP)
    }

    pub fn with_degree_cap(order: u32, cap: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        let phi = euler_phi(order as u64) as usize;
        if phi > cap {
            return Err(Error::CapExceeded { what: format!("degree phi({order}) = {phi}"), cap });
        }
        let poly = cyclotomic_polynomial(order)?;
        let mut lattice = Lattice { poly, directions: Vec::new() };
        lattice.directions = (0..order as usize)
            .map(|k| {
                let mut raw = vec![0i64; k + 1];
                raw[k] = 1;
                lattice.reduce(&raw)
            })
            .collect::<Result<_>>()?;
        Ok(lattice)
    }

    pub fn order(&self) -> u32 {
        self.poly.order
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn polynomial(&self) -> &CyclotomicPolynomial {
        &self.poly
    }

    pub fn zero(&self) -> CyclotomicPoint {
        CyclotomicPoint { order: self.order(), coeffs: vec![0; self.degree()] }
    }

    /// Canonical representative of `ζ^k`.
    pub fn direction(&self, k: usize) -> Result<CyclotomicPoint> {
        self.directions
            .get(k)
            .cloned()
            .ok_or(Error::IndexOutOfRange { index: k, order: self.order() })
    }

    pub fn directions(&self) -> &[CyclotomicPoint] {
        &self.directions
    }

    /// Reduces an integer polynomial in ζ (any length) modulo Φ_N.
    pub fn reduce(&self, raw: &[i64]) -> Result<CyclotomicPoint> {
        let deg = self.degree();
        let phi = &self.poly.coeffs;
        let mut v = raw.to_vec();
        if v.len() < deg {
            v.resize(deg, 0);
        }
        let overflow = || Error::Range("lattice coefficient overflow".into());
        for i in (deg..v.len()).rev() {
            let c = v[i];
            if c == 0 {
                continue;
            }
            for (j, &pj) in phi.iter().enumerate().take(deg) {
                let prod = c.checked_mul(pj).ok_or_else(overflow)?;
                v[i - deg + j] = v[i - deg + j].checked_sub(prod).ok_or_else(overflow)?;
            }
            v[i] = 0;
        }
        v.truncate(deg);
        Ok(CyclotomicPoint { order: self.order(), coeffs: v })
    }

    /// `Σ_k counts[k] ζ^k`.
    pub fn from_direction_counts(&self, counts: &[u64]) -> Result<CyclotomicPoint> {
        if counts.len() != self.order() as usize {
            return Err(Error::InvalidParameter(format!(
                "expected {} direction counts, got {}",
                self.order(),
                counts.len()
            )));
        }
        let raw = counts
            .iter()
            .map(|&c| i64::try_from(c).map_err(|_| Error::Range("direction count overflow".into())))
            .collect::<Result<Vec<_>>>()?;
        self.reduce(&raw)
    }

    /// Image of `p` under the additive map sending `ζ^i` to `ζ^(map(i))`.
    pub(crate) fn permute(&self, p: &CyclotomicPoint, map: impl Fn(usize) -> usize) -> Result<CyclotomicPoint> {
        if p.order != self.order() {
            return Err(Error::OrderMismatch { left: p.order, right: self.order() });
        }
        let mut out = self.zero();
        for (i, &c) in p.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let img = &self.directions[map(i) % self.order() as usize];
            for (o, &d) in out.coeffs.iter_mut().zip(&img.coeffs) {
                *o = o
                    .checked_add(c.checked_mul(d).ok_or_else(|| Error::Range("lattice coefficient overflow".into()))?)
                    .ok_or_else(|| Error::Range("lattice coefficient overflow".into()))?;
            }
        }
        Ok(out)
    }
}
