//! Initial data `f(x) = Σ c_j e^(i x y_j)` given by finite atomic measures,
//! the exponential seminorms on them, and the Fourier-multiplier semigroup
//! `T(t)` solving the heat-type equation exactly.

use std::io::{Read, Write};
use std::ops::{Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::{i_pow, ModelParams};

/// Multipliers with modulus above this are refused.
pub const GROWTH_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub y: f64,
    pub c: Complex64,
}

/// Finite complex measure `Σ c_j δ_(y_j)`, kept sorted by `y` with distinct
/// frequencies and no zero weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (f64, Complex64)>) -> Result<Self> {
        let mut list: Vec<Atom> = Vec::new();
        for (y, c) in atoms {
            if !y.is_finite() || !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite atom ({y}, {c})")));
            }
            // fold -0.0 into 0.0 so both merge
            list.push(Atom { y: y + 0.0, c });
        }
        list.sort_by(|a, b| a.y.total_cmp(&b.y));
        let mut merged: Vec<Atom> = Vec::with_capacity(list.len());
        for a in list {
            match merged.last_mut() {
                Some(last) if last.y == a.y => last.c += a.c,
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.c != Complex64::new(0.0, 0.0));
        Ok(AtomicMeasure { atoms: merged })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weight at frequency `y`, zero if absent.
    pub fn weight(&self, y: f64) -> Complex64 {
        self.atoms
            .binary_search_by(|a| a.y.total_cmp(&(y + 0.0)))
            .map_or(Complex64::new(0.0, 0.0), |i| self.atoms[i].c)
    }

    /// Same frequencies, weights transformed by `f(y, c)`.
    fn map_weights(&self, f: impl Fn(f64, Complex64) -> Complex64) -> AtomicMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { y: a.y, c: f(a.y, a.c) })
            .filter(|a| a.c != Complex64::new(0.0, 0.0))
            .collect();
        AtomicMeasure { atoms }
    }
}

impl TryFrom<Vec<Atom>> for AtomicMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        AtomicMeasure::new(atoms.into_iter().map(|a| (a.y, a.c)))
    }
}

impl From<AtomicMeasure> for Vec<Atom> {
    fn from(m: AtomicMeasure) -> Self {
        m.atoms
    }
}

/// Admissible initial datum `f(z) = Σ c_j e^(i z y_j)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Datum {
    measure: AtomicMeasure,
}

impl Datum {
    pub fn new(atoms: impl IntoIterator<Item = (f64, Complex64)>) -> Result<Self> {
        Ok(Datum { measure: AtomicMeasure::new(atoms)? })
    }

    pub fn from_measure(measure: AtomicMeasure) -> Self {
        Datum { measure }
    }

    pub fn zero() -> Self {
        Datum::default()
    }

    /// `f ≡ c`.
    pub fn constant(c: Complex64) -> Self {
        Datum::new([(0.0, c)]).expect("finite constant")
    }

    /// `cos(ω x)`.
    pub fn cosine(omega: f64) -> Self {
        let h = Complex64::new(0.5, 0.0);
        Datum::new([(omega, h), (-omega, h)]).expect("finite frequency")
    }

    /// `sin(ω x)`.
    pub fn sine(omega: f64) -> Self {
        let h = Complex64::new(0.0, 0.5);
        Datum::new([(omega, -h), (-omega, h)]).expect("finite frequency")
    }

    pub fn measure(&self) -> &AtomicMeasure {
        &self.measure
    }

    pub fn atoms(&self) -> &[Atom] {
        self.measure.atoms()
    }

    pub fn scale(&self, s: Complex64) -> Datum {
        Datum { measure: self.measure.map_weights(|_, c| c * s) }
    }

    pub fn add(&self, other: &Datum) -> Datum {
        let atoms = self.atoms().iter().chain(other.atoms()).map(|a| (a.y, a.c));
        Datum::new(atoms).expect("atoms already finite")
    }

    /// CSV with header `y,c_re,c_im`. Values are written in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for a in self.atoms() {
            wtr.serialize(CsvAtom { y: a.y, c_re: a.c.re, c_im: a.c.im })?;
        }
        if self.atoms().is_empty() {
            wtr.write_record(["y", "c_re", "c_im"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`Datum::write_csv`]; lines starting with `#`
    /// are ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Datum> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["y", "c_re", "c_im"] {
            return Err(Error::Format(format!("expected header y,c_re,c_im, got {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let atoms = rdr
            .deserialize::<CsvAtom>()
            .map(|row| row.map(|a| (a.y, Complex64::new(a.c_re, a.c_im))).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Datum::new(atoms)
    }

    /// JSON array of `{"y", "re", "im"}` objects.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let rows: Vec<JsonAtom> = self.atoms().iter().map(|a| JsonAtom { y: a.y, re: a.c.re, im: a.c.im }).collect();
        serde_json::to_writer_pretty(w, &rows)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Datum> {
        let rows: Vec<JsonAtom> = serde_json::from_reader(r)?;
        Datum::new(rows.into_iter().map(|a| (a.y, Complex64::new(a.re, a.im))))
    }
}

impl Sub for &Datum {
    type Output = Datum;

    fn sub(self, other: &Datum) -> Datum {
        self.add(&-other)
    }
}

impl Neg for &Datum {
    type Output = Datum;

    fn neg(self) -> Datum {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[derive(Serialize, Deserialize)]
struct CsvAtom {
    y: f64,
    c_re: f64,
    c_im: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonAtom {
    y: f64,
    re: f64,
    im: f64,
}

/// `f(z) = Σ c_j exp(i z y_j)` at complex `z`.
pub fn eval_datum(d: &Datum, z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    d.atoms().iter().map(|a| a.c * (i * z * a.y).exp()).sum()
}

/// `‖f‖_n = Σ |c_j| e^(n |y_j|)`.
pub fn seminorm(d: &Datum, n: u32) -> f64 {
    d.atoms().iter().map(|a| a.c.norm() * (n as f64 * a.y.abs()).exp()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    /// Upper bound on the omitted terms `n > n_terms`.
    pub tail_bound: f64,
}

/// `Σ_(n=0)^(n_terms) 2^(-n) ‖d1-d2‖_n / (1 + ‖d1-d2‖_n)`.
pub fn metric(d1: &Datum, d2: &Datum, n_terms: u32) -> Result<MetricValue> {
    if n_terms == 0 {
        return Err(Error::Precondition("metric needs at least one term".into()));
    }
    let diff = d1 - d2;
    let value = (0..=n_terms)
        .map(|n| {
            let s = seminorm(&diff, n);
            let q = if s.is_infinite() { 1.0 } else { s / (1.0 + s) };
            0.5f64.powi(n as i32) * q
        })
        .sum();
    Ok(MetricValue { value, tail_bound: 0.5f64.powi(n_terms as i32) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Contractivity {
    /// `|exp(i^N α y^N t / N!)| <= 1` for all real `y` and `t >= 0`.
    pub contractive_forward: bool,
    /// The same for all real `t`.
    pub contractive_bidirectional: bool,
}

/// Whether every multiplier has modulus at most one. For even `N` the modulus
/// is `exp(Re((-1)^(N/2) α) y^N t / N!)`; for odd `N`, `y^N` changes sign and
/// only real `α` keeps the modulus at one.
pub fn contractivity_check(params: &ModelParams) -> Contractivity {
    let order = params.order();
    let alpha = params.alpha();
    if order.is_multiple_of(2) {
        let growth = (i_pow(order) * alpha).re;
        Contractivity { contractive_forward: growth <= 0.0, contractive_bidirectional: growth == 0.0 }
    } else {
        let real = alpha.im == 0.0;
        Contractivity { contractive_forward: real, contractive_bidirectional: real }
    }
}

/// `exp(i^N α y^N t / N!)`, refused when its modulus would exceed
/// [`GROWTH_LIMIT`].
pub fn multiplier(params: &ModelParams, y: f64, t: f64) -> Result<Complex64> {
    let exponent = params.symbol() * y.powi(params.order() as i32) * t;
    if exponent.re > GROWTH_LIMIT.ln() {
        return Err(Error::Range(format!(
            "multiplier at y = {y}, t = {t} has modulus e^{:.1} beyond 1e300",
            exponent.re
        )));
    }
    Ok(exponent.exp())
}

/// `T(t) f`: weights multiplied by `exp(i^N α y^N t / N!)`.
pub fn apply_semigroup(params: &ModelParams, d: &Datum, t: f64) -> Result<Datum> {
    let atoms = d
        .atoms()
        .iter()
        .map(|a| Ok((a.y, a.c * multiplier(params, a.y, t)?)))
        .collect::<Result<Vec<_>>>()?;
    Datum::new(atoms)
}

/// `A f`: weights multiplied by `i^N α y^N / N!`.
pub fn apply_generator(params: &ModelParams, d: &Datum) -> Datum {
    let symbol = params.symbol();
    let order = params.order() as i32;
    Datum { measure: d.measure.map_weights(|y, c| c * symbol * y.powi(order)) }
}

/// `∂_x^k f`: weights multiplied by `(iy)^k`.
pub fn spatial_derivative(d: &Datum, k: u32) -> Datum {
    let ik = i_pow(k);
    Datum { measure: d.measure.map_weights(|y, c| c * ik * y.powi(k as i32)) }
}

/// `u(t, x) = Σ c_j e^(i x y_j) exp(i^N α y_j^N t / N!)`.
pub fn exact_solution(params: &ModelParams, d: &Datum, t: f64, x: f64) -> Result<Complex64> {
    Ok(eval_datum(&apply_semigroup(params, d, t)?, Complex64::new(x, 0.0)))
}
