//! Half-line and interval problems, reduced to whole-line problems on odd,
//! even or periodic data.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Backend;
use crate::solver::{solve_spectral, solve_walk_exact, solve_walk_mc};
use crate::spectral::{apply_generator, Datum};
use crate::step::ModelParams;

const FREQ_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryKind {
    DirichletHalfLine,
    NeumannHalfLine,
    Periodic { l: f64 },
    Dirichlet { l: f64 },
    Neumann { l: f64 },
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::DirichletHalfLine => "dirichlet-halfline",
            BoundaryKind::NeumannHalfLine => "neumann-halfline",
            BoundaryKind::Periodic { .. } => "periodic",
            BoundaryKind::Dirichlet { .. } => "dirichlet",
            BoundaryKind::Neumann { .. } => "neumann",
        }
    }

    /// Builds a kind from its name and, where needed, the period or
    /// interval length.
    pub fn from_name(name: &str, l: Option<f64>) -> Result<Self> {
        let need_l = || {
            let l = l.ok_or_else(|| Error::InvalidBoundaryDatum(format!("{name} needs a length L")))?;
            if l > 0.0 && l.is_finite() {
                Ok(l)
            } else {
                Err(Error::InvalidBoundaryDatum(format!("L must be positive and finite, got {l}")))
            }
        };
        match name {
            "dirichlet-halfline" => Ok(BoundaryKind::DirichletHalfLine),
            "neumann-halfline" => Ok(BoundaryKind::NeumannHalfLine),
            "periodic" => Ok(BoundaryKind::Periodic { l: need_l()? }),
            "dirichlet" => Ok(BoundaryKind::Dirichlet { l: need_l()? }),
            "neumann" => Ok(BoundaryKind::Neumann { l: need_l()? }),
            other => Err(Error::InvalidBoundaryDatum(format!("unknown boundary condition `{other}`"))),
        }
    }

    pub fn length(&self) -> Option<f64> {
        match *self {
            BoundaryKind::Periodic { l } | BoundaryKind::Dirichlet { l } | BoundaryKind::Neumann { l } => Some(l),
            _ => None,
        }
    }

    /// Required symmetry of the whole-line measure.
    pub fn parity(&self) -> Option<Parity> {
        match self {
            BoundaryKind::DirichletHalfLine | BoundaryKind::Dirichlet { .. } => Some(Parity::Odd),
            BoundaryKind::NeumannHalfLine | BoundaryKind::Neumann { .. } => Some(Parity::Even),
            BoundaryKind::Periodic { .. } => None,
        }
    }

    /// Spacing of the admissible frequency lattice.
    pub fn frequency_step(&self) -> Option<f64> {
        match *self {
            BoundaryKind::Periodic { l } => Some(2.0 * PI / l),
            BoundaryKind::Dirichlet { l } | BoundaryKind::Neumann { l } => Some(PI / l),
            _ => None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.length() {
            Some(l) => (0.0..=l).contains(&x),
            None => x >= 0.0,
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.length() {
            Some(l) => write!(f, "bc={} L={l}", self.name()),
            None => write!(f, "bc={} L=inf", self.name()),
        }
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    /// Parses `bc=<kind> L=<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut name = None;
        let mut l = None;
        for token in s.split_whitespace() {
            match token.split_once('=') {
                Some(("bc", v)) => name = Some(v),
                Some(("L", "inf")) => {}
                Some(("L", v)) => {
                    l = Some(v.parse::<f64>().map_err(|_| Error::Format(format!("bad length `{v}`")))?)
                }
                _ => return Err(Error::Format(format!("unexpected token `{token}` in boundary header"))),
            }
        }
        let name = name.ok_or_else(|| Error::Format("boundary header lacks bc=".into()))?;
        BoundaryKind::from_name(name, l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Odd,
    Even,
}

/// Largest mismatch `|c(y) ∓ c(-y)|` relative to the largest weight, with an
/// atom at `y = 0` counting fully against odd parity.
pub fn parity_defect(d: &Datum, parity: Parity) -> f64 {
    let scale = d.atoms().iter().map(|a| a.c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let m = d.measure();
    d.atoms()
        .iter()
        .map(|a| {
            let mirror = m.weight(-a.y);
            match parity {
                Parity::Odd if a.y == 0.0 => a.c.norm(),
                Parity::Odd => (a.c + mirror).norm(),
                Parity::Even => (a.c - mirror).norm(),
            }
        })
        .fold(0.0, f64::max)
        / scale
}

/// Largest distance of a frequency from the lattice `step · ℤ`.
pub fn lattice_defect(d: &Datum, step: f64) -> f64 {
    d.atoms()
        .iter()
        .map(|a| (a.y - (a.y / step).round() * step).abs())
        .fold(0.0, f64::max)
}

/// Whole-line datum together with the boundary problem it encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDatum {
    base: Datum,
    kind: BoundaryKind,
}

impl BoundaryDatum {
    /// Checks the parity and frequency-lattice invariants of `kind`.
    pub fn new(base: Datum, kind: BoundaryKind) -> Result<Self> {
        if let Some(parity) = kind.parity() {
            let defect = parity_defect(&base, parity);
            if defect > WEIGHT_TOL {
                return Err(Error::InvalidBoundaryDatum(format!(
                    "{} data must be {parity:?}; weight pairing defect {defect:e}",
                    kind.name()
                )));
            }
        }
        if let Some(step) = kind.frequency_step() {
            let defect = lattice_defect(&base, step);
            if defect > FREQ_TOL {
                return Err(Error::InvalidBoundaryDatum(format!(
                    "{} data needs frequencies in {step}·Z; off by {defect:e}",
                    kind.name()
                )));
            }
        }
        Ok(BoundaryDatum { base, kind })
    }

    pub fn base(&self) -> &Datum {
        &self.base
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    /// Datum CSV preceded by the line `# bc=<kind> L=<value>`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.kind)?;
        self.base.write_csv(w)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let header = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("boundary file must start with `# bc=<kind> L=<value>`".into()))?;
        let kind: BoundaryKind = header.trim().parse()?;
        BoundaryDatum::new(Datum::read_csv(reader)?, kind)
    }
}

fn series_atoms(omega: f64, coeffs: impl Iterator<Item = (usize, f64)>, odd: bool) -> Vec<(f64, Complex64)> {
    let mut atoms = Vec::new();
    for (k, b) in coeffs {
        let y = k as f64 * omega;
        if k == 0 {
            atoms.push((0.0, Complex64::new(b, 0.0)));
        } else if odd {
            // b sin(yx) = (-ib/2) e^(iyx) + (ib/2) e^(-iyx)
            atoms.push((y, Complex64::new(0.0, -b / 2.0)));
            atoms.push((-y, Complex64::new(0.0, b / 2.0)));
        } else {
            atoms.push((y, Complex64::new(b / 2.0, 0.0)));
            atoms.push((-y, Complex64::new(b / 2.0, 0.0)));
        }
    }
    atoms
}

/// `Σ_(k>=1) b_k sin(kπx/L)` as Dirichlet data on `[0, L]`; `b[0]` is `b_1`.
pub fn sine_series(l: f64, b: &[f64]) -> Result<BoundaryDatum> {
    let kind = BoundaryKind::from_name("dirichlet", Some(l))?;
    let atoms = series_atoms(PI / l, b.iter().enumerate().map(|(i, &v)| (i + 1, v)), true);
    BoundaryDatum::new(Datum::new(atoms)?, kind)
}

/// `Σ_(k>=0) a_k cos(kπx/L)` as Neumann data on `[0, L]`; `a[0]` is `a_0`.
pub fn cosine_series(l: f64, a: &[f64]) -> Result<BoundaryDatum> {
    let kind = BoundaryKind::from_name("neumann", Some(l))?;
    let atoms = series_atoms(PI / l, a.iter().copied().enumerate(), false);
    BoundaryDatum::new(Datum::new(atoms)?, kind)
}

/// Periodic data `a_0 + Σ_(k>=1) (a_k cos(2πkx/L) + b_k sin(2πkx/L))`;
/// `b[0]` is `b_1`.
pub fn fourier_series(l: f64, a: &[f64], b: &[f64]) -> Result<BoundaryDatum> {
    let kind = BoundaryKind::from_name("periodic", Some(l))?;
    let omega = 2.0 * PI / l;
    let mut atoms = series_atoms(omega, a.iter().copied().enumerate(), false);
    atoms.extend(series_atoms(omega, b.iter().enumerate().map(|(i, &v)| (i + 1, v)), true));
    BoundaryDatum::new(Datum::new(atoms)?, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    Sine,
    Cosine,
}

/// A function on `x >= 0` given as `Σ b_k sin(ω_k x)` or `Σ a_k cos(ω_k x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLineSeries {
    pub kind: SeriesKind,
    /// Pairs `(ω_k, coefficient)` with `ω_k >= 0`.
    pub terms: Vec<(f64, f64)>,
}

impl HalfLineSeries {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|(w, c)| match self.kind {
                SeriesKind::Sine => c * (w * x).sin(),
                SeriesKind::Cosine => c * (w * x).cos(),
            })
            .sum()
    }
}

/// Odd or even extension of a half-line series to the whole line, encoded as
/// half-line Dirichlet or Neumann data.
pub fn extend(series: &HalfLineSeries, parity: Parity) -> Result<BoundaryDatum> {
    let kind = match (series.kind, parity) {
        (SeriesKind::Sine, Parity::Odd) => BoundaryKind::DirichletHalfLine,
        (SeriesKind::Cosine, Parity::Even) => BoundaryKind::NeumannHalfLine,
        (kind, parity) => {
            return Err(Error::InvalidExtension(format!(
                "{kind:?} coefficients describe a function that is not {parity:?}"
            )))
        }
    };
    let mut atoms = Vec::new();
    for &(w, c) in &series.terms {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidExtension(format!("frequencies must be nonnegative, got {w}")));
        }
        match series.kind {
            SeriesKind::Sine if w > 0.0 => {
                atoms.push((w, Complex64::new(0.0, -c / 2.0)));
                atoms.push((-w, Complex64::new(0.0, c / 2.0)));
            }
            SeriesKind::Sine => {}
            SeriesKind::Cosine if w == 0.0 => atoms.push((0.0, Complex64::new(c, 0.0))),
            SeriesKind::Cosine => {
                atoms.push((w, Complex64::new(c / 2.0, 0.0)));
                atoms.push((-w, Complex64::new(c / 2.0, 0.0)));
            }
        }
    }
    BoundaryDatum::new(Datum::new(atoms)?, kind)
}

/// Whether the generator keeps the data class of `bd`: always for periodic
/// data, and for odd or even data exactly when `N` is even, since `y^N` is
/// then even in `y`.
pub fn closure_check(params: &ModelParams, bd: &BoundaryDatum) -> bool {
    match bd.kind.parity() {
        None => true,
        Some(_) => params.order().is_multiple_of(2),
    }
}

/// Parity or lattice defect of `A f` for the class of `bd`; zero up to
/// rounding exactly when [`closure_check`] holds, for data with
/// nonzero generator image.
pub fn generator_defect(params: &ModelParams, bd: &BoundaryDatum) -> f64 {
    let af = apply_generator(params, bd.base());
    match (bd.kind.parity(), bd.kind.frequency_step()) {
        (Some(p), step) => parity_defect(&af, p).max(step.map_or(0.0, |s| lattice_defect(&af, s))),
        (None, Some(s)) => lattice_defect(&af, s),
        (None, None) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum BoundaryMethod {
    Spectral,
    WalkExact { n: u64 },
    WalkMc { n: u64, replicas: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySolution {
    pub kind: BoundaryKind,
    pub t: f64,
    pub xs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub stderr: Option<Vec<f64>>,
}

/// Solves the boundary problem on the part of `xs` inside the domain by
/// solving the whole-line problem for the extended data.
pub fn boundary_solve(
    params: &ModelParams,
    bd: &BoundaryDatum,
    t: f64,
    xs: &[f64],
    method: BoundaryMethod,
    backend: Backend,
) -> Result<BoundarySolution> {
    if !closure_check(params, bd) {
        return Err(Error::UnsupportedCombination(format!(
            "{} conditions need an even order: for N = {} the generator maps {:?} data out of the class",
            bd.kind.name(),
            params.order(),
            bd.kind.parity().expect("parity classes only")
        )));
    }
    let xs: Vec<f64> = xs.iter().copied().filter(|&x| bd.kind.contains(x)).collect();
    if xs.is_empty() {
        return Err(Error::Precondition(format!("no grid point lies in the domain of {}", bd.kind)));
    }
    let (values, stderr) = match method {
        BoundaryMethod::Spectral => (solve_spectral(params, bd.base(), t, &xs)?, None),
        BoundaryMethod::WalkExact { n } => (solve_walk_exact(params, bd.base(), n, t, &xs)?, None),
        BoundaryMethod::WalkMc { n, replicas, seed } => {
            let mc = solve_walk_mc(params, bd.base(), n, t, &xs, replicas, seed, backend)?;
            let (v, s) = mc.into_iter().map(|m| (m.estimate, m.stderr())).unzip();
            (v, Some(s))
        }
    };
    Ok(BoundarySolution { kind: bd.kind, t, xs, values, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{apply_semigroup, eval_datum, spatial_derivative};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sine_series_values() {
        let l = 2.0;
        let bd = sine_series(l, &[1.0]).unwrap();
        let f = bd.base();
        assert_eq!(eval_datum(f, c(0.0, 0.0)), c(0.0, 0.0));
        assert!(eval_datum(f, c(l, 0.0)).norm() < 1e-15);
        assert!((eval_datum(f, c(l / 2.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        for a in f.atoms() {
            assert_eq!(a.c + f.measure().weight(-a.y), c(0.0, 0.0));
        }
    }

    #[test]
    fn cosine_series_values() {
        let bd = cosine_series(3.0, &[1.0]).unwrap();
        assert_eq!(bd.base(), &Datum::constant(c(1.0, 0.0)));
        let bd = cosine_series(3.0, &[0.0, 1.0]).unwrap();
        let d = spatial_derivative(bd.base(), 1);
        assert!(eval_datum(&d, c(0.0, 0.0)).norm() < 1e-15);
        assert!(eval_datum(&d, c(3.0, 0.0)).norm() < 1e-14);
        for a in bd.base().atoms() {
            assert_eq!(a.c, bd.base().measure().weight(-a.y));
        }
    }

    #[test]
    fn invariants_are_validated() {
        let l = PI;
        assert!(BoundaryDatum::new(Datum::cosine(1.0), BoundaryKind::Dirichlet { l }).is_err());
        assert!(BoundaryDatum::new(Datum::sine(1.0), BoundaryKind::Neumann { l }).is_err());
        assert!(BoundaryDatum::new(Datum::cosine(1.5), BoundaryKind::Neumann { l }).is_err());
        assert!(BoundaryDatum::new(Datum::cosine(1.0), BoundaryKind::Periodic { l: 2.0 * PI }).is_ok());
        assert!(BoundaryDatum::new(Datum::cosine(0.5), BoundaryKind::Periodic { l: 2.0 * PI }).is_err());
        assert!(BoundaryDatum::new(Datum::constant(c(1.0, 0.0)), BoundaryKind::DirichletHalfLine).is_err());
        assert!(BoundaryKind::from_name("dirichlet", Some(-1.0)).is_err());
        assert!(BoundaryKind::from_name("robin", Some(1.0)).is_err());
    }

    #[test]
    fn extension_rules() {
        let sin = HalfLineSeries { kind: SeriesKind::Sine, terms: vec![(1.0, 1.0)] };
        assert_eq!(extend(&sin, Parity::Odd).unwrap().base(), &Datum::sine(1.0));
        let cos = HalfLineSeries { kind: SeriesKind::Cosine, terms: vec![(1.0, 1.0)] };
        assert_eq!(extend(&cos, Parity::Even).unwrap().base(), &Datum::cosine(1.0));
        assert!(matches!(extend(&sin, Parity::Even), Err(Error::InvalidExtension(_))));
        assert!(matches!(extend(&cos, Parity::Odd), Err(Error::InvalidExtension(_))));

        let mixed = HalfLineSeries { kind: SeriesKind::Sine, terms: vec![(0.5, 2.0), (1.7, -0.3)] };
        let bd = extend(&mixed, Parity::Odd).unwrap();
        for i in 0..40 {
            let x = i as f64 * 0.25;
            assert!((eval_datum(bd.base(), c(x, 0.0)).re - mixed.eval(x)).abs() < 1e-14);
            assert!((eval_datum(bd.base(), c(-x, 0.0)).re + mixed.eval(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn closure_examples() {
        let p3 = ModelParams::real(3, 1.0).unwrap();
        let p4 = ModelParams::real(4, -1.0).unwrap();
        let periodic = fourier_series(2.0 * PI, &[0.0, 1.0], &[]).unwrap();
        let dirichlet = sine_series(PI, &[1.0]).unwrap();
        assert!(closure_check(&p3, &periodic));
        assert!(closure_check(&p4, &dirichlet));
        assert!(!closure_check(&p3, &dirichlet));
        assert_eq!(generator_defect(&p4, &dirichlet), 0.0);
        assert!(generator_defect(&p3, &dirichlet) > 0.5);
        let err = boundary_solve(&p3, &dirichlet, 1.0, &[0.5], BoundaryMethod::Spectral, Backend::Sequential).unwrap_err();
        assert!(err.is_refusal());
    }

    #[test]
    fn dirichlet_single_mode() {
        let p4 = ModelParams::real(4, -1.0).unwrap();
        let bd = sine_series(PI, &[1.0]).unwrap();
        let xs: Vec<f64> = (-4..=40).map(|i| i as f64 * 0.1).collect();
        let sol = boundary_solve(&p4, &bd, 2.0, &xs, BoundaryMethod::Spectral, Backend::Sequential).unwrap();
        assert!(sol.xs.iter().all(|&x| (0.0..=PI).contains(&x)));
        assert_eq!(sol.xs[0], 0.0);
        for (x, u) in sol.xs.iter().zip(&sol.values) {
            assert!((u - c((-2.0f64 / 24.0).exp() * x.sin(), 0.0)).norm() < 1e-14);
        }
        assert!(sol.values[0].norm() < 1e-15);
    }

    #[test]
    fn odd_order_breaks_parity() {
        let p3 = ModelParams::real(3, 1.0).unwrap();
        let p4 = ModelParams::real(4, -1.0).unwrap();
        let bd = sine_series(PI, &[1.0, 0.5]).unwrap();
        assert_eq!(parity_defect(&apply_semigroup(&p4, bd.base(), 1.3).unwrap(), Parity::Odd), 0.0);
        assert!(parity_defect(&apply_semigroup(&p3, bd.base(), 1.3).unwrap(), Parity::Odd) > 1e-3);
    }

    #[test]
    fn boundary_file_round_trip() {
        let bd = cosine_series(2.5, &[0.25, 1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        bd.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# bc=neumann L=2.5\ny,c_re,c_im\n"));
        assert_eq!(BoundaryDatum::read(buf.as_slice()).unwrap(), bd);
        let half = extend(&HalfLineSeries { kind: SeriesKind::Sine, terms: vec![(1.0, 1.0)] }, Parity::Odd).unwrap();
        let mut buf = Vec::new();
        half.write(&mut buf).unwrap();
        assert_eq!(BoundaryDatum::read(buf.as_slice()).unwrap(), half);
        assert!(BoundaryDatum::read("y,c_re,c_im\n".as_bytes()).is_err());
    }
}
