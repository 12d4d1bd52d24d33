//! `heatwalk`: experiments on complex-plane random walks and the
//! probabilistic solution of higher-order heat-type equations.

mod config;
mod output;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatwalk::boundary::{boundary_solve, cosine_series, sine_series, BoundaryDatum, BoundaryKind, BoundaryMethod};
use heatwalk::characteristic::{
    char_s_scaled, clt_error_constant, convergence_table, limit_char, moment_coefficient, moment_faadibruno,
    moment_limit, write_convergence_csv,
};
use heatwalk::solver::{convergence_study, linspace, solve, Method, SolveRequest};
use heatwalk::walk::{
    enumerate_distribution, escape_probability, neighborhood_visit_stats, return_table, sample_path_replica,
    sample_trace,
};
use heatwalk::{Backend, Datum, Error, ModelParams};
use heatwalk::stats::log_log_fit;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::output::{Format, Output};

#[derive(Parser, Serialize)]
#[command(name = "heatwalk", version, about, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Sample, enumerate and analyse the walk
    #[command(subcommand)]
    Walk(WalkCommand),
    /// Exact return probabilities (same as `walk returns`)
    Returns(ReturnsArgs),
    /// Characteristic-function convergence checks
    #[command(subcommand)]
    Clt(CltCommand),
    /// Exact moments of the normalised walk
    Moments(MomentsArgs),
    /// Solve the equation for a datum on an x-grid
    Solve(SolveArgs),
    /// Convergence of the walk solution or of the characteristic function
    Convergence(ConvergenceArgs),
    /// Half-line, interval and periodic problems
    Boundary(BoundaryArgs),
}

#[derive(Subcommand, Serialize)]
enum WalkCommand {
    /// Sampled trajectories `replica,step,re,im`
    Sample(SampleArgs),
    /// Exact law of S_n on the lattice
    Dist(DistArgs),
    /// Exact return probabilities
    Returns(ReturnsArgs),
    /// Neighbourhood visits or escape probabilities
    Stats(StatsArgs),
}

#[derive(Subcommand, Serialize)]
enum CltCommand {
    /// Table of ψ_n(λ) against its limit
    Check(CltArgs),
}

fn parse_order(s: &str) -> Result<u32, String> {
    let n: u32 = s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))?;
    if n < 2 {
        return Err(format!("the walk order N must satisfy N >= 2, got {n}"));
    }
    Ok(n)
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|_| format!("bad real part in `{s}`; expected re,im"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part in `{s}`; expected re,im"))?;
    Ok(Complex64::new(re, im))
}

#[derive(Args, Serialize, Clone)]
struct ModelArgs {
    /// Order N >= 2 of the equation
    #[arg(long, value_parser = parse_order)]
    order: u32,
    /// Coefficient α as `re,im`
    #[arg(long, value_parser = parse_complex, default_value = "1,0", allow_hyphen_values = true)]
    alpha: Complex64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, Error> {
        ModelParams::new(self.order, self.alpha)
    }
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of steps
    #[arg(long)]
    n: u64,
    /// Print the normalised path W_n on the grid k/n up to time t instead of S_0..S_n
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct DistArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ReturnsArgs {
    #[arg(long, value_parser = parse_order)]
    order: u32,
    /// Largest m; rows cover every reachable n <= N·m
    #[arg(long)]
    m_max: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StatsMode {
    Visits,
    Escape,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = StatsMode::Visits)]
    mode: StatsMode,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Walk length for visits; comma-separated lengths for escape
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct CltArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_complex, default_value = "1,0", allow_hyphen_values = true)]
    lambda: Complex64,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000,100000")]
    n_grid: Vec<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct MomentsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k_max: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct GridArgs {
    /// Explicit x values; overrides the range flags
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long, default_value_t = -std::f64::consts::PI, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 257)]
    x_points: usize,
}

impl GridArgs {
    fn xs(&self) -> Vec<f64> {
        match &self.x {
            Some(xs) => xs.clone(),
            None => linspace(self.x_min, self.x_max, self.x_points),
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Spectral,
    WalkExact,
    WalkMc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spectral => Method::Spectral,
            MethodArg::WalkExact => Method::WalkExact,
            MethodArg::WalkMc => Method::WalkMc,
        }
    }
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Datum file: CSV `y,c_re,c_im` or a JSON array of {y, re, im}
    #[arg(long)]
    datum: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::WalkExact)]
    method: MethodArg,
    #[arg(long, default_value_t = 10_000)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConvergenceKind {
    Solution,
    Characteristic,
}

#[derive(Args, Serialize)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ConvergenceKind::Solution)]
    kind: ConvergenceKind,
    /// Datum file (solution kind)
    #[arg(long)]
    datum: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
    n_grid: Vec<u64>,
    /// Bound slack (1 + ε)
    #[arg(long, default_value_t = 1.1)]
    slack: f64,
    /// λ values `re,im;re,im` (characteristic kind)
    #[arg(long, value_parser = parse_complex, value_delimiter = ';', default_value = "1,0", allow_hyphen_values = true)]
    lambda: Vec<Complex64>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct BoundaryArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// dirichlet, neumann, periodic, dirichlet-halfline or neumann-halfline
    #[arg(long)]
    bc: Option<String>,
    #[arg(long = "L")]
    l: Option<f64>,
    /// Boundary datum file (`# bc=<kind> L=<value>` header) or plain datum CSV/JSON
    #[arg(long)]
    datum: Option<PathBuf>,
    /// Sine coefficients b_1, b_2, … of a Dirichlet datum on [0, L]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sine: Option<Vec<f64>>,
    /// Cosine coefficients a_0, a_1, … of a Neumann datum on [0, L]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cosine: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
    method: MethodArg,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 10_000)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure with the exit code it maps to.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Range(_)
            | Error::CapExceeded { .. }
            | Error::Unsupported(_)
            | Error::UnsupportedCombination(_)
            | Error::Io(_) => Failure::Numerical(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn read_datum(path: &PathBuf) -> Result<Datum, Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open datum {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let datum = if is_json { Datum::read_json(file) } else { Datum::read_csv(file) };
    datum.map_err(|e| Failure::Usage(format!("datum {}: {e}", path.display())))
}

fn walk_sample(a: &SampleArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let mut out = Output::open(&a.output, config, Some(a.seed))?;
    let rows: Vec<(u64, i64, Complex64)> = match a.t {
        None => (0..a.replicas)
            .flat_map(|r| {
                sample_trace(&params, a.n, a.seed, r).into_iter().enumerate().map(move |(k, z)| (r, k as i64, z))
            })
            .collect(),
        Some(t) => {
            let mut rows = Vec::new();
            for r in 0..a.replicas {
                let path = sample_path_replica(&params, a.n, t.min(0.0), t.max(0.0), a.seed, r)?;
                rows.extend(path.steps.iter().zip(&path.values).map(|(&k, &z)| (r, k, z)));
            }
            rows
        }
    };
    match a.output.format {
        Format::Csv => {
            out.line("replica,step,re,im")?;
            for (r, k, z) in rows {
                out.line(&format!("{r},{k},{},{}", z.re, z.im))?;
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                replica: u64,
                step: i64,
                re: f64,
                im: f64,
            }
            let rows: Vec<Row> = rows.into_iter().map(|(replica, step, z)| Row { replica, step, re: z.re, im: z.im }).collect();
            out.json(&rows)?;
        }
    }
    out.finish()
}

fn walk_dist(a: &DistArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let dist = enumerate_distribution(&params, a.n)?;
    let mut out = Output::open(&a.output, config, None)?;
    #[derive(Serialize)]
    struct Row {
        point: Vec<i64>,
        paths: String,
        probability: String,
        re: f64,
        im: f64,
    }
    let rows: Vec<Row> = dist
        .iter()
        .map(|(p, c)| {
            let z = heatwalk::lattice::to_complex(p, &params, 1.0);
            Row { point: p.coeffs().to_vec(), paths: c.to_string(), probability: dist.probability(p).to_string(), re: z.re, im: z.im }
        })
        .collect();
    match a.output.format {
        Format::Csv => {
            out.line(&format!("# total paths {}", dist.total()))?;
            out.line("point,paths,probability,re,im")?;
            for r in rows {
                let point = r.point.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                out.line(&format!("({point}),{},{},{},{}", r.paths, r.probability, r.re, r.im))?;
            }
        }
        Format::Json => out.json(&rows)?,
    }
    out.finish()
}

fn returns(a: &ReturnsArgs, config: &str) -> CmdResult {
    let params = ModelParams::real(a.order, 1.0)?;
    let (route, rows) = return_table(&params, a.m_max)?;
    let mut out = Output::open(&a.output, config, None)?;
    #[derive(Serialize)]
    struct Row {
        n: u64,
        paths: String,
        total: String,
        probability: String,
        value: f64,
        partial_sum: f64,
    }
    let mut partial = 0.0;
    let table: Vec<Row> = rows
        .iter()
        .map(|r| {
            let value = r.probability.to_f64().unwrap_or(0.0);
            partial += value;
            Row {
                n: r.n,
                paths: r.paths.to_string(),
                total: r.total.to_string(),
                probability: r.probability.to_string(),
                value,
                partial_sum: partial,
            }
        })
        .collect();
    // the decay fit needs enough points to mean anything
    let fit = if a.m_max >= 10 {
        let ns: Vec<f64> = table.iter().map(|r| r.n as f64).collect();
        let ps: Vec<f64> = table.iter().map(|r| r.value).collect();
        log_log_fit(&ns, &ps)
    } else {
        None
    };
    match a.output.format {
        Format::Csv => {
            out.line(&format!("# route {}", serde_json::to_string(&route).unwrap_or_default().trim_matches('"')))?;
            if let Some(f) = fit {
                out.line(&format!("# log-log slope {} intercept {} rmse {}", f.slope, f.intercept, f.rmse))?;
            }
            out.line("n,paths,total,probability,value,partial_sum")?;
            for r in table {
                out.line(&format!("{},{},{},{},{},{}", r.n, r.paths, r.total, r.probability, r.value, r.partial_sum))?;
            }
        }
        Format::Json => out.json(&serde_json::json!({ "route": route, "fit": fit, "rows": table }))?,
    }
    out.finish()
}

fn walk_stats(a: &StatsArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let backend = Backend::from_workers(a.workers);
    let mut out = Output::open(&a.output, config, Some(a.seed))?;
    match a.mode {
        StatsMode::Visits => {
            let n_max = *a.n.last().ok_or_else(|| Failure::Usage("--n needs a value".into()))?;
            let rep = neighborhood_visit_stats(&params, a.epsilon, n_max, a.replicas, a.seed, backend)?;
            match a.output.format {
                Format::Csv => {
                    out.line(&format!(
                        "# fit mean_visits = {} ln n + {} on n in [{}, {}]",
                        rep.log_fit.slope, rep.log_fit.intercept, rep.fit_window.0, rep.fit_window.1
                    ))?;
                    out.line("n,mean_visits,stderr,gaussian_reference")?;
                    for i in 0..rep.checkpoints.len() {
                        out.line(&format!(
                            "{},{},{},{}",
                            rep.checkpoints[i], rep.mean_visits[i], rep.visits_stderr[i], rep.gaussian_reference[i]
                        ))?;
                    }
                }
                Format::Json => out.json(&rep)?,
            }
        }
        StatsMode::Escape => {
            let est = a
                .n
                .iter()
                .map(|&n| escape_probability(&params, n, a.epsilon, a.replicas, a.seed, backend))
                .collect::<Result<Vec<_>, _>>()?;
            match a.output.format {
                Format::Csv => {
                    out.line("n,epsilon,estimate,stderr,reference")?;
                    for e in est {
                        out.line(&format!("{},{},{},{},{}", e.n, e.epsilon, e.estimate, e.stderr, e.reference))?;
                    }
                }
                Format::Json => out.json(&est)?,
            }
        }
    }
    out.finish()
}

fn clt_check(a: &CltArgs, config: &str) -> CmdResult {
    if a.n_grid.windows(2).any(|w| w[0] >= w[1]) || a.n_grid.is_empty() {
        return Err(Failure::Usage("--n-grid must be a nonempty increasing list".into()));
    }
    let params = a.model.params()?;
    let limit = limit_char(&params, 1.0, a.lambda)?;
    let predicted = clt_error_constant(&params, a.lambda)?;
    let mut out = Output::open(&a.output, config, None)?;
    #[derive(Serialize)]
    struct Row {
        n: u64,
        psi: Complex64,
        limit: Complex64,
        n_times_err_abs: f64,
        predicted_abs: f64,
    }
    let rows = a
        .n_grid
        .iter()
        .map(|&n| {
            let psi = char_s_scaled(&params, n, a.lambda)?;
            Ok(Row { n, psi, limit, n_times_err_abs: n as f64 * (psi - limit).norm(), predicted_abs: predicted.norm() })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    match a.output.format {
        Format::Csv => {
            out.line("n,psi_re,psi_im,limit_re,limit_im,n_times_err_abs,predicted_abs")?;
            for r in rows {
                out.line(&format!(
                    "{},{},{},{},{},{},{}",
                    r.n, r.psi.re, r.psi.im, r.limit.re, r.limit.im, r.n_times_err_abs, r.predicted_abs
                ))?;
            }
        }
        Format::Json => out.json(&rows)?,
    }
    out.finish()
}

fn moments(a: &MomentsArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let mut out = Output::open(&a.output, config, None)?;
    #[derive(Serialize)]
    struct Row {
        k: u32,
        coefficient: String,
        moment: Complex64,
        limit: Complex64,
    }
    let rows = (1..=a.k_max)
        .map(|k| {
            Ok(Row {
                k,
                coefficient: moment_coefficient(params.order(), a.n, k)?.to_string(),
                moment: moment_faadibruno(&params, a.n, k)?,
                limit: moment_limit(&params, k),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    match a.output.format {
        Format::Csv => {
            out.line("k,coefficient,moment_re,moment_im,limit_re,limit_im")?;
            for r in rows {
                out.line(&format!(
                    "{},{},{},{},{},{}",
                    r.k, r.coefficient, r.moment.re, r.moment.im, r.limit.re, r.limit.im
                ))?;
            }
        }
        Format::Json => out.json(&rows)?,
    }
    out.finish()
}

fn solve_cmd(a: &SolveArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let datum = read_datum(&a.datum)?;
    let method: Method = a.method.into();
    let mut req = SolveRequest::new(params, datum, a.t, a.grid.xs(), a.n, method);
    req.t0 = a.t0;
    req.replicas = a.replicas;
    req.seed = a.seed;
    req.backend = Backend::from_workers(a.workers);
    let result = solve(&req)?;
    let seed = matches!(method, Method::WalkMc).then_some(a.seed);
    let mut out = Output::open(&a.output, config, seed)?;
    match a.output.format {
        Format::Csv => out.write_with(|w| result.write_csv(w))?,
        Format::Json => out.json(&result)?,
    }
    out.finish()
}

fn convergence(a: &ConvergenceArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let mut out = Output::open(&a.output, config, None)?;
    match a.kind {
        ConvergenceKind::Solution => {
            let path = a.datum.as_ref().ok_or_else(|| Failure::Usage("--datum is required for --kind solution".into()))?;
            let datum = read_datum(path)?;
            let report = convergence_study(&params, &datum, a.t, &a.grid.xs(), &a.n_grid, a.slack)?;
            match a.output.format {
                Format::Json => out.write_with(|w| report.write_json(w))?,
                Format::Csv => {
                    out.line(&format!(
                        "# slope {} rmse {} C(t) {} n_epsilon {}",
                        report.slope,
                        report.fit.rmse,
                        report.c_t,
                        report.n_epsilon.map_or("none".to_string(), |n| n.to_string())
                    ))?;
                    out.line("n,sup_error,bound,bound_satisfied")?;
                    for i in 0..report.n_grid.len() {
                        out.line(&format!(
                            "{},{},{},{}",
                            report.n_grid[i], report.errors[i], report.bound_curve[i], report.bound_satisfied[i]
                        ))?;
                    }
                }
            }
        }
        ConvergenceKind::Characteristic => {
            let rows = convergence_table(&params, a.t, &a.lambda, &a.n_grid, Backend::from_workers(a.workers))?;
            match a.output.format {
                Format::Csv => out.write_with(|w| write_convergence_csv(&rows, w))?,
                Format::Json => out.json(&rows)?,
            }
        }
    }
    out.finish()
}

fn boundary(a: &BoundaryArgs, config: &str) -> CmdResult {
    let params = a.model.params()?;
    let bd = match (&a.datum, &a.sine, &a.cosine) {
        (Some(path), None, None) => {
            let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
            let with_header = BoundaryDatum::read(file);
            match (with_header, &a.bc) {
                (Ok(bd), None) => bd,
                (_, Some(bc)) => BoundaryDatum::new(read_datum(path)?, BoundaryKind::from_name(bc, a.l)?)?,
                (Err(e), None) => return Err(Failure::Usage(format!("{e}; pass --bc for files without a header"))),
            }
        }
        (None, Some(b), None) => {
            let l = a.l.ok_or_else(|| Failure::Usage("--L is required with --sine".into()))?;
            if a.bc.as_deref().is_some_and(|bc| bc != "dirichlet") {
                return Err(Failure::Usage("--sine builds Dirichlet data; use --bc dirichlet".into()));
            }
            sine_series(l, b)?
        }
        (None, None, Some(c)) => {
            let l = a.l.ok_or_else(|| Failure::Usage("--L is required with --cosine".into()))?;
            if a.bc.as_deref().is_some_and(|bc| bc != "neumann") {
                return Err(Failure::Usage("--cosine builds Neumann data; use --bc neumann".into()));
            }
            cosine_series(l, c)?
        }
        _ => return Err(Failure::Usage("give exactly one of --datum, --sine, --cosine".into())),
    };
    let method = match a.method {
        MethodArg::Spectral => BoundaryMethod::Spectral,
        MethodArg::WalkExact => BoundaryMethod::WalkExact { n: a.n },
        MethodArg::WalkMc => BoundaryMethod::WalkMc { n: a.n, replicas: a.replicas, seed: a.seed },
    };
    let xs = match (&a.grid.x, bd.kind().length()) {
        (None, Some(l)) if a.grid.x_min == -std::f64::consts::PI && a.grid.x_max == std::f64::consts::PI => {
            linspace(0.0, l, a.grid.x_points)
        }
        _ => a.grid.xs(),
    };
    let sol = boundary_solve(&params, &bd, a.t, &xs, method, Backend::from_workers(a.workers))?;
    let seed = matches!(a.method, MethodArg::WalkMc).then_some(a.seed);
    let mut out = Output::open(&a.output, config, seed)?;
    match a.output.format {
        Format::Csv => {
            out.line(&format!("# {}", bd.kind()))?;
            out.line("x,u_re,u_im,stderr")?;
            for (i, (x, u)) in sol.xs.iter().zip(&sol.values).enumerate() {
                let se = sol.stderr.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
                out.line(&format!("{x},{},{},{se}", u.re, u.im))?;
            }
        }
        Format::Json => out.json(&sol)?,
    }
    out.finish()
}

fn run(cli: &Cli) -> CmdResult {
    let config = serde_json::to_string(&cli.command).unwrap_or_default();
    match &cli.command {
        Command::Walk(WalkCommand::Sample(a)) => walk_sample(a, &config),
        Command::Walk(WalkCommand::Dist(a)) => walk_dist(a, &config),
        Command::Walk(WalkCommand::Returns(a)) | Command::Returns(a) => returns(a, &config),
        Command::Walk(WalkCommand::Stats(a)) => walk_stats(a, &config),
        Command::Clt(CltCommand::Check(a)) => clt_check(a, &config),
        Command::Moments(a) => moments(a, &config),
        Command::Solve(a) => solve_cmd(a, &config),
        Command::Convergence(a) => convergence(a, &config),
        Command::Boundary(a) => boundary(a, &config),
    }
}

fn main() -> ExitCode {
    let args = match config::splice_config(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
