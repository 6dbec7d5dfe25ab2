//! The `fraclap` command line: solve, verify, constant and sweep.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::identities::{self, Admissible, CheckOptions, Identity, IdentityReport, Side};
use crate::operator::{a_constant, AConstantOptions, CutoffProfile};
use crate::solver::{solve_linear, solve_semilinear, Solution, SolverOptions, SourceTerm};
use crate::specfun::FracParams;
use clap::{Args, Parser, Subcommand};
use meval::{ContextProvider, Expr, FuncEvalError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fraclap", version, about = "Fractional Laplacian Dirichlet problems and identity checks")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Tolerance override for checks and the constant.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record wall-clock runtimes in reports (output is then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve (-Δ)^s u = f(x, u) in an interval with u = 0 outside.
    Solve(SolveArgs),
    /// Run identity checks.
    Verify(VerifyArgs),
    /// Compute the constant a_{N,s}[ρ].
    Constant(ConstantArgs),
    /// Run identity checks over a grid of orders and points.
    Sweep(VerifyArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct ProblemArgs {
    #[arg(long = "N", visible_alias = "dim")]
    pub dim: Option<usize>,
    /// Orders s, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub s: Vec<f64>,
    /// Orders as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_s: Option<String>,
    /// interval or ball.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Vec<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub mesh: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Source expression in x and u.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Identity names, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub identity: Vec<String>,
    /// Evaluation point, coordinates comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x: Vec<f64>,
    /// Points along the first axis as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_x: Option<String>,
    /// Second point for the Green derivative identity.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub y: Vec<f64>,
    #[arg(long)]
    pub axis: Option<usize>,
    #[arg(long)]
    pub second_axis: Option<usize>,
    /// Source expression for the derivative representations.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Function pair for the Pohozaev identity: bump, torsion or torsion-solution.
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ConstantArgs {
    #[arg(long = "N", visible_alias = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Sharpness of the cutoff profile.
    #[arg(long)]
    pub sharpness: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub strip: Option<f64>,
}

/// Configuration file layout.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub constant: ConstantSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub tol: Option<f64>,
    pub timing: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub dim: Option<usize>,
    pub s: Option<Vec<f64>>,
    pub sweep_s: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub mesh: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub identities: Option<Vec<String>>,
    pub x: Option<Vec<f64>>,
    pub sweep_x: Option<String>,
    pub y: Option<Vec<f64>>,
    pub axis: Option<usize>,
    pub second_axis: Option<usize>,
    pub f: Option<String>,
    pub pair: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub f: Option<String>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSection {
    pub dim: Option<usize>,
    pub s: Option<f64>,
    pub sharpness: Option<f64>,
    pub budget: Option<usize>,
    pub strip: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("invalid configuration {}: {e}", path.display())))
}

/// start:stop:step, inclusive of stop up to rounding.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| config_err(format!("range '{spec}' is not start:stop:step")))?;
    let [start, stop, step] = nums[..] else {
        return Err(config_err(format!("range '{spec}' is not start:stop:step")));
    };
    if !(step > 0.0) || stop < start {
        return Err(config_err(format!("range '{spec}' needs step > 0 and stop ≥ start")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // round to the step's decimal grid so that 0.1 steps print as 0.1
    Ok((0..=count).map(|k| round12(start + k as f64 * step)).collect())
}

fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 { 0.0 } else { r }
}

struct Vars<'a> {
    x: f64,
    u: f64,
    used_u: Option<&'a Cell<bool>>,
}

impl ContextProvider for Vars<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        match name {
            "x" => Some(self.x),
            "u" => {
                if let Some(flag) = self.used_u {
                    flag.set(true);
                }
                Some(self.u)
            }
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> std::result::Result<f64, FuncEvalError> {
        let unary: fn(f64) -> f64 = match name {
            "exp" => f64::exp,
            "log" => f64::ln,
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tanh" => f64::tanh,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            _ => return Err(FuncEvalError::UnknownFunction),
        };
        match args {
            [a] => Ok(unary(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        }
    }
}

/// A parsed source expression over x and u.
#[derive(Debug, Clone)]
pub struct SourceExpr {
    text: String,
    expr: Expr,
    uses_u: bool,
}

impl SourceExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let expr: Expr = text.parse().map_err(|e| config_err(format!("cannot parse '{text}': {e}")))?;
        let flag = Cell::new(false);
        expr.eval_with_context(Vars { x: 0.5, u: 0.5, used_u: Some(&flag) })
            .map_err(|e| config_err(format!("invalid expression '{text}': {e}")))?;
        Ok(SourceExpr { text: text.to_string(), expr, uses_u: flag.get() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn uses_u(&self) -> bool {
        self.uses_u
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        self.expr.eval_with_context(Vars { x, u, used_u: None }).unwrap_or(f64::NAN)
    }

    /// Source term with fourth-order difference partials.
    pub fn source_term(&self) -> SourceTerm {
        let (e0, e1, e2) = (self.clone(), self.clone(), self.clone());
        let base = if self.uses_u {
            SourceTerm::semilinear(move |x, q| e0.eval(x, q))
        } else {
            SourceTerm::space(move |x| e0.eval(x, 0.0))
        };
        base.with_partials(
            move |x, q| difference(|t| e1.eval(x + t, q)),
            move |x, q| if e2.uses_u { difference(|t| e2.eval(x, q + t)) } else { 0.0 },
        )
    }
}

fn difference<G: Fn(f64) -> f64>(g: G) -> f64 {
    let h = 1e-3;
    (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::Convergence { .. } | Error::Singular(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

struct Global {
    out: PathBuf,
    jobs: Option<usize>,
    tol: Option<f64>,
    timing: bool,
}

/// Create the output directory and make sure it accepts files.
fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".fraclap-write-probe");
    fs::write(&probe, b"").map_err(|e| config_err(format!("{} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Numerical(format!("cannot write {}: {e}", path.display())))
}

fn resolve_problem(args: &ProblemArgs, file: &FileConfig, default_s: &[f64]) -> Result<(Vec<FracParams>, Domain)> {
    let kind = args.domain.clone().or_else(|| file.domain.kind.clone()).unwrap_or_else(|| "interval".into());
    let dim_flag = args.dim.or(file.params.dim);
    let domain = match kind.as_str() {
        "interval" => {
            if dim_flag.is_some_and(|n| n != 1) {
                return Err(config_err("an interval is one-dimensional"));
            }
            Domain::interval(args.a.or(file.domain.a).unwrap_or(-1.0), args.b.or(file.domain.b).unwrap_or(1.0))?
        }
        "ball" => {
            let center = if !args.center.is_empty() { Some(args.center.clone()) } else { file.domain.center.clone() };
            let dim = dim_flag.or(center.as_ref().map(Vec::len)).ok_or_else(|| config_err("a ball needs --N or --center"))?;
            let center = center.unwrap_or_else(|| vec![0.0; dim]);
            if center.len() != dim {
                return Err(config_err(format!("center has {} coordinates, N = {dim}", center.len())));
            }
            Domain::ball(center, args.radius.or(file.domain.radius).unwrap_or(1.0))?
        }
        other => return Err(config_err(format!("unknown domain '{other}' (interval or ball)"))),
    };
    let s_values = if !args.s.is_empty() {
        args.s.clone()
    } else if let Some(r) = &args.sweep_s {
        parse_range(r)?
    } else if let Some(s) = &file.params.s {
        s.clone()
    } else if let Some(r) = &file.params.sweep_s {
        parse_range(r)?
    } else {
        default_s.to_vec()
    };
    let params = s_values.iter().map(|&s| FracParams::new(domain.dim(), s)).collect::<Result<Vec<_>>>()?;
    Ok((params, domain))
}

fn fmt_point(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_side(side: &Side) -> String {
    match side {
        Side::Scalar(v) => v.to_string(),
        Side::Vector(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
    }
}

fn reports_csv(reports: &[IdentityReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    w.write_record(["identity", "dim", "s", "points", "axis", "lhs", "rhs", "residual", "tolerance", "passed"]).map_err(io)?;
    for r in reports {
        let points = r.params.points.iter().map(|p| fmt_point(p)).collect::<Vec<_>>().join(";");
        w.write_record([
            r.identity.name().to_string(),
            r.params.dim.to_string(),
            r.params.s.to_string(),
            points,
            r.params.axis.map_or(String::new(), |a| a.to_string()),
            fmt_side(&r.lhs),
            fmt_side(&r.rhs),
            r.residual.to_string(),
            r.tolerance.to_string(),
            r.passed.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Resolved verify settings shared by all tasks.
struct VerifyPlan {
    domain: Domain,
    params: Vec<FracParams>,
    identities: Vec<Identity>,
    points: Vec<Vec<f64>>,
    y: Option<Vec<f64>>,
    axis: usize,
    second_axis: Option<usize>,
    source: SourceExpr,
    pair: String,
    samples: usize,
    seed: u64,
    levels: usize,
    opts: CheckOptions,
}

fn plan_verify(args: &VerifyArgs, file: &FileConfig, g: &Global, sweep: bool) -> Result<VerifyPlan> {
    let v = &file.verify;
    let default_s: &[f64] = if sweep { &[0.25, 0.5, 0.75] } else { &[0.5] };
    let (params, domain) = resolve_problem(&args.problem, file, default_s)?;
    let names = if !args.identity.is_empty() {
        args.identity.clone()
    } else if let Some(ids) = &v.identities {
        ids.clone()
    } else if sweep {
        vec!["dedu".into(), "robin-grad".into()]
    } else {
        return Err(config_err("no identity selected (--identity)"));
    };
    let identities = names.iter().map(|n| n.parse::<Identity>()).collect::<Result<Vec<_>>>()?;
    let (center, _) = domain.center_radius();
    let along = |t: f64| {
        let mut p = center.clone();
        p[0] = t;
        p
    };
    let sweep_x = args.sweep_x.clone().or_else(|| v.sweep_x.clone()).or_else(|| sweep.then(|| "-0.8:0.8:0.2".to_string()));
    let points = if !args.x.is_empty() {
        vec![args.x.clone()]
    } else if let Some(r) = &sweep_x {
        parse_range(r)?.into_iter().map(along).collect()
    } else if let Some(x) = &v.x {
        vec![x.clone()]
    } else {
        vec![center.clone()]
    };
    for p in &points {
        if p.len() != domain.dim() {
            return Err(config_err(format!("point {p:?} does not match dimension {}", domain.dim())));
        }
    }
    let y = if !args.y.is_empty() { Some(args.y.clone()) } else { v.y.clone() };
    let source = SourceExpr::parse(&args.f.clone().or_else(|| v.f.clone()).unwrap_or_else(|| "x".into()))?;
    let pair = args.pair.clone().or_else(|| v.pair.clone()).unwrap_or_else(|| "bump".into());
    if !["bump", "torsion", "torsion-solution"].contains(&pair.as_str()) {
        return Err(config_err(format!("unknown Pohozaev pair '{pair}'")));
    }
    let mut opts = CheckOptions { tol: g.tol, ..CheckOptions::default() };
    if let Some(h) = args.problem.mesh.or(file.domain.mesh) {
        opts.mesh = h;
    }
    Ok(VerifyPlan {
        domain,
        params,
        identities,
        points,
        y,
        axis: args.axis.or(v.axis).unwrap_or(0),
        second_axis: args.second_axis.or(v.second_axis),
        source,
        pair,
        samples: args.samples.or(v.samples).unwrap_or(10_000),
        seed: args.seed.or(v.seed).unwrap_or(1),
        levels: args.levels.or(v.levels).unwrap_or(5),
        opts,
    })
}

fn pohozaev_pair(plan: &VerifyPlan, p: &FracParams) -> Result<(Admissible, Admissible)> {
    let (c, r) = plan.domain.center_radius();
    match plan.pair.as_str() {
        "bump" => {
            let v = Admissible::bump(c[0] + 0.1 * r, 0.5 * r);
            Ok((v.clone(), v))
        }
        "torsion" => {
            let t = Admissible::torsion(p, &plan.domain)?;
            Ok((t.clone(), t))
        }
        _ => {
            let t = Admissible::torsion(p, &plan.domain)?;
            let f = plan.source.source_term();
            let sol = solve_for(p, &plan.domain, &f, plan.opts.mesh, &plan.opts.solver)?;
            Ok((t, Admissible::from_solution(&sol, &f)?))
        }
    }
}

fn solve_for(p: &FracParams, d: &Domain, f: &SourceTerm, h: f64, opts: &SolverOptions) -> Result<Solution> {
    match f.kind() {
        crate::solver::SourceKind::Space => solve_linear(p, d, f, h, opts),
        crate::solver::SourceKind::Semilinear => solve_semilinear(p, d, f, h, opts),
    }
}

/// Reports of one identity at one order, in point order.
fn run_task(plan: &VerifyPlan, id: Identity, p: &FracParams) -> Result<Vec<IdentityReport>> {
    let (d, opts, i) = (&plan.domain, &plan.opts, plan.axis);
    let each = |check: &dyn Fn(&[f64]) -> Result<IdentityReport>| plan.points.iter().map(|x| check(x)).collect::<Result<Vec<_>>>();
    match id {
        Identity::Dedu => each(&|x| identities::check_dedu(p, d, x, i, opts)),
        Identity::RobinGrad => each(&|x| identities::check_robin_grad(p, d, x, i, opts)),
        Identity::GreenDerivative => {
            let y = plan.y.as_ref().ok_or_else(|| config_err("green-derivative needs --y"))?;
            each(&|x| identities::check_green_derivative(p, d, x, y, i, opts))
        }
        Identity::RobinSymmetry => {
            let point = if plan.points.len() == 1 { Some(plan.points[0].as_slice()) } else { None };
            Ok(vec![identities::check_robin_symmetry(p, d, i, plan.second_axis, point, opts)?])
        }
        Identity::DerivativeHigh | Identity::DerivativeLow => {
            let f = plan.source.source_term();
            let sol = solve_for(p, d, &f, opts.mesh, &opts.solver)?;
            plan.points
                .iter()
                .map(|x| match id {
                    Identity::DerivativeHigh => identities::check_derivative_high_with(&sol, x[0], opts),
                    _ => identities::check_derivative_low_with(&sol, &f, x[0], opts),
                })
                .collect()
        }
        Identity::Pohozaev => {
            let (v, w) = pohozaev_pair(plan, p)?;
            Ok(vec![identities::check_pohozaev(p, d, &v, &w, opts)?])
        }
        Identity::GreenBounds => Ok(vec![identities::check_green_bounds(p, d, plan.samples, plan.seed, opts)?]),
        Identity::GradGreenL1 => {
            let xs: Vec<f64> = plan.points.iter().map(|x| x[0]).collect();
            Ok(vec![identities::check_grad_green_l1(p, d, &xs, plan.levels, opts)?])
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(0) => Err(config_err("--jobs must be positive")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| config_err(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn run_verify(args: &VerifyArgs, file: &FileConfig, g: &Global, sweep: bool) -> Result<u8> {
    let plan = plan_verify(args, file, g, sweep)?;
    prepare_out(&g.out)?;
    let tasks: Vec<(Identity, FracParams)> =
        plan.params.iter().flat_map(|p| plan.identities.iter().map(move |&id| (id, *p))).collect();
    let results: Vec<Result<Vec<IdentityReport>>> =
        with_pool(g.jobs, || tasks.par_iter().map(|(id, p)| run_task(&plan, *id, p)).collect())?;
    let mut reports = Vec::new();
    let mut first_error = None;
    for ((id, p), r) in tasks.iter().zip(results) {
        match r {
            Ok(rs) => reports.extend(rs),
            Err(Error::Regime(msg)) if sweep => eprintln!("skipped {id} at s = {}: {msg}", p.s()),
            Err(e) => {
                eprintln!("{id} at s = {}: {e}", p.s());
                first_error.get_or_insert(e);
            }
        }
    }
    if !g.timing {
        for r in &mut reports {
            r.runtime_ms = None;
        }
    }
    for r in &reports {
        let pts = r.params.points.iter().map(|p| format!("[{}]", fmt_point(p))).collect::<Vec<_>>().join(" ");
        println!(
            "{} s={} {} residual={:.3e} tol={:.1e} {}",
            r.identity,
            r.params.s,
            pts,
            r.residual,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let stem = if sweep { "sweep" } else { "reports" };
    write_file(&g.out.join(format!("{stem}.json")), &to_json(&reports)?)?;
    write_file(&g.out.join(format!("{stem}.csv")), &reports_csv(&reports)?)?;
    if let Some(e) = first_error {
        return Ok(exit_code(&e));
    }
    Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILED })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TraceValue {
    sigma: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SolveSummary {
    dim: usize,
    s: f64,
    domain: Domain,
    source: String,
    semilinear: bool,
    mesh: f64,
    points: usize,
    iterations: usize,
    residual: f64,
    trace: Vec<TraceValue>,
}

fn run_solve(args: &SolveArgs, file: &FileConfig, g: &Global) -> Result<u8> {
    let (params, domain) = resolve_problem(&args.problem, file, &[0.5])?;
    let [p] = params[..] else {
        return Err(config_err("solve takes a single order s"));
    };
    let source = SourceExpr::parse(&args.f.clone().or_else(|| file.solve.f.clone()).unwrap_or_else(|| "1".into()))?;
    let h = args.problem.mesh.or(file.domain.mesh).unwrap_or(1.0 / 256.0);
    let mut opts = SolverOptions::default();
    if let Some(m) = args.max_iter.or(file.solve.max_iter) {
        opts.max_iter = m;
    }
    if let Some(t) = g.tol {
        opts.tol = t;
    }
    prepare_out(&g.out)?;
    let sol = solve_for(&p, &domain, &source.source_term(), h, &opts)?;
    let s = p.s();
    let grid = sol.u();
    let mut table = csv::Writer::from_writer(Vec::new());
    let mut plot = String::from("# x\tu\n");
    let io = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    table.write_record(["x", "u", "delta_s", "u_over_delta_s"]).map_err(io)?;
    for (x, u) in grid.points().iter().zip(grid.values()) {
        let ds = domain.signed_distance(x).powf(s);
        table.write_record([x[0].to_string(), u.to_string(), ds.to_string(), (u / ds).to_string()]).map_err(io)?;
        plot.push_str(&format!("{}\t{}\n", x[0], u));
    }
    let table = table.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    let trace = sol.trace();
    let summary = SolveSummary {
        dim: p.dim(),
        s,
        domain: domain.clone(),
        source: source.text().to_string(),
        semilinear: source.uses_u(),
        mesh: h,
        points: grid.len(),
        iterations: sol.iterations(),
        residual: sol.residual(),
        trace: trace.nodes.iter().zip(&trace.values).map(|(n, v)| TraceValue { sigma: n.clone(), value: *v }).collect(),
    };
    write_file(&g.out.join("solution.csv"), &table)?;
    write_file(&g.out.join("solution.tsv"), plot.as_bytes())?;
    write_file(&g.out.join("summary.json"), &to_json(&summary)?)?;
    println!(
        "solved s={s} on {} points, {} iteration(s), residual {:.3e}, trace {}",
        grid.len(),
        sol.iterations(),
        sol.residual(),
        trace.values.iter().map(|v| format!("{v:.7}")).collect::<Vec<_>>().join(" ")
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConstantReport {
    dim: usize,
    s: f64,
    sharpness: f64,
    value: f64,
    error: f64,
    tolerance: f64,
    evaluations: usize,
    converged: bool,
    passed: bool,
}

fn run_constant(args: &ConstantArgs, file: &FileConfig, g: &Global) -> Result<u8> {
    let c = &file.constant;
    let dim = args.dim.or(c.dim).unwrap_or(1);
    let p = FracParams::new(dim, args.s.or(c.s).unwrap_or(0.5))?;
    let sharpness = args.sharpness.or(c.sharpness).unwrap_or(1.0);
    let rho = CutoffProfile::new(sharpness)?;
    let mut opts = AConstantOptions::default();
    if let Some(b) = args.budget.or(c.budget) {
        opts.budget = b;
    }
    if let Some(w) = args.strip.or(c.strip) {
        opts.strip = w;
    }
    let tol = g.tol.unwrap_or(1e-2);
    if dim != 1 && dim != 2 {
        return Err(Error::Capability(format!("the constant is available for N = 1, 2, not N = {dim}")));
    }
    prepare_out(&g.out)?;
    let res = a_constant(&p, &rho, &opts)?;
    let passed = res.converged && (res.value + 2.0).abs() <= res.error + tol;
    println!("{:.2} ± {:.2}", res.value, res.error + tol);
    println!("a = {:.10} (error bar {:.2e}, N = {dim}, s = {}, {} evaluations)", res.value, res.error, p.s(), res.evaluations);
    let report = ConstantReport {
        dim,
        s: p.s(),
        sharpness,
        value: res.value,
        error: res.error,
        tolerance: tol,
        evaluations: res.evaluations,
        converged: res.converged,
        passed,
    };
    write_file(&g.out.join("constant.json"), &to_json(&report)?)?;
    if !res.converged {
        eprintln!("budget exhausted before the error bar reached {:.1e}", opts.tol);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let file = match cli.config.as_deref().map(load_config).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let g = Global {
        out: cli.out.clone().or_else(|| file.run.out.clone()).unwrap_or_else(|| PathBuf::from("fraclap-out")),
        jobs: cli.jobs.or(file.run.jobs),
        tol: cli.tol.or(file.run.tol),
        timing: cli.timing || file.run.timing.unwrap_or(false),
    };
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a, &file, &g),
        Command::Verify(a) => run_verify(a, &file, &g, false),
        Command::Sweep(a) => run_verify(a, &file, &g, true),
        Command::Constant(a) => run_constant(a, &file, &g),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
