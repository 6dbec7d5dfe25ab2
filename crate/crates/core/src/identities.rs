//! Numerical checks of derivative representation formulas, the Green
//! derivative identity, Robin-function identities, the Pohozaev identity
//! and the Green-function estimates.

use crate::domain::{dist, BoundaryRule, Domain};
use crate::error::{Error, Result};
use crate::greenfn::{central_difference, GreenFunction};
use crate::operator::{apply_frac_lap, OperatorOptions};
use crate::quad::{breakpoints, compensated_sum, tanh_sinh_par, tanh_sinh_pieces};
use crate::solver::{solve_linear, solve_semilinear, Solution, SolverOptions, SourceKind, SourceTerm};
use crate::specfun::{gamma_real, torsion_scale, FracParams, Regime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// ∂u for a solution with source f(z, u), 2s > 1.
    DerivativeHigh,
    /// ∂u for a solution with source f(z, u), 2s ≤ 1.
    DerivativeLow,
    /// ∂u for the torsion function.
    Dedu,
    /// ∂_x G(y, x) + ∂_y G(x, y) as a boundary integral of traces.
    GreenDerivative,
    RobinGrad,
    RobinSymmetry,
    Pohozaev,
    GreenBounds,
    GradGreenL1,
}

impl Identity {
    pub const ALL: [Identity; 9] = [
        Identity::DerivativeHigh,
        Identity::DerivativeLow,
        Identity::Dedu,
        Identity::GreenDerivative,
        Identity::RobinGrad,
        Identity::RobinSymmetry,
        Identity::Pohozaev,
        Identity::GreenBounds,
        Identity::GradGreenL1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Identity::DerivativeHigh => "derivative-high",
            Identity::DerivativeLow => "derivative-low",
            Identity::Dedu => "dedu",
            Identity::GreenDerivative => "green-derivative",
            Identity::RobinGrad => "robin-grad",
            Identity::RobinSymmetry => "robin-symmetry",
            Identity::Pohozaev => "pohozaev",
            Identity::GreenBounds => "green-bounds",
            Identity::GradGreenL1 => "grad-green-l1",
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Identity::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown identity '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Side {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Side {
    fn is_finite(&self) -> bool {
        match self {
            Side::Scalar(v) => v.is_finite(),
            Side::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportParams {
    pub dim: usize,
    pub s: f64,
    pub domain: Domain,
    pub points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
}

/// Both sides of a checked identity with the residual and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityReport {
    pub identity: Identity,
    pub params: ReportParams,
    pub lhs: Side,
    pub rhs: Side,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub runtime_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Vec<f64>>,
}

impl IdentityReport {
    fn build(identity: Identity, params: ReportParams, lhs: Side, rhs: Side, residual: f64, tolerance: f64) -> Self {
        let passed = residual <= tolerance && lhs.is_finite() && rhs.is_finite();
        IdentityReport {
            identity,
            params,
            lhs,
            rhs,
            residual,
            tolerance,
            passed,
            runtime_ms: None,
            details: BTreeMap::new(),
            series: Vec::new(),
        }
    }

    fn scalar(identity: Identity, params: ReportParams, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(identity, params, Side::Scalar(lhs), Side::Scalar(rhs), (lhs - rhs).abs(), tolerance)
    }

    fn timed(mut self, start: Instant) -> Self {
        self.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        self
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Replace a scalar right-hand side and recompute the residual and verdict.
    pub fn with_rhs(mut self, rhs: f64) -> Result<Self> {
        let Side::Scalar(lhs) = self.lhs else {
            return Err(Error::Parameter("only scalar reports can take a new right-hand side".into()));
        };
        self.rhs = Side::Scalar(rhs);
        self.residual = (lhs - rhs).abs();
        self.passed = self.residual <= self.tolerance && lhs.is_finite() && rhs.is_finite();
        Ok(self)
    }
}

/// Shared knobs for the checkers. `tol` overrides the per-identity default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tol: Option<f64>,
    /// Boundary rule order on balls; defaults to 128 on circles and 32 on spheres.
    pub boundary_order: Option<usize>,
    pub mesh: f64,
    pub solver: SolverOptions,
    pub operator: OperatorOptions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: None,
            boundary_order: None,
            mesh: 1.0 / 128.0,
            solver: SolverOptions::default(),
            operator: OperatorOptions::default(),
        }
    }
}

impl CheckOptions {
    fn tolerance(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn rule(&self, d: &Domain) -> Result<BoundaryRule> {
        let order = self.boundary_order.unwrap_or(if d.dim() == 2 { 128 } else { 32 });
        d.boundary_rule(order)
    }
}

/// Default tolerance of each checker; `ball` selects the quadrature-limited value.
pub fn default_tolerance(identity: Identity, ball: bool) -> f64 {
    match (identity, ball) {
        (Identity::Dedu, false) => 1e-6,
        (Identity::Dedu, true) => 1e-4,
        (Identity::DerivativeHigh, _) => 1e-3,
        (Identity::DerivativeLow, _) => 5e-3,
        (Identity::GreenDerivative, false) => 1e-5,
        (Identity::GreenDerivative, true) => 1e-3,
        (Identity::RobinGrad, false) => 1e-6,
        (Identity::RobinGrad, true) => 1e-3,
        (Identity::RobinSymmetry, _) => 1e-6,
        (Identity::Pohozaev, _) => 1e-3,
        (Identity::GreenBounds, _) => 0.0,
        (Identity::GradGreenL1, _) => 0.05,
    }
}

fn is_ball(d: &Domain) -> bool {
    matches!(d, Domain::Ball { .. })
}

fn report_params(p: &FracParams, d: &Domain, points: Vec<Vec<f64>>, axis: Option<usize>) -> ReportParams {
    ReportParams { dim: p.dim(), s: p.s(), domain: d.clone(), points, axis }
}

fn check_point(d: &Domain, x: &[f64]) -> Result<()> {
    if x.len() != d.dim() {
        return Err(Error::Parameter(format!("point {x:?} does not match dimension {}", d.dim())));
    }
    if !d.contains(x) {
        return Err(Error::Parameter(format!("point {x:?} is not interior")));
    }
    Ok(())
}

fn check_axis(d: &Domain, i: usize) -> Result<()> {
    if i >= d.dim() {
        return Err(Error::Parameter(format!("axis {i} out of range for dimension {}", d.dim())));
    }
    Ok(())
}

fn check_params(p: &FracParams, d: &Domain) -> Result<()> {
    if p.dim() != d.dim() {
        return Err(Error::Parameter(format!("parameters are {}-dimensional, domain is {}-dimensional", p.dim(), d.dim())));
    }
    Ok(())
}

fn gamma_sq(p: &FracParams) -> f64 {
    gamma_real(1.0 + p.s()).powi(2)
}

/// Σ_σ w(σ) ν_i(σ) term(σ).
fn boundary_sum<F: Fn(&[f64]) -> f64>(rule: &BoundaryRule, i: usize, term: F) -> f64 {
    compensated_sum(rule.nodes.iter().zip(&rule.weights).zip(&rule.normals).map(|((sigma, w), nu)| w * nu[i] * term(sigma)))
}

/// Torsion derivative against its boundary representation.
pub fn check_dedu(p: &FracParams, d: &Domain, x: &[f64], i: usize, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    check_point(d, x)?;
    check_axis(d, i)?;
    let green = GreenFunction::new(*p, d.clone())?;
    let s = p.s();
    let (c, r) = d.center_radius();
    let gamma = torsion_scale(p);
    let rho2 = r * r - dist(x, &c).powi(2);
    let lhs = -2.0 * s * gamma * (x[i] - c[i]) * rho2.powf(s - 1.0);
    let trace_u = gamma * (2.0 * r).powf(s);
    let rule = opts.rule(d)?;
    let rhs = -gamma_sq(p) * boundary_sum(&rule, i, |sigma| trace_u * green.trace_at(x, sigma));
    let tol = opts.tolerance(default_tolerance(Identity::Dedu, is_ball(d)));
    Ok(IdentityReport::scalar(Identity::Dedu, report_params(p, d, vec![x.to_vec()], Some(i)), lhs, rhs, tol)
        .timed(start))
}

/// ∂_{x_i} G(y, x) + ∂_{y_i} G(x, y) against the product of the two traces.
pub fn check_green_derivative(
    p: &FracParams,
    d: &Domain,
    x: &[f64],
    y: &[f64],
    i: usize,
    opts: &CheckOptions,
) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    if p.regime() != Regime::Subcritical {
        return Err(Error::Regime("the Green derivative identity needs N > 2s".into()));
    }
    check_point(d, x)?;
    check_point(d, y)?;
    check_axis(d, i)?;
    if x == y {
        return Err(Error::Parameter("the Green derivative identity needs x ≠ y".into()));
    }
    let green = GreenFunction::new(*p, d.clone())?;
    let lhs = green.grad_x(x, y, i)? + green.eval(x, y).grad_y[i];
    let rule = opts.rule(d)?;
    let rhs = -gamma_sq(p) * boundary_sum(&rule, i, |sigma| green.trace_at(x, sigma) * green.trace_at(y, sigma));
    let tol = opts.tolerance(default_tolerance(Identity::GreenDerivative, is_ball(d)));
    let params = report_params(p, d, vec![x.to_vec(), y.to_vec()], Some(i));
    Ok(IdentityReport::scalar(Identity::GreenDerivative, params, lhs, rhs, tol).timed(start))
}

fn robin_step(d: &Domain, x: &[f64], fraction: f64) -> f64 {
    let (_, r) = d.center_radius();
    fraction * d.signed_distance(x).min(r)
}

/// ∂_i R(x) by central differences against Γ²(1+s) ∫ γ(G(x,·))² ν_i.
pub fn check_robin_grad(p: &FracParams, d: &Domain, x: &[f64], i: usize, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    if p.regime() == Regime::SuperharmonicLine {
        return Err(Error::Regime("the Robin gradient formula needs N > 2s or N = 2s = 1".into()));
    }
    check_point(d, x)?;
    check_axis(d, i)?;
    let green = GreenFunction::new(*p, d.clone())?;
    let lhs = central_difference(|z| green.robin(z), x, i, robin_step(d, x, 1e-3));
    let rule = opts.rule(d)?;
    let rhs = gamma_sq(p) * boundary_sum(&rule, i, |sigma| green.trace_at(x, sigma).powi(2));
    let tol = opts.tolerance(default_tolerance(Identity::RobinGrad, is_ball(d)));
    Ok(IdentityReport::scalar(Identity::RobinGrad, report_params(p, d, vec![x.to_vec()], Some(i)), lhs, rhs, tol)
        .timed(start))
}

/// ∂_j R (or ∂_i ∂_j R when `i` is given) at a point of a hyperplane of
/// symmetry of the domain; the point defaults to the center.
pub fn check_robin_symmetry(
    p: &FracParams,
    d: &Domain,
    j: usize,
    i: Option<usize>,
    point: Option<&[f64]>,
    opts: &CheckOptions,
) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    if p.regime() == Regime::SuperharmonicLine {
        return Err(Error::Regime("the Robin function needs N > 2s or N = 2s = 1".into()));
    }
    check_axis(d, j)?;
    let (c, _) = d.center_radius();
    let x = point.map(<[f64]>::to_vec).unwrap_or_else(|| c.clone());
    check_point(d, &x)?;
    let mut axes = vec![j];
    if let Some(i) = i {
        check_axis(d, i)?;
        if i == j {
            return Err(Error::Parameter("the mixed derivative needs i ≠ j".into()));
        }
        axes.push(i);
    }
    for &k in &axes {
        if (x[k] - c[k]).abs() > 1e-14 * (1.0 + c[k].abs()) {
            return Err(Error::Parameter(format!(
                "the domain is not symmetric across the hyperplane x_{k} = {} through {x:?}",
                x[k]
            )));
        }
    }
    let green = GreenFunction::new(*p, d.clone())?;
    let lhs = match i {
        None => central_difference(|z| green.robin(z), &x, j, robin_step(d, &x, 1e-3)),
        Some(i) => {
            let h = robin_step(d, &x, 1e-2);
            central_difference(|z| central_difference(|w| green.robin(w), z, j, h), &x, i, h)
        }
    };
    let tol = opts.tolerance(default_tolerance(Identity::RobinSymmetry, is_ball(d)) * if i.is_some() { 10.0 } else { 1.0 });
    let mut report = IdentityReport::scalar(Identity::RobinSymmetry, report_params(p, d, vec![x], Some(j)), lhs, 0.0, tol);
    if let Some(i) = i {
        report = report.detail("secondAxis", i as f64);
    }
    Ok(report.timed(start))
}

fn interval_bounds(d: &Domain) -> Result<(f64, f64)> {
    match d {
        Domain::Interval { a, b } => Ok((*a, *b)),
        Domain::Ball { .. } => Err(Error::Capability("this check is implemented on intervals only".into())),
    }
}

fn solve(p: &FracParams, d: &Domain, f: &SourceTerm, opts: &CheckOptions) -> Result<Solution> {
    match f.kind() {
        SourceKind::Space => solve_linear(p, d, f, opts.mesh, &opts.solver),
        SourceKind::Semilinear => solve_semilinear(p, d, f, opts.mesh, &opts.solver),
    }
}

/// -Γ²(1+s) Σ_σ γ(u)(σ) γ(G(x,·))(σ) ν(σ) for a solved u on an interval.
fn solution_boundary_term(green: &GreenFunction, sol: &Solution, x: f64) -> f64 {
    let trace = sol.trace();
    let gsq = gamma_sq(green.params());
    let (a, _) = interval_bounds(green.domain()).unwrap_or((0.0, 0.0));
    -gsq * compensated_sum(trace.nodes.iter().zip(&trace.values).map(|(sigma, tu)| {
        let nu = if sigma[0] == a { -1.0 } else { 1.0 };
        nu * tu * green.trace_at(&[x], sigma)
    }))
}

/// Derivative of a solved u against the representation with ∂_z G, 2s > 1.
pub fn check_derivative_high(
    p: &FracParams,
    d: &Domain,
    f: &SourceTerm,
    x: f64,
    opts: &CheckOptions,
) -> Result<IdentityReport> {
    let sol = solve(p, d, f, opts)?;
    check_derivative_high_with(&sol, x, opts)
}

/// As [`check_derivative_high`] for an existing solution.
pub fn check_derivative_high_with(sol: &Solution, x: f64, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    let (p, d) = (sol.params(), sol.domain());
    if 2.0 * p.s() <= 1.0 {
        return Err(Error::Regime("this representation needs 2s > 1".into()));
    }
    check_point(d, &[x])?;
    let green = GreenFunction::new(*p, d.clone())?;
    let lhs = sol.derivative(x)?;
    let boundary = solution_boundary_term(&green, sol, x);
    let volume = sol.grad_green_convolution(x)?;
    let tol = opts.tolerance(default_tolerance(Identity::DerivativeHigh, false));
    Ok(IdentityReport::scalar(Identity::DerivativeHigh, report_params(p, d, vec![vec![x]], Some(0)), lhs, boundary - volume, tol)
        .detail("boundaryTerm", boundary)
        .detail("volumeTerm", volume)
        .timed(start))
}

/// Derivative of a solved u against the representation with G and the
/// derivatives of f, 2s ≤ 1. The sign in front of the volume integral is
/// "+"; the residual with the opposite sign is kept in the details.
pub fn check_derivative_low(
    p: &FracParams,
    d: &Domain,
    f: &SourceTerm,
    x: f64,
    opts: &CheckOptions,
) -> Result<IdentityReport> {
    if !f.has_partials() {
        return Err(Error::Parameter("this representation needs ∂_x f and ∂_q f".into()));
    }
    let sol = solve(p, d, f, opts)?;
    check_derivative_low_with(&sol, f, x, opts)
}

pub fn check_derivative_low_with(sol: &Solution, f: &SourceTerm, x: f64, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    let (p, d) = (sol.params(), sol.domain());
    if 2.0 * p.s() > 1.0 {
        return Err(Error::Regime("this representation needs 2s ≤ 1".into()));
    }
    if !f.has_partials() {
        return Err(Error::Parameter("this representation needs ∂_x f and ∂_q f".into()));
    }
    check_point(d, &[x])?;
    let (a, b) = interval_bounds(d)?;
    let green = GreenFunction::new(*p, d.clone())?;
    let lhs = sol.derivative(x)?;
    let boundary = solution_boundary_term(&green, sol, x);
    let failure = std::sync::Mutex::new(None);
    let density = |z: f64| {
        let q = sol.eval(z);
        let dq = f.dq(z, q).unwrap_or(0.0);
        let du = if dq == 0.0 {
            0.0
        } else {
            sol.derivative(z).unwrap_or_else(|e| {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            })
        };
        f.dx(z, q).unwrap_or(0.0) + dq * du
    };
    let volume: f64 = [(a, x), (x, b)]
        .iter()
        .map(|&(lo, hi)| tanh_sinh_par(|z| green.value(&[x], &[z]) * density(z), lo, hi, 1e-7, 3, 8).value)
        .sum();
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let tol = opts.tolerance(default_tolerance(Identity::DerivativeLow, false));
    let opposite = (lhs - (boundary - volume)).abs();
    Ok(IdentityReport::scalar(Identity::DerivativeLow, report_params(p, d, vec![vec![x]], Some(0)), lhs, boundary + volume, tol)
        .detail("boundaryTerm", boundary)
        .detail("volumeTerm", volume)
        .detail("residualOppositeSign", opposite)
        .timed(start))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function on an interval vanishing outside it, with its derivative,
/// boundary trace and optionally a known (-Δ)^s image.
#[derive(Clone)]
pub struct Admissible {
    value: ScalarFn,
    derivative: ScalarFn,
    trace: ScalarFn,
    frac_lap: Option<ScalarFn>,
    support: Option<(f64, f64)>,
}

impl fmt::Debug for Admissible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Admissible")
            .field("support", &self.support)
            .field("known_frac_lap", &self.frac_lap.is_some())
            .finish()
    }
}

impl Admissible {
    pub fn new<V, D, T>(value: V, derivative: D, trace: T) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        T: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Admissible { value: Arc::new(value), derivative: Arc::new(derivative), trace: Arc::new(trace), frac_lap: None, support: None }
    }

    pub fn with_frac_lap<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.frac_lap = Some(Arc::new(f));
        self
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    /// exp(-1/(1 - r²)) with r = (x - center)/width.
    pub fn bump(center: f64, width: f64) -> Self {
        let value = move |x: f64| {
            let r = (x - center) / width;
            if r.abs() < 1.0 { (-1.0 / (1.0 - r * r)).exp() } else { 0.0 }
        };
        let derivative = move |x: f64| {
            let r = (x - center) / width;
            if r.abs() < 1.0 {
                let q = 1.0 - r * r;
                (-1.0 / q).exp() * (-2.0 * r / (q * q)) / width
            } else {
                0.0
            }
        };
        Admissible::new(value, derivative, |_| 0.0).with_support(center - width, center + width)
    }

    /// γ (R² - (x - c)²)_+^s on the interval, whose image is 1.
    pub fn torsion(p: &FracParams, d: &Domain) -> Result<Self> {
        let (a, b) = interval_bounds(d)?;
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let (s, gamma) = (p.s(), torsion_scale(p));
        let value = move |x: f64| gamma * (r * r - (x - c) * (x - c)).max(0.0).powf(s);
        let derivative = move |x: f64| {
            let q = r * r - (x - c) * (x - c);
            if q > 0.0 { -2.0 * s * gamma * (x - c) * q.powf(s - 1.0) } else { 0.0 }
        };
        let trace = gamma * (2.0 * r).powf(s);
        Ok(Admissible::new(value, derivative, move |_| trace).with_frac_lap(|_| 1.0))
    }

    /// A solution of (-Δ)^s u = f(x, u) with its extrapolated trace.
    pub fn from_solution(sol: &Solution, f: &SourceTerm) -> Result<Self> {
        let (a, _) = interval_bounds(sol.domain())?;
        let trace = sol.trace();
        let (ta, tb) = if trace.nodes[0][0] == a { (trace.values[0], trace.values[1]) } else { (trace.values[1], trace.values[0]) };
        let (s1, s2, s3) = (Arc::new(sol.clone()), Arc::new(sol.clone()), Arc::new(sol.clone()));
        let f = f.clone();
        Ok(Admissible::new(
            move |x| s1.eval(x),
            move |x| s2.derivative(x).unwrap_or(f64::NAN),
            move |sigma| if sigma == a { ta } else { tb },
        )
        .with_frac_lap(move |x| f.eval(x, s3.eval(x))))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn trace(&self, sigma: f64) -> f64 {
        (self.trace)(sigma)
    }

    fn frac_lap(&self, p: &FracParams, d: &Domain, x: f64, opts: &OperatorOptions) -> Result<f64> {
        match &self.frac_lap {
            Some(f) => Ok(f(x)),
            None => Ok(apply_frac_lap(p, d, |z| self.value(z[0]), &[x], opts)?.value),
        }
    }
}

/// ∫ v' (-Δ)^s w + ∫ w' (-Δ)^s v + Γ²(1+s) Σ_σ γ(v)γ(w) ν on an interval.
pub fn check_pohozaev(p: &FracParams, d: &Domain, v: &Admissible, w: &Admissible, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    let (a, b) = interval_bounds(d)?;
    for g in [v, w] {
        if let Some((lo, hi)) = g.support {
            if lo < a || hi > b {
                return Err(Error::Parameter(format!("support ({lo}, {hi}) leaves the domain")));
            }
        }
    }
    let cuts: Vec<f64> = [v, w].iter().filter_map(|g| g.support).flat_map(|(lo, hi)| [lo, hi]).collect();
    let breaks = breakpoints(a, b, cuts.iter().copied().chain([0.5 * (a + b)]));
    let failure = std::sync::Mutex::new(None);
    let term = |g: &Admissible, h: &Admissible| {
        let mut acc = 0.0;
        for pair in breaks.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let inside = |g: &Admissible| g.support.is_none_or(|(l, r)| hi > l && lo < r);
            if !inside(g) {
                continue;
            }
            let r = tanh_sinh_par(
                |x| {
                    let dg = g.derivative(x);
                    if dg == 0.0 {
                        return 0.0;
                    }
                    match h.frac_lap(p, d, x, &opts.operator) {
                        Ok(l) => dg * l,
                        Err(e) => {
                            failure.lock().unwrap().get_or_insert(e);
                            0.0
                        }
                    }
                },
                lo,
                hi,
                1e-8,
                3,
                8,
            );
            acc += r.value;
        }
        acc
    };
    let first = term(v, w);
    let second = term(w, v);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let boundary = gamma_sq(p) * (v.trace(b) * w.trace(b) - v.trace(a) * w.trace(a));
    let total = first + second + boundary;
    let compact = v.support.is_some() && w.support.is_some();
    let tol = opts.tolerance(if compact { 1e-3 } else { 5e-3 });
    let params = report_params(p, d, Vec::new(), Some(0));
    Ok(IdentityReport::build(
        Identity::Pohozaev,
        params,
        Side::Scalar(first + second),
        Side::Scalar(-boundary),
        total.abs(),
        tol,
    )
    .detail("volumeVW", first)
    .detail("volumeWV", second)
    .detail("boundaryTerm", boundary)
    .timed(start))
}

fn sample_interior(rng: &mut ChaCha8Rng, c: &[f64], r: f64) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = z.iter().map(|v| v * v).sum();
        if n2 < 1.0 && n2 > 0.0 {
            return z.iter().zip(c).map(|(z, c)| c + r * z).collect();
        }
    }
}

fn sample_boundary_layer(rng: &mut ChaCha8Rng, c: &[f64], r: f64) -> Vec<f64> {
    let dir = loop {
        let z: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 && n < 1.0 {
            break z.into_iter().map(|v| v / n).collect::<Vec<_>>();
        }
    };
    let depth = r * 10f64.powf(-rng.gen_range(1.0..6.0));
    dir.iter().zip(c).map(|(u, c)| c + (r - depth) * u).collect()
}

/// Two-sided bound G ≍ |x-y|^{2s-N} min(1, (δ(x)δ(y))^s/|x-y|^{2s}) and the
/// gradient bound |∇_y G| ≤ N G / min(|x-y|, δ(y)) on random pairs, a fifth
/// of them with y in a thin boundary layer.
pub fn check_green_bounds(p: &FracParams, d: &Domain, samples: usize, seed: u64, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    if p.regime() != Regime::Subcritical {
        return Err(Error::Regime("the two-sided Green bound needs N > 2s".into()));
    }
    let green = GreenFunction::new(*p, d.clone())?;
    let (c, r) = d.center_radius();
    let (n, s) = (p.dim() as f64, p.s());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut used = 0usize;
    while used < samples {
        let x = sample_interior(&mut rng, &c, r);
        let y = if rng.gen_bool(0.2) { sample_boundary_layer(&mut rng, &c, r) } else { sample_interior(&mut rng, &c, r) };
        let rxy = dist(&x, &y);
        let (dx, dy) = (d.signed_distance(&x), d.signed_distance(&y));
        if rxy < 1e-8 * r || dx <= 0.0 || dy <= 0.0 {
            continue;
        }
        used += 1;
        let e = green.eval(&x, &y);
        let shape = rxy.powf(2.0 * s - n) * (1.0f64).min((dx * dy).powf(s) / rxy.powf(2.0 * s));
        let ratio = e.value / shape;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        let grad = e.grad_y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = n * e.value / rxy.min(dy);
        worst = worst.max(grad / bound);
        if grad > bound * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    let spread = hi / lo;
    let excess = (spread.log10() - 3.0).max(0.0);
    let tol = opts.tolerance(default_tolerance(Identity::GreenBounds, false));
    let residual = violations as f64 + excess;
    Ok(IdentityReport::build(
        Identity::GreenBounds,
        report_params(p, d, Vec::new(), None),
        Side::Vector(vec![violations as f64, spread]),
        Side::Vector(vec![0.0, 1e3]),
        residual,
        tol,
    )
    .detail("samples", samples as f64)
    .detail("ratioMin", lo)
    .detail("ratioMax", hi)
    .detail("gradientRatioMax", worst)
    .timed(start))
}

/// ∫_{|z-x|>ε} |∂_z G(x, z)| dz on an interval.
pub fn grad_green_l1(green: &GreenFunction, x: f64, eps: f64) -> Result<f64> {
    let (a, b) = interval_bounds(green.domain())?;
    let integrand = |z: f64| green.eval(&[x], &[z]).grad_y[0].abs();
    let mut acc = 0.0;
    for (end, sign) in [(a, -1.0), (b, 1.0)] {
        let span = (end - x).abs();
        if eps >= span {
            continue;
        }
        let mut cuts = vec![x + sign * eps];
        let mut t = 10.0 * eps;
        while t < span {
            cuts.push(x + sign * t);
            t *= 10.0;
        }
        cuts.push(end);
        cuts.sort_by(|u, v| u.partial_cmp(v).unwrap());
        acc += tanh_sinh_pieces(integrand, &cuts, 1e-10).value;
    }
    Ok(acc)
}

/// Behaviour of ∫|∂_z G(x,z)| dz as the excised neighbourhood of x shrinks
/// (ε_k = R 10^{-k-1}): Cauchy for 2s > 1, growth of at least 20% per level
/// otherwise. The residual is the last relative change in the first case and
/// the shortfall below 20% growth in the second.
pub fn check_grad_green_l1(p: &FracParams, d: &Domain, xs: &[f64], levels: usize, opts: &CheckOptions) -> Result<IdentityReport> {
    let start = Instant::now();
    check_params(p, d)?;
    interval_bounds(d)?;
    if levels < 2 {
        return Err(Error::Parameter("at least two refinement levels are needed".into()));
    }
    for &x in xs {
        check_point(d, &[x])?;
    }
    let green = GreenFunction::new(*p, d.clone())?;
    let (_, r) = d.center_radius();
    let stable = 2.0 * p.s() > 1.0;
    let mut series = Vec::with_capacity(xs.len());
    for &x in xs {
        let seq = (1..=levels)
            .map(|k| grad_green_l1(&green, x, r * 10f64.powi(-(k as i32) - 1)))
            .collect::<Result<Vec<_>>>()?;
        series.push(seq);
    }
    let last: Vec<f64> = series.iter().map(|q| q[levels - 1]).collect();
    let prev: Vec<f64> = series.iter().map(|q| q[levels - 2]).collect();
    let (residual, default_tol) = if stable {
        let change = last.iter().zip(&prev).map(|(l, p)| ((l - p) / l).abs()).fold(0.0, f64::max);
        (change, 0.05)
    } else {
        let growth = series
            .iter()
            .flat_map(|q| q.windows(2).map(|w| w[1] / w[0] - 1.0))
            .fold(f64::INFINITY, f64::min);
        ((0.2 - growth).max(0.0), 0.0)
    };
    let tol = opts.tol.unwrap_or(default_tol);
    let mut report = IdentityReport::build(
        Identity::GradGreenL1,
        report_params(p, d, xs.iter().map(|&x| vec![x]).collect(), Some(0)),
        Side::Vector(last.clone()),
        Side::Vector(prev),
        residual,
        tol,
    )
    .detail("maxValue", last.iter().copied().fold(0.0, f64::max))
    .detail("stable", if stable { 1.0 } else { 0.0 });
    report.series = series;
    Ok(report.timed(start))
}
