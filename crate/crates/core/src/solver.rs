//! Dirichlet problems (-Δ)^s u = f(x, u) in an interval, u = 0 outside,
//! solved through the Green representation u(x) = ∫ G_s(x,z) f(z, u(z)) dz.
//!
//! The source is interpolated by hat functions on the cell-centered grid
//! (constant on the two boundary cells), and the weights ∫ G(x,z) φ_j(z) dz
//! are computed cell by cell: Gauss–Legendre away from x and the boundary,
//! the fundamental solution integrated in closed form plus tanh-sinh on the
//! regular part near x, and tanh-sinh on the boundary cells. The subtraction
//! u(x) = g(x) T(x) + Σ_j (g_j - g(x)) W_j(x), with T = ∫ G(x,·) the torsion
//! function, makes constant sources exact.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::greenfn::{GreenFunction, TraceField};
use crate::operator::GridFunction;
use crate::quad::{compensated_sum, tanh_sinh, GaussLegendre};
use crate::richardson::{extrapolate, trace_exponents, StepSchedule};
use crate::specfun::{fundamental_scale, torsion_scale, FracParams, Regime};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type StateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Space,
    Semilinear,
}

/// Right-hand side f(x, q) with optional partial derivatives ∂_x f, ∂_q f.
#[derive(Clone)]
pub struct SourceTerm {
    kind: SourceKind,
    f: StateFn,
    dx: Option<StateFn>,
    dq: Option<StateFn>,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm")
            .field("kind", &self.kind)
            .field("partials", &(self.dx.is_some() && self.dq.is_some()))
            .finish()
    }
}

impl SourceTerm {
    pub fn space<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        SourceTerm { kind: SourceKind::Space, f: Arc::new(move |x, _| f(x)), dx: None, dq: None }
    }

    pub fn semilinear<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        SourceTerm { kind: SourceKind::Semilinear, f: Arc::new(f), dx: None, dq: None }
    }

    pub fn constant(c: f64) -> Self {
        SourceTerm::space(move |_| c)
    }

    pub fn with_partials<A, B>(mut self, dx: A, dq: B) -> Self
    where
        A: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.dx = Some(Arc::new(dx));
        self.dq = Some(Arc::new(dq));
        self
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn eval(&self, x: f64, q: f64) -> f64 {
        (self.f)(x, q)
    }

    pub fn has_partials(&self) -> bool {
        self.dx.is_some() && self.dq.is_some()
    }

    pub fn dx(&self, x: f64, q: f64) -> Option<f64> {
        self.dx.as_ref().map(|d| d(x, q))
    }

    pub fn dq(&self, x: f64, q: f64) -> Option<f64> {
        self.dq.as_ref().map(|d| d(x, q))
    }

    /// Multiply the source by a constant.
    pub fn scaled(&self, alpha: f64) -> Self {
        let f = self.f.clone();
        let dx = self.dx.clone().map(|d| Arc::new(move |x, q| alpha * d(x, q)) as StateFn);
        let dq = self.dq.clone().map(|d| Arc::new(move |x, q| alpha * d(x, q)) as StateFn);
        SourceTerm { kind: self.kind, f: Arc::new(move |x, q| alpha * f(x, q)), dx, dq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Sup-norm tolerance of the fixed-point residual.
    pub tol: f64,
    /// Tolerance of the adaptive pieces of the product rule.
    pub quad_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 200, tol: 1e-10, quad_tol: 1e-13 }
    }
}

/// Which kernel the product rule integrates against the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum KernelKind {
    Green,
    /// ∂_z G(x, z); integrable only for 2s > 1.
    GreenGradZ,
}

const GL_POINTS: usize = 8;

/// Weights of ∫ K(x,z) g(z) dz against the grid hat functions.
pub(crate) struct ProductRule {
    green: GreenFunction,
    a: f64,
    b: f64,
    h: f64,
    nodes: Vec<f64>,
    gl: GaussLegendre,
    tol: f64,
}

/// Closed-form ∫_c^d S(z - x) dz and ∫_c^d S(z - x)(z - c) dz for the
/// singular profile S of a kernel.
#[derive(Debug, Clone, Copy)]
enum Singular {
    /// coef |t|^p
    Even { coef: f64, p: f64 },
    /// coef sign(t) |t|^p
    Odd { coef: f64, p: f64 },
    /// coef log|t|
    Log { coef: f64 },
}

impl Singular {
    /// Antiderivatives of S(t) and t S(t).
    fn antiderivatives(&self, t: f64) -> (f64, f64) {
        let a = t.abs();
        match *self {
            Singular::Even { coef, p } => (
                coef * t.signum() * a.powf(p + 1.0) / (p + 1.0),
                coef * a.powf(p + 2.0) / (p + 2.0),
            ),
            Singular::Odd { coef, p } => (
                coef * a.powf(p + 1.0) / (p + 1.0),
                coef * t.signum() * a.powf(p + 2.0) / (p + 2.0),
            ),
            Singular::Log { coef } => {
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (coef * (t * a.ln() - t), coef * (0.5 * t * t * a.ln() - 0.25 * t * t))
                }
            }
        }
    }

    fn moments(&self, x: f64, c: f64, d: f64) -> (f64, f64) {
        let (p0, p1) = self.antiderivatives(c - x);
        let (q0, q1) = self.antiderivatives(d - x);
        let m0 = q0 - p0;
        (m0, (q1 - p1) + (x - c) * m0)
    }
}

impl ProductRule {
    pub(crate) fn new(p: &FracParams, d: &Domain, h: f64, tol: f64) -> Result<Self> {
        let (a, b) = match d {
            Domain::Interval { a, b } => (*a, *b),
            Domain::Ball { center, radius } if center.len() == 1 => (center[0] - radius, center[0] + radius),
            _ => return Err(Error::Capability("the Dirichlet solver is implemented on intervals only".into())),
        };
        let nodes: Vec<f64> = d.interior_grid(h)?.into_iter().map(|v| v[0]).collect();
        if nodes.len() < 3 {
            return Err(Error::Parameter(format!("mesh size {h} leaves fewer than 3 grid points")));
        }
        Ok(ProductRule { green: GreenFunction::new(*p, d.clone())?, a, b, h, nodes, gl: GaussLegendre::new(GL_POINTS), tol })
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn singular(&self, kind: KernelKind) -> Singular {
        let p = self.green.params();
        let s = p.s();
        match (kind, p.regime()) {
            (KernelKind::Green, Regime::LogCritical) => Singular::Log { coef: -1.0 / PI },
            (KernelKind::Green, _) => Singular::Even { coef: fundamental_scale(p), p: 2.0 * s - 1.0 },
            (KernelKind::GreenGradZ, Regime::LogCritical) => Singular::Odd { coef: -1.0 / PI, p: -1.0 },
            (KernelKind::GreenGradZ, _) => {
                Singular::Odd { coef: fundamental_scale(p) * (2.0 * s - 1.0), p: 2.0 * s - 2.0 }
            }
        }
    }

    fn full(&self, kind: KernelKind, x: f64, z: f64) -> f64 {
        match kind {
            KernelKind::Green => self.green.value(&[x], &[z]),
            KernelKind::GreenGradZ => self.green.eval(&[x], &[z]).grad_y[0],
        }
    }

    /// Kernel minus its singular profile: -H or -∂_z H.
    fn regular(&self, kind: KernelKind, x: f64, z: f64) -> f64 {
        match kind {
            KernelKind::Green => -self.green.regular_part(&[x], &[z]),
            KernelKind::GreenGradZ => -self.green.regular_grad_y(&[x], &[z])[0],
        }
    }

    /// (∫_c^d K, ∫_c^d K (z-c)/(d-c)) over one cell.
    fn cell_moments(&self, kind: KernelKind, x: f64, c: f64, d: f64, near: bool, edge: bool) -> (f64, f64) {
        let len = d - c;
        if near {
            let sing = self.singular(kind);
            let (s0, s1) = sing.moments(x, c, d);
            let mut r0 = 0.0;
            let mut r1 = 0.0;
            let mut pieces = vec![c, d];
            if x > c && x < d {
                pieces.insert(1, x);
            }
            for w in pieces.windows(2) {
                r0 += tanh_sinh(|z| self.regular(kind, x, z), w[0], w[1], self.tol).value;
                r1 += tanh_sinh(|z| self.regular(kind, x, z) * (z - c), w[0], w[1], self.tol).value;
            }
            (s0 + r0, (s1 + r1) / len)
        } else if edge {
            let m0 = tanh_sinh(|z| self.full(kind, x, z), c, d, self.tol).value;
            let m1 = tanh_sinh(|z| self.full(kind, x, z) * (z - c), c, d, self.tol).value;
            (m0, m1 / len)
        } else {
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            for (z, w) in self.gl.mapped(c, d) {
                let k = self.full(kind, x, z);
                m0 += w * k;
                m1 += w * k * (z - c);
            }
            (m0, m1 / len)
        }
    }

    /// W_j(x) = ∫ K(x,z) φ_j(z) dz for every grid hat φ_j.
    pub(crate) fn weights(&self, kind: KernelKind, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        let reach = 2.0 * self.h;
        let near = |c: f64, d: f64| x > c - reach && x < d + reach;
        let (first, last) = (self.nodes[0], self.nodes[n - 1]);
        w[0] += self.cell_moments(kind, x, self.a, first, near(self.a, first), true).0;
        w[n - 1] += self.cell_moments(kind, x, last, self.b, near(last, self.b), true).0;
        for k in 0..n - 1 {
            let (c, d) = (self.nodes[k], self.nodes[k + 1]);
            let (m0, m1) = self.cell_moments(kind, x, c, d, near(c, d), false);
            w[k] += m0 - m1;
            w[k + 1] += m1;
        }
        w
    }

    /// Hat interpolant of grid values, constant on the boundary cells.
    pub(crate) fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return values[0];
        }
        if x >= self.nodes[n - 1] {
            return values[n - 1];
        }
        let k = (((x - self.nodes[0]) / self.h).floor() as usize).min(n - 2);
        let t = (x - self.nodes[k]) / self.h;
        values[k] * (1.0 - t) + values[k + 1] * t
    }

    /// ∫ G(x,z) g̃(z) dz with the constant part integrated exactly.
    pub(crate) fn convolve_green(&self, values: &[f64], x: f64) -> f64 {
        let w = self.weights(KernelKind::Green, x);
        let gx = self.interpolate(values, x);
        let torsion = self.torsion(x);
        gx * torsion + compensated_sum(w.iter().zip(values).map(|(w, g)| w * (g - gx)))
    }

    /// ∫ ∂_z G(x,z) g̃(z) dz, for 2s > 1.
    pub(crate) fn convolve_green_grad(&self, values: &[f64], x: f64) -> f64 {
        let w = self.weights(KernelKind::GreenGradZ, x);
        compensated_sum(w.iter().zip(values).map(|(w, g)| w * g))
    }

    /// ∫ G(x, z) dz in closed form.
    pub(crate) fn torsion(&self, x: f64) -> f64 {
        let c = 0.5 * (self.a + self.b);
        let r = 0.5 * (self.b - self.a);
        let p = self.green.params();
        torsion_scale(p) * (r * r - (x - c) * (x - c)).max(0.0).powf(p.s())
    }
}

/// Grid solution with its source values and boundary trace.
#[derive(Clone)]
pub struct Solution {
    params: FracParams,
    domain: Domain,
    u: GridFunction,
    source: Vec<f64>,
    trace: TraceField,
    iterations: usize,
    residual: f64,
    rule: Arc<ProductRule>,
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solution")
            .field("params", &self.params)
            .field("domain", &self.domain)
            .field("points", &self.u.len())
            .field("iterations", &self.iterations)
            .field("residual", &self.residual)
            .finish()
    }
}

impl Solution {
    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn u(&self) -> &GridFunction {
        &self.u
    }

    /// f(z_j, u(z_j)) on the grid.
    pub fn source_values(&self) -> &[f64] {
        &self.source
    }

    pub fn trace(&self) -> &TraceField {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// u at an arbitrary point through the Green representation.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.domain.contains(&[x]) {
            return 0.0;
        }
        self.rule.convolve_green(&self.source, x)
    }

    /// ∂_x u by fourth-order central differences of the representation, with
    /// the step tied to the distance to the boundary.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let delta = self.domain.signed_distance(&[x]);
        if delta <= 0.0 {
            return Err(Error::Domain(format!("derivative requested at non-interior point {x}")));
        }
        let (_, radius) = self.domain.center_radius();
        let h = (0.05 * delta).min(1e-3 * radius);
        let f = |t: f64| self.eval(t);
        Ok((f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h))
    }

    /// ∫ ∂_z G(x, z) f(z, u(z)) dz, defined for 2s > 1.
    pub fn grad_green_convolution(&self, x: f64) -> Result<f64> {
        if 2.0 * self.params.s() <= 1.0 {
            return Err(Error::Regime("∂_z G is not integrable for 2s <= 1".into()));
        }
        Ok(self.rule.convolve_green_grad(&self.source, x))
    }

    /// ∫ G(x, z) w(z) dz for another grid density w.
    pub fn green_convolution(&self, values: &[f64], x: f64) -> Result<f64> {
        if values.len() != self.source.len() {
            return Err(Error::Parameter("density does not match the solution grid".into()));
        }
        Ok(self.rule.convolve_green(values, x))
    }
}

fn build_matrix(rule: &ProductRule) -> Vec<Vec<f64>> {
    rule.nodes().par_iter().map(|&x| rule.weights(KernelKind::Green, x)).collect()
}

/// u_i = g_i T_i + Σ_j (g_j - g_i) W_ij.
fn apply(matrix: &[Vec<f64>], torsion: &[f64], g: &[f64]) -> Vec<f64> {
    matrix
        .par_iter()
        .enumerate()
        .map(|(i, row)| g[i] * torsion[i] + compensated_sum(row.iter().zip(g).map(|(w, gj)| w * (gj - g[i]))))
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Trace of u at both interval endpoints by extrapolating u/δ^s.
fn extrapolated_trace(rule: &ProductRule, p: &FracParams, d: &Domain, source: &[f64]) -> Result<TraceField> {
    let s = p.s();
    let rule_b = d.boundary_rule(1)?;
    let (_, radius) = d.center_radius();
    let schedule = StepSchedule { first: 1e-2 * radius, levels: 9 };
    let scale = source.iter().fold(0.0f64, |m, v| m.max(v.abs())) * torsion_scale(p) * radius.powf(s);
    let mut values = Vec::with_capacity(rule_b.len());
    for (sigma, nu) in rule_b.nodes.iter().zip(&rule_b.normals) {
        if scale == 0.0 {
            values.push(0.0);
            continue;
        }
        let phi = |delta: f64| {
            let x = sigma[0] - delta * nu[0];
            rule.convolve_green(source, x) / d.signed_distance(&[x]).powf(s)
        };
        let e = extrapolate(phi, schedule, &trace_exponents(s, &[]), 1e-4).map_err(|err| {
            Error::Numerical(format!("trace extrapolation at {sigma:?} failed: {err}"))
        })?;
        values.push(e.value);
    }
    Ok(TraceField { nodes: rule_b.nodes, values })
}

fn finish(
    p: &FracParams,
    d: &Domain,
    h: f64,
    rule: ProductRule,
    u: Vec<f64>,
    source: Vec<f64>,
    iterations: usize,
    residual: f64,
) -> Result<Solution> {
    let trace = extrapolated_trace(&rule, p, d, &source)?;
    Ok(Solution {
        params: *p,
        domain: d.clone(),
        u: GridFunction::from_values(d, h, u)?,
        source,
        trace,
        iterations,
        residual,
        rule: Arc::new(rule),
    })
}

/// Solve (-Δ)^s u = f(x) with u = 0 outside the interval.
pub fn solve_linear(p: &FracParams, d: &Domain, f: &SourceTerm, h: f64, opts: &SolverOptions) -> Result<Solution> {
    if f.kind() != SourceKind::Space {
        return Err(Error::Parameter("solve_linear needs a source independent of u".into()));
    }
    let rule = ProductRule::new(p, d, h, opts.quad_tol)?;
    let g: Vec<f64> = rule.nodes().iter().map(|&x| f.eval(x, 0.0)).collect();
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("source is not finite at x = {}", rule.nodes()[i])));
    }
    let matrix = build_matrix(&rule);
    let torsion: Vec<f64> = rule.nodes().iter().map(|&x| rule.torsion(x)).collect();
    let u = apply(&matrix, &torsion, &g);
    finish(p, d, h, rule, u, g, 1, 0.0)
}

/// Picard iteration u ← ∫ G f(·, u), damped by 1/2 when the Lipschitz
/// estimate times sup ∫G is not below one.
pub fn solve_semilinear(p: &FracParams, d: &Domain, f: &SourceTerm, h: f64, opts: &SolverOptions) -> Result<Solution> {
    let rule = ProductRule::new(p, d, h, opts.quad_tol)?;
    let nodes = rule.nodes().to_vec();
    let matrix = build_matrix(&rule);
    let torsion: Vec<f64> = nodes.iter().map(|&x| rule.torsion(x)).collect();
    let sup_torsion = torsion.iter().fold(0.0f64, |m, &v| m.max(v));
    let f0_sup = nodes.iter().fold(0.0f64, |m, &x| m.max(f.eval(x, 0.0).abs()));
    let bound = (4.0 * sup_torsion * f0_sup).max(1.0);
    let lipschitz = estimate_lipschitz(f, &nodes, bound);
    let damping = if lipschitz * sup_torsion < 1.0 { 1.0 } else { 0.5 };

    let source = |u: &[f64]| -> Result<Vec<f64>> {
        let g: Vec<f64> = nodes.iter().zip(u).map(|(&x, &q)| f.eval(x, q)).collect();
        match g.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numerical(format!("source is not finite at x = {}", nodes[i]))),
            None => Ok(g),
        }
    };
    let mut u = vec![0.0; nodes.len()];
    let mut prev_residual = f64::INFINITY;
    let mut growth = 0;
    for iter in 1..=opts.max_iter {
        let g = source(&u)?;
        let image = apply(&matrix, &torsion, &g);
        let residual = sup_diff(&image, &u);
        if residual <= opts.tol {
            return finish(p, d, h, rule, image, g, iter, residual);
        }
        if residual > prev_residual {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Convergence { iterations: iter, residual });
            }
        } else {
            growth = 0;
        }
        prev_residual = residual;
        u = u.iter().zip(&image).map(|(a, b)| (1.0 - damping) * a + damping * b).collect();
    }
    let g = source(&u)?;
    let residual = sup_diff(&apply(&matrix, &torsion, &g), &u);
    Err(Error::Convergence { iterations: opts.max_iter, residual })
}

/// Largest difference quotient of f in q over the grid and [-bound, bound].
fn estimate_lipschitz(f: &SourceTerm, nodes: &[f64], bound: f64) -> f64 {
    if f.kind() == SourceKind::Space {
        return 0.0;
    }
    let qs: Vec<f64> = (0..=16).map(|k| -bound + 2.0 * bound * k as f64 / 16.0).collect();
    let mut lip = 0.0f64;
    for &x in nodes.iter().step_by((nodes.len() / 32).max(1)) {
        for w in qs.windows(2) {
            lip = lip.max(((f.eval(x, w[1]) - f.eval(x, w[0])) / (w[1] - w[0])).abs());
        }
    }
    lip
}

/// Recompute the fractional Neumann trace of a solution.
pub fn solution_trace(sol: &Solution) -> Result<TraceField> {
    extrapolated_trace(&sol.rule, &sol.params, &sol.domain, &sol.source)
}
