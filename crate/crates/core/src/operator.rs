//! Pointwise (-Δ)^s by singular quadrature, the energy and interaction
//! forms, and the universal constant a_{N,s}[ρ].

use crate::domain::{unit_sphere_rule, Domain};
use crate::error::{Error, Result};
use crate::quad::{breakpoints, compensated_sum, tanh_sinh, tanh_sinh_pieces, CompensatedSum, QuadResult, TanhSinh};
use crate::specfun::{c_const, fundamental_scale, fundamental_unchecked, FracParams, Regime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smooth transition ρ with ρ = 1 on [-1, 1] and ρ = 0 outside (-2, 2).
///
/// On 1 < |t| < 2 it is the quotient φ(2-|t|) / (φ(2-|t|) + φ(|t|-1)) with
/// φ(x) = exp(-k/x); the sharpness k selects one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    sharpness: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { sharpness: 1.0 }
    }
}

impl CutoffProfile {
    pub fn new(sharpness: f64) -> Result<Self> {
        if !(sharpness > 0.0) || !sharpness.is_finite() {
            return Err(Error::Parameter(format!("cutoff sharpness must be positive, got {sharpness}")));
        }
        Ok(CutoffProfile { sharpness })
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn phi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-self.sharpness / x).exp()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 {
            return 1.0;
        }
        if a >= 2.0 {
            return 0.0;
        }
        let (p, q) = (self.phi(2.0 - a), self.phi(a - 1.0));
        p / (p + q)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 || a >= 2.0 {
            return 0.0;
        }
        let k = self.sharpness;
        let (u, v) = (2.0 - a, a - 1.0);
        let (p, q) = (self.phi(u), self.phi(v));
        let (dp, dq) = (k / (u * u) * p, k / (v * v) * q);
        let d = -(dp * q + p * dq) / ((p + q) * (p + q));
        d * t.signum()
    }
}

/// Value of a pointwise operator evaluation. `near_boundary` flags points
/// whose distance to the boundary is below the resolution of the near field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    pub value: f64,
    pub error: f64,
    pub near_boundary: bool,
}

/// Accuracy knobs shared by the pointwise evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    /// Tolerance of every one-dimensional ray integral.
    pub tol: f64,
    /// Number of directions on the circle (N = 2) or the sphere order (N = 3).
    pub directions: usize,
    /// Near-field radius as a fraction of the distance to the boundary.
    pub near_fraction: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions { tol: 1e-11, directions: 64, near_fraction: 0.05 }
    }
}

/// ∫_0^∞ D(t) t^{-1-2s} dt where D(t) = O(t²) is smooth on [0, t_near],
/// may have boundary singularities at the exit distances, and equals the
/// constant `tail` beyond the largest of them.
fn ray_integral<D: FnMut(f64) -> f64>(
    mut d: D,
    s: f64,
    t_near: f64,
    exits: [f64; 2],
    tail: f64,
    tol: f64,
) -> QuadResult {
    // D(t) ≈ α t² + β t⁴ on [0, t0]; t0 shrinks until a third sample
    // confirms the expansion.
    let mut t0 = t_near;
    let mut near = 0.0;
    let mut evaluations = 0;
    for _ in 0..30 {
        let (d1, d2, d4) = (d(t0), d(0.5 * t0), d(0.25 * t0));
        evaluations += 3;
        let beta4 = (d1 - 4.0 * d2) * 4.0 / 3.0;
        let alpha2 = d1 - beta4;
        near = t0.powf(-2.0 * s) * (alpha2 / (2.0 - 2.0 * s) + beta4 / (4.0 - 2.0 * s));
        let predicted = alpha2 / 16.0 + beta4 / 256.0;
        if (predicted - d4).abs() <= 1e-10 * d4.abs() + 1e-14 * tail.abs() {
            break;
        }
        t0 *= 0.5;
    }
    let t_far = exits[0].max(exits[1]);
    let breaks = breakpoints(t0, t_far, exits);
    let mut r = tanh_sinh_pieces(|t| d(t) * t.powf(-1.0 - 2.0 * s), &breaks, tol);
    r.value += near + tail * t_far.powf(-2.0 * s) / (2.0 * s);
    r.evaluations += evaluations;
    r
}

fn check_interior(d: &Domain, x: &[f64]) -> Result<()> {
    if x.len() != d.dim() {
        return Err(Error::Parameter(format!("point {x:?} does not have dimension {}", d.dim())));
    }
    if !d.contains(x) {
        return Err(Error::Domain(format!("operator evaluated at non-interior point {x:?}")));
    }
    Ok(())
}

/// Directions and weights for the spherical integral; antipodal pairs are
/// folded into the ray integrand, so each rule covers the full sphere and
/// carries a factor 1/2.
fn directions(dim: usize, opts: &OperatorOptions) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rule = unit_sphere_rule(dim, opts.directions)?;
    Ok((rule.nodes, rule.weights.iter().map(|w| 0.5 * w).collect()))
}

/// c_{N,s} · (1/2) Σ_θ w_θ ∫_0^∞ D_θ(t) t^{-1-2s} dt for a ray integrand
/// built from the direction and the exit distances.
fn spherical_form<R>(p: &FracParams, d: &Domain, x: &[f64], opts: &OperatorOptions, ray: R) -> Result<OperatorValue>
where
    R: Fn(&[f64], [f64; 2]) -> QuadResult + Sync,
{
    check_interior(d, x)?;
    if p.dim() != d.dim() {
        return Err(Error::Parameter(format!("parameters for N = {} used on a {}-dimensional domain", p.dim(), d.dim())));
    }
    let (dirs, weights) = directions(d.dim(), opts)?;
    let n_dirs = if d.dim() == 1 { 1 } else { dirs.len() };
    let weight_scale = if d.dim() == 1 { 2.0 } else { 1.0 };
    let parts: Vec<(f64, f64)> = (0..n_dirs)
        .into_par_iter()
        .map(|k| {
            let dir = &dirs[if d.dim() == 1 { 1 } else { k }];
            let back: Vec<f64> = dir.iter().map(|v| -v).collect();
            let exits = [d.exit_distance(x, dir), d.exit_distance(x, &back)];
            let r = ray(dir, exits);
            let w = weights[k] * weight_scale;
            (w * r.value, w * r.error)
        })
        .collect();
    let c = c_const(p);
    let value = c * compensated_sum(parts.iter().map(|v| v.0));
    let error = c * parts.iter().map(|v| v.1.abs()).sum::<f64>();
    let (_, r) = d.center_radius();
    Ok(OperatorValue { value, error, near_boundary: d.signed_distance(x) < 1e-3 * r })
}

fn along(x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(x, d)| x + t * d).collect()
}

/// (-Δ)^s u(x) for u vanishing outside the domain. Values of `u` are only
/// requested at points inside the domain.
pub fn apply_frac_lap<U>(p: &FracParams, d: &Domain, u: U, x: &[f64], opts: &OperatorOptions) -> Result<OperatorValue>
where
    U: Fn(&[f64]) -> f64 + Sync,
{
    let ux = u(x);
    let eval = |z: Vec<f64>| if d.contains(&z) { u(&z) } else { 0.0 };
    let s = p.s();
    spherical_form(p, d, x, opts, |dir, exits| {
        let t_near = opts.near_fraction * exits[0].min(exits[1]);
        let diff = |t: f64| 2.0 * ux - eval(along(x, dir, t)) - eval(along(x, dir, -t));
        ray_integral(diff, s, t_near, exits, 2.0 * ux, opts.tol)
    })
}

/// I_s[u, v](x) = c_{N,s} ∫ (u(x) - u(y)) (v(x) - v(y)) |x - y|^{-N-2s} dy.
pub fn interaction_form<U, V>(
    p: &FracParams,
    d: &Domain,
    u: U,
    v: V,
    x: &[f64],
    opts: &OperatorOptions,
) -> Result<OperatorValue>
where
    U: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
{
    let (ux, vx) = (u(x), v(x));
    let eu = |z: &[f64]| if d.contains(z) { u(z) } else { 0.0 };
    let ev = |z: &[f64]| if d.contains(z) { v(z) } else { 0.0 };
    let s = p.s();
    spherical_form(p, d, x, opts, |dir, exits| {
        let t_near = opts.near_fraction * exits[0].min(exits[1]);
        let diff = |t: f64| {
            let (a, b) = (along(x, dir, t), along(x, dir, -t));
            (ux - eu(&a)) * (vx - ev(&a)) + (ux - eu(&b)) * (vx - ev(&b))
        };
        ray_integral(diff, s, t_near, exits, 2.0 * ux * vx, opts.tol)
    })
}

/// Values on the cell-centered interior grid of a domain, extended by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    h: f64,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn sample<F: Fn(&[f64]) -> f64>(domain: &Domain, h: f64, f: F) -> Result<Self> {
        let points = domain.interior_grid(h)?;
        let values: Vec<f64> = points.iter().map(|p| f(p)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite grid value at {:?}", points[i])));
        }
        Ok(GridFunction { domain: domain.clone(), h, points, values })
    }

    pub fn from_values(domain: &Domain, h: f64, values: Vec<f64>) -> Result<Self> {
        let points = domain.interior_grid(h)?;
        if points.len() != values.len() {
            return Err(Error::Parameter(format!("{} values for a grid of {} points", values.len(), points.len())));
        }
        Ok(GridFunction { domain: domain.clone(), h, points, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn mesh(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ∫ u by the midpoint rule.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.h.powi(self.domain.dim() as i32)
    }

    /// Centered difference slope, one-sided at the ends.
    fn slopes(&self) -> Vec<f64> {
        let (v, h, n) = (&self.values, self.h, self.values.len());
        (0..n)
            .map(|i| match (i, n) {
                (_, 1) => 0.0,
                (0, _) => (v[1] - v[0]) / h,
                (i, n) if i == n - 1 => (v[n - 1] - v[n - 2]) / h,
                _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
            })
            .collect()
    }
}

/// E_s(u, v) = (c_{N,s}/2) ∬ (u(y)-u(z))(v(y)-v(z)) |y-z|^{-N-2s} dy dz on
/// one-dimensional grids.
///
/// Off-diagonal cell pairs use the midpoint rule, each diagonal cell adds
/// the second-order self-interaction u'v' ∬_{cell²} |y-z|^{1-2s}, and the
/// exterior where both functions vanish contributes u v ∫_{Ω^c} |y-z|^{-1-2s}.
pub fn energy_form(p: &FracParams, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    if u.domain != v.domain || u.h != v.h || u.len() != v.len() {
        return Err(Error::Parameter("energy form needs functions on the same grid".into()));
    }
    if u.domain.dim() != 1 || p.dim() != 1 {
        return Err(Error::Capability("energy form is implemented on intervals only".into()));
    }
    let (a, b) = match u.domain {
        Domain::Interval { a, b } => (a, b),
        Domain::Ball { ref center, radius } => (center[0] - radius, center[0] + radius),
    };
    let s = p.s();
    let h = u.h;
    let (x, uv, vv) = (&u.points, &u.values, &v.values);
    let n = uv.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for j in (i + 1)..n {
                let r = x[j][0] - x[i][0];
                acc.add((uv[i] - uv[j]) * (vv[i] - vv[j]) * r.powf(-1.0 - 2.0 * s));
            }
            acc.value() * h * h
        })
        .collect();
    let pairs = compensated_sum(rows);
    let (du, dv) = (u.slopes(), v.slopes());
    let self_cell = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
    let diag = compensated_sum((0..n).map(|i| du[i] * dv[i])) * self_cell;
    let exterior = compensated_sum((0..n).map(|i| {
        let y = x[i][0];
        uv[i] * vv[i] * ((y - a).powf(-2.0 * s) + (b - y).powf(-2.0 * s))
    })) * h
        / (2.0 * s);
    let c = c_const(p);
    Ok(c * pairs + 0.5 * c * diag + c * exterior)
}

/// Accuracy and cost controls for [`a_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AConstantOptions {
    /// Integrand evaluations allowed across both diagonal widths.
    pub budget: usize,
    /// Target for the reported error bar.
    pub tol: f64,
    /// Width of the diagonal strip replaced by its Taylor expansion.
    pub strip: f64,
}

impl Default for AConstantOptions {
    fn default() -> Self {
        AConstantOptions { budget: 200_000_000, tol: 1e-3, strip: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AConstantResult {
    pub value: f64,
    /// Quadrature error plus the change under halving the diagonal strip.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn fundamental_derivative(p: &FracParams, r: f64) -> f64 {
    match p.regime() {
        Regime::LogCritical => -1.0 / (PI * r),
        _ => {
            let e = 2.0 * p.s() - p.dim() as f64;
            fundamental_scale(p) * e * r.powf(e - 1.0)
        }
    }
}

/// Outer tanh-sinh over several pieces with parallel node evaluation; the
/// integrand receives the piece index and returns its value and the number
/// of inner evaluations spent.
fn outer_quadrature<F>(f: F, pieces: &[(f64, f64)], tol: f64, budget: usize) -> QuadResult
where
    F: Fn(usize, f64) -> (f64, usize) + Sync,
{
    let mut evaluations = 0;
    let mut prev = f64::NAN;
    let mut last = QuadResult { value: f64::NAN, error: f64::INFINITY, evaluations: 0, converged: false };
    for level in 3..=9 {
        let rule = TanhSinh::new(level);
        let mut nodes = Vec::new();
        for (k, &(a, b)) in pieces.iter().enumerate() {
            rule.for_each_node(a, b, |x, w| nodes.push((k, x, w)));
        }
        let vals: Vec<(f64, usize)> = nodes
            .par_iter()
            .map(|&(k, x, w)| {
                let (v, n) = f(k, x);
                (w * v, n)
            })
            .collect();
        evaluations += vals.iter().map(|v| v.1).sum::<usize>();
        let value = compensated_sum(vals.iter().map(|v| v.0));
        let error = (value - prev).abs();
        last = QuadResult { value, error, evaluations, converged: false };
        if level > 3 && error <= tol * value.abs().max(1.0) {
            last.converged = true;
            break;
        }
        if evaluations > budget {
            break;
        }
        prev = value;
    }
    last
}

const INNER_TOL: f64 = 1e-11;

/// (1/4c) a_{1,s}[ρ] with diagonal strip ε: the full-plane integral folded
/// onto z > 1, |y| < z.
fn a_constant_line(p: &FracParams, rho: &CutoffProfile, eps: f64, tol: f64, budget: usize) -> QuadResult {
    let s = p.s();
    let sq2 = 2f64.sqrt();
    let f = |r: f64| fundamental_unchecked(p, r);
    let inner = |z: f64| -> (f64, usize) {
        let rz = rho.value(z * z);
        let fz = f(z);
        let g = |y: f64| (rho.value(y * y) - rz) * (fz - f(y.abs())) * (z - y).abs().powf(-1.0 - 2.0 * s);
        if z < sq2 {
            let hi = z - eps;
            let breaks = breakpoints(-z, hi, [-1.0, 0.0, 1.0]);
            let r = tanh_sinh_pieces(g, &breaks, INNER_TOL);
            let a = -2.0 * z * rho.derivative(z * z) * fundamental_derivative(p, z);
            let w = z - hi.max(-z);
            (r.value + a * w.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s), r.evaluations)
        } else {
            let breaks = breakpoints(-sq2, sq2, [-1.0, 0.0, 1.0]);
            let r = tanh_sinh_pieces(g, &breaks, INNER_TOL);
            (r.value, r.evaluations)
        }
    };
    outer_quadrature(
        |piece, t| {
            if piece == 0 {
                inner(t)
            } else {
                // z = √2 / u on the unbounded piece
                let u = t;
                let z = sq2 / u;
                let (v, n) = inner(z);
                (v * sq2 / (u * u), n)
            }
        },
        &[(1.0, sq2), (0.0, 1.0)],
        tol,
        budget,
    )
}

/// J(λ) = ∫_0^{π/2} (cos²θ + λ² sin²θ)^s dθ, the angular factor of the
/// planar kernel.
fn planar_angle_factor(s: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    tanh_sinh(|t: f64| (1.0 - (1.0 - l2) * t.sin().powi(2)).powf(s), 0.0, 0.5 * PI, 1e-13).value
}

/// (1/4πc) a_{2,s}[ρ] in radial variables r < q after integrating both
/// angles; the kernel is 4 J(λ) / ((q - r)^{1+2s} (q + r)).
fn a_constant_plane(p: &FracParams, rho: &CutoffProfile, eps: f64, tol: f64, budget: usize) -> QuadResult {
    let s = p.s();
    let sq2 = 2f64.sqrt();
    let f = |r: f64| fundamental_unchecked(p, r);
    let j0 = PI.sqrt() * crate::specfun::gamma_real(0.5 + s) / (2.0 * crate::specfun::gamma_real(1.0 + s));
    let inner = |q: f64| -> (f64, usize) {
        let rq = rho.value(q * q);
        let fq = f(q);
        let g = |r: f64| {
            let d = q - r;
            let kernel = 4.0 * planar_angle_factor(s, d / (q + r)) / (d.powf(1.0 + 2.0 * s) * (q + r));
            r * q * (rho.value(r * r) - rq) * (fq - f(r)) * kernel
        };
        if q < sq2 {
            let hi = (q - eps).max(0.0);
            let r = tanh_sinh_pieces(g, &breakpoints(0.0, hi, [1.0]), INNER_TOL);
            let a = -4.0 * q * q * rho.derivative(q * q) * fundamental_derivative(p, q) * j0;
            (r.value + a * (q - hi).powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s), r.evaluations)
        } else {
            let r = tanh_sinh_pieces(g, &breakpoints(0.0, sq2, [1.0]), INNER_TOL);
            (r.value, r.evaluations)
        }
    };
    outer_quadrature(
        |piece, t| {
            if piece == 0 {
                inner(t)
            } else {
                let u = t;
                let q = sq2 / u;
                let (v, n) = inner(q);
                (v * sq2 / (u * u), n)
            }
        },
        &[(1.0, sq2), (0.0, 1.0)],
        tol,
        budget,
    )
}

/// a_{N,s}[ρ] = c_{N,s} ∬ (ρ(|y|²) - ρ(|z|²)) (F(z) - F(y)) |z - y|^{-N-2s}
/// with F the fundamental solution (logarithmic when N = 2s = 1), for
/// N ∈ {1, 2}.
pub fn a_constant(p: &FracParams, rho: &CutoffProfile, opts: &AConstantOptions) -> Result<AConstantResult> {
    let (scale, run): (f64, fn(&FracParams, &CutoffProfile, f64, f64, usize) -> QuadResult) = match p.dim() {
        1 => (4.0 * c_const(p), a_constant_line),
        2 => (4.0 * PI * c_const(p), a_constant_plane),
        n => return Err(Error::Capability(format!("a_(N,s) is implemented for N = 1, 2, not N = {n}"))),
    };
    let quad_tol = 0.01 * opts.tol / scale.max(1.0);
    let coarse = run(p, rho, opts.strip, quad_tol, opts.budget / 2);
    let fine = run(p, rho, 0.5 * opts.strip, quad_tol, opts.budget.saturating_sub(coarse.evaluations));
    let value = scale * fine.value;
    let error = scale * ((fine.value - coarse.value).abs() + fine.error);
    let evaluations = coarse.evaluations + fine.evaluations;
    let converged = coarse.converged && fine.converged && evaluations <= opts.budget && error <= opts.tol;
    if !value.is_finite() {
        return Err(Error::Numerical(format!("a_(N,s) quadrature produced {value}")));
    }
    Ok(AConstantResult { value, error, evaluations, converged })
}
