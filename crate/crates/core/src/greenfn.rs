//! Closed-form Green function of the fractional Laplacian on balls and
//! intervals, with its regular part, Robin function, fractional boundary
//! trace and spatial derivatives.
//!
//! On the unit ball
//!
//! ```text
//! G(x,y) = κ |x-y|^{2s-N} ∫_0^{r0} t^{s-1} (1+t)^{-N/2} dt,
//! r0 = (1-|x|²)(1-|y|²) / |x-y|²,   κ = Γ(N/2) / (4^s π^{N/2} Γ(s)²).
//! ```
//!
//! The incomplete integral is evaluated from a binomial series on whichever
//! side of r0 = 1 converges: the lower tail gives G directly, the upper
//! tail gives the regular part H = F - G. Both branches are free of
//! cancellation, so G is accurate near the boundary and H near the diagonal.
//! General balls follow by translation and scaling.

use crate::domain::{dist, BoundaryRule, Domain};
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::richardson::{extrapolate, trace_exponents, StepSchedule};
use crate::specfun::{fundamental_scale, gamma_real, FracParams, Regime};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Value and y-gradient of G_s(x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenEval {
    pub value: f64,
    pub grad_y: Vec<f64>,
    /// Set when x = y; value and gradient are then not meaningful.
    pub singular: bool,
}

/// Values of the fractional boundary trace (w/δ^s)|_{∂Ω} at boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceField {
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl TraceField {
    pub fn zeros(rule: &BoundaryRule) -> Self {
        TraceField { nodes: rule.nodes.clone(), values: vec![0.0; rule.len()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TraceMethod {
    Analytic,
    Extrapolated,
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Σ_k binom(-c, k) x^k / (a + k) and its x-derivative, for 0 ≤ x ≤ 1/2.
fn binomial_series(a: f64, c: f64, x: f64) -> (f64, f64) {
    let mut coef = 1.0;
    let mut xk = 1.0;
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        let term = coef * xk / (a + kf);
        sum += term;
        if k > 0 {
            dsum += kf * term / x;
        }
        if term.abs() < 1e-18 * sum.abs() && k > 2 {
            break;
        }
        coef *= (-c - kf) / (kf + 1.0);
        xk *= x;
        if xk == 0.0 {
            break;
        }
    }
    (sum, dsum)
}

/// ∫ v^{a-1} (1+v)^{-c} dv from 1/2 to x, for 1/2 ≤ x ≤ 1.
fn upper_piece(a: f64, c: f64, x: f64) -> f64 {
    gl20().integrate(0.5, x, |v| v.powf(a - 1.0) * (1.0 + v).powf(-c))
}

/// Green kernel of the unit ball in dimension N.
#[derive(Debug, Clone, Copy)]
struct UnitBallKernel {
    n: f64,
    s: f64,
    kappa: f64,
    /// Coefficient of the fundamental solution.
    b: f64,
    log: bool,
}

/// Value pieces in unit-ball coordinates: G, H = F - G.
#[derive(Debug, Clone, Copy)]
struct Split {
    g: f64,
    h: f64,
}

impl UnitBallKernel {
    fn new(p: &FracParams) -> Self {
        let n = p.dim() as f64;
        let s = p.s();
        let kappa = gamma_real(0.5 * n) / (4f64.powf(s) * PI.powf(0.5 * n) * gamma_real(s).powi(2));
        UnitBallKernel { n, s, kappa, b: fundamental_scale(p), log: p.regime() == Regime::LogCritical }
    }

    fn fundamental(&self, rho: f64) -> f64 {
        if self.log {
            -rho.ln() / PI
        } else {
            self.b * rho.powf(2.0 * self.s - self.n)
        }
    }

    fn a_upper(&self) -> f64 {
        0.5 * self.n - self.s
    }

    fn robin(&self, x: &[f64]) -> f64 {
        let q = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        if self.log {
            -(2.0 * q).ln() / PI
        } else {
            self.kappa * q.powf(2.0 * self.s - self.n) / self.a_upper()
        }
    }

    /// Both pieces for x ≠ y inside the unit ball.
    fn split(&self, x: &[f64], y: &[f64]) -> Split {
        let rho = dist(x, y);
        let qx = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        let qy = 1.0 - y.iter().map(|v| v * v).sum::<f64>();
        let ap = qx * qy;
        if self.log {
            // N = 1: 1 - xy - |x-y| = (1 - max)(1 + min)
            let (lo, hi) = if x[0] < y[0] { (x[0], y[0]) } else { (y[0], x[0]) };
            let g = ((ap.sqrt() + (1.0 - hi) * (1.0 + lo)) / rho).ln_1p() / PI;
            return Split { g, h: self.fundamental(rho) - g };
        }
        let (n, s) = (self.n, self.s);
        let r0 = ap / (rho * rho);
        if r0 <= 1.0 {
            let g = if r0 <= 0.5 {
                let (sum, _) = binomial_series(s, 0.5 * n, r0);
                self.kappa * rho.powf(-n) * ap.powf(s) * sum
            } else {
                let (sum, _) = binomial_series(s, 0.5 * n, 0.5);
                let p = 0.5f64.powf(s) * sum + upper_piece(s, 0.5 * n, r0);
                self.kappa * rho.powf(2.0 * s - n) * p
            };
            Split { g, h: self.fundamental(rho) - g }
        } else {
            let a = self.a_upper();
            let xi = 1.0 / r0;
            let h = if xi <= 0.5 {
                let (sum, _) = binomial_series(a, 0.5 * n, xi);
                self.kappa * ap.powf(-a) * sum
            } else {
                let (sum, _) = binomial_series(a, 0.5 * n, 0.5);
                let p = 0.5f64.powf(a) * sum + upper_piece(a, 0.5 * n, xi);
                self.kappa * rho.powf(2.0 * s - n) * p
            };
            Split { g: self.fundamental(rho) - h, h }
        }
    }

    /// (∇_y G, ∇_y H) for x ≠ y inside the unit ball, each computed on the
    /// side that avoids cancellation.
    fn grad_split(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dim = x.len();
        let rho = dist(x, y);
        let rho2 = rho * rho;
        let qx = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        let qy = 1.0 - y.iter().map(|v| v * v).sum::<f64>();
        let ap = qx * qy;
        let d: Vec<f64> = (0..dim).map(|i| y[i] - x[i]).collect();
        // ∂_y A' = -2 y (1 - |x|²)
        let dap: Vec<f64> = (0..dim).map(|i| -2.0 * y[i] * qx).collect();
        if self.log {
            let sx = qx.sqrt();
            let sy = qy.sqrt();
            let denom = sx * sy + 1.0 - x[0] * y[0];
            let dsqrt = -y[0] * sx / sy;
            let dh = -(dsqrt - x[0]) / denom / PI;
            let df = -d[0] / rho2 / PI;
            return (vec![df - dh], vec![dh]);
        }
        let (n, s) = (self.n, self.s);
        let r0 = ap / rho2;
        if r0 <= 1.0 {
            let g = self.split(x, y).g;
            let dphi = self.kappa * rho.powf(2.0 * s - n) * r0.powf(s - 1.0) * (1.0 + r0).powf(-0.5 * n);
            let df_coef = self.b * (2.0 * s - n) * rho.powf(2.0 * s - n - 2.0);
            let dg: Vec<f64> = (0..dim)
                .map(|i| {
                    let dr0 = (dap[i] * rho2 - ap * 2.0 * d[i]) / (rho2 * rho2);
                    (2.0 * s - n) * g * d[i] / rho2 + dphi * dr0
                })
                .collect();
            let dh = (0..dim).map(|i| df_coef * d[i] - dg[i]).collect();
            (dg, dh)
        } else {
            let a = self.a_upper();
            let xi = 1.0 / r0;
            let df_coef = self.b * (2.0 * s - n) * rho.powf(2.0 * s - n - 2.0);
            let dxi: Vec<f64> = (0..dim).map(|i| (2.0 * d[i] * ap - rho2 * dap[i]) / (ap * ap)).collect();
            let dh: Vec<f64> = if xi <= 0.5 {
                let (sum, dsum) = binomial_series(a, 0.5 * n, xi);
                let pa = ap.powf(-a);
                (0..dim)
                    .map(|i| self.kappa * (-a * pa / ap * dap[i] * sum + pa * dsum * dxi[i]))
                    .collect()
            } else {
                let (sum, _) = binomial_series(a, 0.5 * n, 0.5);
                let p = 0.5f64.powf(a) * sum + upper_piece(a, 0.5 * n, xi);
                let integrand = xi.powf(a - 1.0) * (1.0 + xi).powf(-0.5 * n);
                (0..dim)
                    .map(|i| {
                        self.kappa
                            * ((2.0 * s - n) * rho.powf(2.0 * s - n - 2.0) * d[i] * p
                                + rho.powf(2.0 * s - n) * integrand * dxi[i])
                    })
                    .collect()
            };
            ((0..dim).map(|i| df_coef * d[i] - dh[i]).collect(), dh)
        }
    }

    /// lim_{y→σ} G(x,y)/δ(y)^s on the unit sphere.
    fn trace(&self, x: &[f64], sigma: &[f64]) -> f64 {
        let qx = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        self.kappa * 2f64.powf(self.s) / self.s * qx.powf(self.s) * dist(x, sigma).powf(-self.n)
    }
}

/// Green function of a fixed (params, domain) pair.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    params: FracParams,
    domain: Domain,
    center: Vec<f64>,
    radius: f64,
    kernel: UnitBallKernel,
}

impl GreenFunction {
    pub fn new(params: FracParams, domain: Domain) -> Result<Self> {
        if params.dim() != domain.dim() {
            return Err(Error::Parameter(format!(
                "dimension mismatch: params N = {}, domain N = {}",
                params.dim(),
                domain.dim()
            )));
        }
        let (center, radius) = domain.center_radius();
        Ok(GreenFunction { kernel: UnitBallKernel::new(&params), params, domain, center, radius })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(v, c)| (v - c) / self.radius).collect()
    }

    fn value_scale(&self) -> f64 {
        self.radius.powf(2.0 * self.params.s() - self.params.dim() as f64)
    }

    /// Shift of H under scaling in the logarithmic regime.
    fn log_shift(&self) -> f64 {
        if self.kernel.log {
            -self.radius.ln() / PI
        } else {
            0.0
        }
    }

    pub fn fundamental(&self, x: &[f64], y: &[f64]) -> f64 {
        self.kernel.fundamental(dist(x, y))
    }

    /// G_s(x, y) with its y-gradient. Exterior points give zero.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> GreenEval {
        let dim = x.len();
        if !self.domain.contains(x) || !self.domain.contains(y) {
            return GreenEval { value: 0.0, grad_y: vec![0.0; dim], singular: false };
        }
        if x == y {
            return GreenEval { value: f64::INFINITY, grad_y: vec![0.0; dim], singular: true };
        }
        let (ux, uy) = (self.to_unit(x), self.to_unit(y));
        let scale = self.value_scale();
        let g = self.kernel.split(&ux, &uy).g * scale;
        let grad = self.kernel.grad_split(&ux, &uy).0.into_iter().map(|v| v * scale / self.radius).collect();
        GreenEval { value: g, grad_y: grad, singular: false }
    }

    /// G_s(x, y) alone; zero outside, +∞ on the diagonal.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        if !self.domain.contains(x) || !self.domain.contains(y) {
            return 0.0;
        }
        if x == y {
            return f64::INFINITY;
        }
        self.kernel.split(&self.to_unit(x), &self.to_unit(y)).g * self.value_scale()
    }

    /// (G, H) at an interior pair; H(x,x) is the Robin value.
    pub fn value_and_regular(&self, x: &[f64], y: &[f64]) -> (f64, f64) {
        if x == y {
            return (f64::INFINITY, self.robin(x));
        }
        let sp = self.kernel.split(&self.to_unit(x), &self.to_unit(y));
        let scale = self.value_scale();
        (sp.g * scale, sp.h * scale + self.log_shift())
    }

    /// H_Ω(x, y) = F_s(x, y) - G_s(x, y), continuous across x = y. Outside
    /// the domain G vanishes and H equals F.
    pub fn regular_part(&self, x: &[f64], y: &[f64]) -> f64 {
        if !self.domain.contains(x) || !self.domain.contains(y) {
            return self.fundamental(x, y);
        }
        self.value_and_regular(x, y).1
    }

    pub fn robin(&self, x: &[f64]) -> f64 {
        self.kernel.robin(&self.to_unit(x)) * self.value_scale() + self.log_shift()
    }

    /// ∇_y H_Ω(x, y) at an interior pair with x ≠ y.
    pub fn regular_grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let scale = self.value_scale() / self.radius;
        self.kernel.grad_split(&self.to_unit(x), &self.to_unit(y)).1.into_iter().map(|v| v * scale).collect()
    }

    /// ∂/∂x_i of G_s(y, x).
    pub fn grad_x(&self, x: &[f64], y: &[f64], i: usize) -> Result<f64> {
        if x == y {
            return Err(Error::Singular("gradient on the diagonal".into()));
        }
        Ok(self.eval(y, x).grad_y[i])
    }

    /// Analytic lim_{y→σ} G(x,y)/δ(y)^s.
    pub fn trace_at(&self, x: &[f64], sigma: &[f64]) -> f64 {
        let scale = self.radius.powf(self.params.s() - self.params.dim() as f64);
        self.kernel.trace(&self.to_unit(x), &self.to_unit(sigma)) * scale
    }

    /// The same limit by Richardson extrapolation along the inward normal.
    pub fn trace_extrapolated(&self, x: &[f64], sigma: &[f64], normal: &[f64]) -> Result<f64> {
        let s = self.params.s();
        let schedule = StepSchedule { first: 1e-2 * self.radius, levels: 9 };
        let phi = |d: f64| {
            let y: Vec<f64> = sigma.iter().zip(normal).map(|(p, n)| p - d * n).collect();
            self.value(x, &y) / self.domain.signed_distance(&y).powf(s)
        };
        extrapolate(phi, schedule, &trace_exponents(s, &[]), 1e-7).map(|e| e.value)
    }

    pub fn trace(&self, x: &[f64], rule: &BoundaryRule, method: TraceMethod) -> Result<TraceField> {
        if !self.domain.contains(x) {
            return Err(Error::Parameter(format!("trace source point {x:?} is not interior")));
        }
        let values = rule
            .nodes
            .iter()
            .zip(&rule.normals)
            .map(|(sigma, nu)| match method {
                TraceMethod::Analytic => Ok(self.trace_at(x, sigma)),
                TraceMethod::Extrapolated => self.trace_extrapolated(x, sigma, nu),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceField { nodes: rule.nodes.clone(), values })
    }
}

fn check_pair(d: &Domain, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != d.dim() || y.len() != d.dim() {
        return Err(Error::Parameter("point dimension does not match the domain".into()));
    }
    Ok(())
}

/// G_s(x,y) with y-gradient; exterior points yield zeros and x = y sets the
/// singular flag.
pub fn green_value(p: &FracParams, d: &Domain, x: &[f64], y: &[f64]) -> Result<GreenEval> {
    check_pair(d, x, y)?;
    Ok(GreenFunction::new(*p, d.clone())?.eval(x, y))
}

pub fn regular_part(p: &FracParams, d: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(d, x, y)?;
    Ok(GreenFunction::new(*p, d.clone())?.regular_part(x, y))
}

pub fn robin(p: &FracParams, d: &Domain, x: &[f64]) -> Result<f64> {
    check_pair(d, x, x)?;
    if !d.contains(x) {
        return Err(Error::Parameter("Robin function is defined inside the domain only".into()));
    }
    Ok(GreenFunction::new(*p, d.clone())?.robin(x))
}

pub fn green_trace(
    p: &FracParams,
    d: &Domain,
    x: &[f64],
    rule: &BoundaryRule,
    method: TraceMethod,
) -> Result<TraceField> {
    check_pair(d, x, x)?;
    GreenFunction::new(*p, d.clone())?.trace(x, rule, method)
}

pub fn grad_green_x(p: &FracParams, d: &Domain, x: &[f64], y: &[f64], i: usize) -> Result<f64> {
    check_pair(d, x, y)?;
    if i >= d.dim() {
        return Err(Error::Parameter(format!("axis {i} out of range")));
    }
    GreenFunction::new(*p, d.clone())?.grad_x(x, y, i)
}

/// Fourth-order central difference of a scalar function along axis `i`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    let shifted = |t: f64| {
        let mut p = x.to_vec();
        p[i] += t;
        f(&p)
    };
    (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h)
}
