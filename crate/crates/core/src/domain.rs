//! Admissible domains: intervals and N-balls.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "camelCase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Boundary nodes with surface weights and outward normals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
}

impl BoundaryRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        crate::quad::compensated_sum(self.weights.iter().copied())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Parameter("ball center must have at least one coordinate".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Parameter(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Domain::Ball { center: vec![0.0; dim], radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Center and radius; an interval is the 1-ball around its midpoint.
    pub fn center_radius(&self) -> (Vec<f64>, f64) {
        match self {
            Domain::Interval { a, b } => (vec![0.5 * (a + b)], 0.5 * (b - a)),
            Domain::Ball { center, radius } => (center.clone(), *radius),
        }
    }

    /// Positive inside, negative outside, zero on the boundary.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Ball { center, radius } => radius - dist(x, center),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Distance t ≥ 0 at which the ray x + t·dir leaves the domain, for x
    /// inside and a unit direction.
    pub fn exit_distance(&self, x: &[f64], dir: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => {
                if dir[0] > 0.0 {
                    (b - x[0]) / dir[0]
                } else {
                    (a - x[0]) / dir[0]
                }
            }
            Domain::Ball { center, radius } => {
                let rel: Vec<f64> = x.iter().zip(center).map(|(x, c)| x - c).collect();
                let b: f64 = rel.iter().zip(dir).map(|(r, d)| r * d).sum();
                let c = rel.iter().map(|r| r * r).sum::<f64>() - radius * radius;
                let root = (b * b - c).max(0.0).sqrt();
                let t = if b > 0.0 { -c / (b + root) } else { root - b };
                t.max(0.0)
            }
        }
    }

    pub fn outward_normal(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        let d = self.signed_distance(sigma);
        let (c, r) = self.center_radius();
        if d.abs() > 1e-12 * r.max(1.0) {
            return Err(Error::Geometry(format!("point {sigma:?} is not on the boundary")));
        }
        let diff: Vec<f64> = sigma.iter().zip(&c).map(|(x, c)| x - c).collect();
        let n = norm(&diff);
        Ok(diff.iter().map(|v| v / n).collect())
    }

    /// Quadrature for the surface measure of the boundary.
    pub fn boundary_rule(&self, order: usize) -> Result<BoundaryRule> {
        if order == 0 {
            return Err(Error::Parameter("boundary rule order must be positive".into()));
        }
        let (c, r) = self.center_radius();
        let unit = unit_sphere_rule(self.dim(), order)?;
        let scale = r.powi(self.dim() as i32 - 1);
        Ok(BoundaryRule {
            nodes: unit
                .nodes
                .iter()
                .map(|n| n.iter().zip(&c).map(|(v, c)| c + r * v).collect())
                .collect(),
            weights: unit.weights.iter().map(|w| w * scale).collect(),
            normals: unit.normals,
        })
    }

    /// Cell-centered points of a uniform tensor grid with spacing `h` lying
    /// strictly inside the domain. The grid is centered on the domain.
    pub fn interior_grid(&self, h: f64) -> Result<Vec<Vec<f64>>> {
        let (c, r) = self.center_radius();
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Parameter(format!("mesh size must be positive, got {h}")));
        }
        let cells = ((2.0 * r) / h + 1e-9).floor() as usize;
        if cells == 0 {
            return Err(Error::Parameter(format!("mesh size {h} exceeds the domain extent")));
        }
        let offset = 0.5 * (2.0 * r - cells as f64 * h);
        let axis: Vec<f64> = (0..cells).map(|k| -r + offset + (k as f64 + 0.5) * h).collect();
        let dim = self.dim();
        let mut out = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let p: Vec<f64> = idx.iter().zip(&c).map(|(&i, c)| c + axis[i]).collect();
            if self.contains(&p) {
                out.push(p);
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] < cells {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// Rule on the unit sphere S^{N-1} (N = 1, 2, 3).
pub fn unit_sphere_rule(dim: usize, order: usize) -> Result<BoundaryRule> {
    match dim {
        1 => Ok(BoundaryRule {
            nodes: vec![vec![-1.0], vec![1.0]],
            weights: vec![1.0, 1.0],
            normals: vec![vec![-1.0], vec![1.0]],
        }),
        2 => {
            let w = 2.0 * PI / order as f64;
            let nodes: Vec<Vec<f64>> = (0..order)
                .map(|k| {
                    let t = w * k as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            Ok(BoundaryRule { normals: nodes.clone(), nodes, weights: vec![w; order] })
        }
        3 => {
            // Gauss–Legendre in cos(polar angle), trapezoid in azimuth.
            let n_polar = order.div_ceil(2).max(1);
            let n_azi = order.max(1);
            let (zs, wz) = gauss_legendre(n_polar);
            let dphi = 2.0 * PI / n_azi as f64;
            let mut nodes = Vec::with_capacity(n_polar * n_azi);
            let mut weights = Vec::with_capacity(n_polar * n_azi);
            for (z, wzi) in zs.iter().zip(&wz) {
                let rho = (1.0 - z * z).sqrt();
                for k in 0..n_azi {
                    let phi = dphi * k as f64;
                    nodes.push(vec![rho * phi.cos(), rho * phi.sin(), *z]);
                    weights.push(wzi * dphi);
                }
            }
            Ok(BoundaryRule { normals: nodes.clone(), nodes, weights })
        }
        n => Err(Error::Capability(format!("no boundary rule for dimension {n}"))),
    }
}
