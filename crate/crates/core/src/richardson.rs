//! Richardson extrapolation of boundary limits on geometric step schedules.

use crate::error::{Error, Result};

/// Steps δ_k = first · 2^{-k}, k = 0..levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub first: f64,
    pub levels: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule { first: 1e-2, levels: 9 }
    }
}

impl StepSchedule {
    pub fn steps(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.first * 0.5f64.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub error: f64,
    /// Raw samples φ(δ_k).
    pub samples: Vec<f64>,
}

/// Correction exponents for w/δ^s along the inward normal: the leading
/// `min(1, 2-2s)` followed by integer powers, plus any extra exponents.
pub fn trace_exponents(s: f64, extra: &[f64]) -> Vec<f64> {
    let mut e = vec![(2.0 - 2.0 * s).min(1.0), 1.0, 2.0, 3.0];
    e.extend_from_slice(extra);
    e.retain(|p| *p > 0.0 && *p <= 3.0);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    e
}

/// Extrapolate lim_{δ→0} φ(δ) assuming φ(δ) = L + Σ_j c_j δ^{p_j} + ...,
/// eliminating the given exponents in order.
pub fn extrapolate<F: FnMut(f64) -> f64>(
    mut phi: F,
    schedule: StepSchedule,
    exponents: &[f64],
    tol: f64,
) -> Result<Extrapolation> {
    let steps = schedule.steps();
    if steps.len() < 2 {
        return Err(Error::Parameter("extrapolation needs at least two steps".into()));
    }
    let samples: Vec<f64> = steps.iter().map(|&d| phi(d)).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite samples in extrapolation: {samples:?}")));
    }
    let depth = exponents.len().min(samples.len() - 1);
    // column j holds estimates with the first j exponents eliminated
    let mut column = samples.clone();
    let mut diagonal = vec![samples[samples.len() - 1]];
    for p in &exponents[..depth] {
        let r = 2f64.powf(*p);
        column = column.windows(2).map(|w| (r * w[1] - w[0]) / (r - 1.0)).collect();
        diagonal.push(*column.last().unwrap());
    }
    let value = diagonal[diagonal.len() - 1];
    let error = (diagonal[diagonal.len() - 1] - diagonal[diagonal.len() - 2]).abs();
    if error > tol * value.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "extrapolation did not settle: estimate {value:.10e}, change {error:.3e}, samples {samples:?}"
        )));
    }
    Ok(Extrapolation { value, error, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_limit_of_mixed_powers() {
        let f = |d: f64| 2.0 + 0.3 * d.powf(0.5) - 1.2 * d + 4.0 * d * d;
        let e = extrapolate(f, StepSchedule::default(), &trace_exponents(0.75, &[]), 1e-8).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn reports_non_convergence() {
        let f = |d: f64| (1.0 / d).sin();
        let r = extrapolate(f, StepSchedule::default(), &[1.0, 2.0], 1e-8);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn exponent_sets() {
        assert_eq!(trace_exponents(0.25, &[]), vec![1.0, 2.0, 3.0]);
        assert_eq!(trace_exponents(0.75, &[]), vec![0.5, 1.0, 2.0, 3.0]);
        assert_eq!(trace_exponents(0.5, &[0.5, 1.0]), vec![0.5, 1.0, 2.0, 3.0]);
    }
}
