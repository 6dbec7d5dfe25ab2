//! Gamma function, normalization constants and the fundamental solution.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function on the real line, excluding the poles at non-positive
/// integers. Lanczos approximation (g = 7, 9 terms) with reflection below 1/2.
pub(crate) fn gamma_real(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_real(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires a positive argument, got {x}")));
    }
    Ok(gamma_real(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Regime {
    /// N > 2s: the fundamental solution is a negative power of the distance.
    Subcritical,
    /// N = 2s = 1: logarithmic fundamental solution.
    LogCritical,
    /// N = 1, s > 1/2: the fundamental solution grows like r^{2s-1}.
    SuperharmonicLine,
}

/// Dimension and order of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    dim: usize,
    s: f64,
}

impl FracParams {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("order s must lie in (0,1), got {s}")));
        }
        Ok(FracParams { dim, s })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn regime(&self) -> Regime {
        let n = self.dim as f64;
        if n > 2.0 * self.s {
            Regime::Subcritical
        } else if n == 2.0 * self.s {
            Regime::LogCritical
        } else {
            Regime::SuperharmonicLine
        }
    }

    pub fn constants(&self) -> ConstantSet {
        ConstantSet {
            c_ns: c_const(self),
            b_ns: fundamental_scale(self),
            gamma_sq: gamma_real(1.0 + self.s).powi(2),
            torsion_scale: torsion_scale(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstantSet {
    pub c_ns: f64,
    /// Coefficient of the fundamental solution; `-1/π` in the logarithmic
    /// regime and negative on the superharmonic line.
    pub b_ns: f64,
    pub gamma_sq: f64,
    pub torsion_scale: f64,
}

/// Normalization constant of the singular integral, chosen so that the
/// operator has Fourier symbol |ξ|^{2s}.
pub fn c_const(p: &FracParams) -> f64 {
    let (n, s) = (p.dim as f64, p.s);
    s * 4f64.powf(s) * gamma_real(0.5 * n + s) / (PI.powf(0.5 * n) * gamma_real(1.0 - s))
}

/// Riesz-kernel constant, defined for N > 2s only.
pub fn b_const(p: &FracParams) -> Result<f64> {
    match p.regime() {
        Regime::Subcritical => Ok(fundamental_scale(p)),
        r => Err(Error::Regime(format!(
            "b_(N,s) needs N > 2s (N = {}, s = {}, regime {r:?})",
            p.dim, p.s
        ))),
    }
}

/// Coefficient multiplying the radial profile of the fundamental solution.
/// Off the subcritical regime the Riesz constant is continued analytically
/// (N = 1, s > 1/2) or replaced by the logarithmic coefficient -1/π.
pub(crate) fn fundamental_scale(p: &FracParams) -> f64 {
    let (n, s) = (p.dim as f64, p.s);
    match p.regime() {
        Regime::LogCritical => -1.0 / PI,
        _ => PI.powf(-0.5 * n) * 4f64.powf(-s) * gamma_real(0.5 * n - s) / gamma_real(s),
    }
}

/// Fundamental solution as a function of the distance r > 0.
pub fn fundamental(p: &FracParams, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Singular(format!("fundamental solution at r = {r}")));
    }
    Ok(fundamental_unchecked(p, r))
}

pub(crate) fn fundamental_unchecked(p: &FracParams, r: f64) -> f64 {
    match p.regime() {
        Regime::LogCritical => -r.ln() / PI,
        _ => fundamental_scale(p) * r.powf(2.0 * p.s - p.dim as f64),
    }
}

/// Constant γ such that γ (R² - |x|²)_+^s solves (-Δ)^s u = 1 on the ball B_R.
pub fn torsion_scale(p: &FracParams) -> f64 {
    let (n, s) = (p.dim as f64, p.s);
    gamma_real(0.5 * n) / (4f64.powf(s) * gamma_real(0.5 * n + s) * gamma_real(1.0 + s))
}

/// Surface area of the unit sphere S^{N-1}.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(0.5 * n) / gamma_real(0.5 * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_known_values() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(0.5).unwrap() - PI.sqrt()).abs() < 1e-13);
        assert!((gamma_fn(1.5).unwrap() - 0.5 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma_fn(5.0).unwrap() - 24.0).abs() < 1e-11);
        assert!(matches!(gamma_fn(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma_fn(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.1..10.0);
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(((lhs - rhs) / lhs).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn gamma_negative_half_integers() {
        // Γ(-1/2) = -2√π
        assert!((gamma_real(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalization_constant_values() {
        let c = c_const(&FracParams::new(1, 0.5).unwrap());
        assert!((c - 1.0 / PI).abs() < 1e-14);
        let c2 = c_const(&FracParams::new(2, 0.5).unwrap());
        assert!((c2 - 0.5 / PI).abs() < 1e-14);
        // c_(1,s) ~ 2(1 - s) as s → 1
        for s in [0.99, 0.999, 0.9999] {
            let c = c_const(&FracParams::new(1, s).unwrap());
            assert!((c / (1.0 - s) - 2.0).abs() < 5.0 * (1.0 - s), "{s}: {c}");
        }
    }

    #[test]
    fn riesz_constant_values() {
        let b = b_const(&FracParams::new(1, 0.25).unwrap()).unwrap();
        assert!((b - 0.398_942_280_401_432_7).abs() < 1e-12);
        let b3 = b_const(&FracParams::new(3, 0.5).unwrap()).unwrap();
        assert!((b3 - 1.0 / (2.0 * PI * PI)).abs() < 1e-14);
        assert!(matches!(
            b_const(&FracParams::new(1, 0.5).unwrap()),
            Err(Error::Regime(_))
        ));
        assert!(b_const(&FracParams::new(1, 0.75).unwrap()).is_err());
    }

    #[test]
    fn fundamental_values() {
        let p = FracParams::new(1, 0.5).unwrap();
        assert_eq!(fundamental(&p, 1.0).unwrap(), 0.0);
        let p = FracParams::new(1, 0.25).unwrap();
        assert!((fundamental(&p, 0.5).unwrap() - 0.564_189_583_547_756_3).abs() < 1e-12);
        let p = FracParams::new(3, 0.5).unwrap();
        assert!((fundamental(&p, 2.0).unwrap() - 1.0 / (8.0 * PI * PI)).abs() < 1e-14);
        assert!(matches!(fundamental(&p, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn fundamental_decreasing_in_every_regime() {
        for (n, s) in [(1, 0.25), (1, 0.5), (1, 0.75), (2, 0.3), (3, 0.9)] {
            let p = FracParams::new(n, s).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..200 {
                let r = 0.01 * k as f64;
                let v = fundamental(&p, r).unwrap();
                assert!(v < prev, "N={n} s={s} r={r}");
                prev = v;
            }
        }
    }

    #[test]
    fn constants_continuous_in_s() {
        for n in [1usize, 2, 3] {
            let top = (0.5 * n as f64).min(1.0) - 0.05;
            let mut s = 0.05;
            while s + 1e-3 < top {
                let a = FracParams::new(n, s).unwrap();
                let b = FracParams::new(n, s + 1e-6).unwrap();
                let (ca, cb) = (c_const(&a), c_const(&b));
                let (ba, bb) = (b_const(&a).unwrap(), b_const(&b).unwrap());
                assert!(((ca - cb) / ca).abs() < 1e-4);
                assert!(((ba - bb) / ba).abs() < 1e-4);
                s += 0.01;
            }
        }
    }

    #[test]
    fn constant_set_consistency() {
        let p = FracParams::new(2, 0.3).unwrap();
        let k = p.constants();
        assert!(k.c_ns > 0.0 && k.b_ns > 0.0 && k.gamma_sq > 0.0 && k.torsion_scale > 0.0);
        assert!((k.gamma_sq - gamma_real(1.3) * gamma_real(1.3)).abs() < 1e-15);
        assert!((torsion_scale(&FracParams::new(1, 0.5).unwrap()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn regimes() {
        assert_eq!(FracParams::new(1, 0.3).unwrap().regime(), Regime::Subcritical);
        assert_eq!(FracParams::new(1, 0.5).unwrap().regime(), Regime::LogCritical);
        assert_eq!(FracParams::new(1, 0.7).unwrap().regime(), Regime::SuperharmonicLine);
        assert_eq!(FracParams::new(2, 0.7).unwrap().regime(), Regime::Subcritical);
        assert!(FracParams::new(0, 0.5).is_err());
        assert!(FracParams::new(1, 1.0).is_err());
    }
}
