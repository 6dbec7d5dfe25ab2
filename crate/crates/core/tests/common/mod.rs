use fraclap::greenfn::GreenFunction;
use fraclap::quad::tanh_sinh;
use fraclap::specfun::{fundamental, Regime};
use std::f64::consts::PI;

/// ∫ G(x,z) f(z) dz on (-1, 1): the fundamental-solution part of G against
/// f(x) in closed form, everything else by tanh-sinh.
#[allow(dead_code)]
pub fn green_convolution_oracle(g: &GreenFunction, f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let p = *g.params();
    let s = p.s();
    let singular = |len: f64| {
        if p.regime() == Regime::LogCritical {
            -(len * len.ln() - len) / PI
        } else {
            fundamental(&p, 1.0).unwrap() * len.powf(2.0 * s) / (2.0 * s)
        }
    };
    let fx = f(x);
    let rest = |z: f64| {
        if z == x {
            return -g.robin(&[x]) * fx;
        }
        g.value(&[x], &[z]) * (f(z) - fx) - g.regular_part(&[x], &[z]) * fx
    };
    let r = tanh_sinh(rest, -1.0, x, 1e-14).value + tanh_sinh(rest, x, 1.0, 1e-14).value;
    fx * (singular(1.0 + x) + singular(1.0 - x)) + r
}

