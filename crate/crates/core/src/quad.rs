//! Quadrature rules: Gauss–Legendre, double-exponential (tanh-sinh) and
//! adaptive Gauss–Kronrod, plus compensated summation.

use rayon::prelude::*;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};

/// Neumaier-compensated accumulator. Summation order is the call order, so
/// results are reproducible for a fixed sequence of terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Fixed Gauss–Legendre rule mapped onto [a, b].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        compensated_sum(self.mapped(a, b).map(|(x, w)| w * f(x)))
    }
}

/// Abscissa offsets and weights of the tanh-sinh rule on [-1, 1] at step
/// `h`, stored as (distance from the nearer endpoint, weight), one side only.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    /// Step of the finest level.
    level: u32,
    center_weight: f64,
    /// Per node: (1 - |x|, weight), for t = k h, k >= 1.
    tail: Vec<(f64, f64)>,
}

const TS_TMAX: f64 = 4.0;

impl TanhSinh {
    /// Rule with step 2^{-level}.
    pub fn new(level: u32) -> Self {
        let h = 0.5f64.powi(level as i32);
        let center_weight = h * FRAC_PI_2;
        let mut tail = Vec::new();
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > TS_TMAX {
                break;
            }
            let u = FRAC_PI_2 * t.sinh();
            let e = (-2.0 * u).exp();
            // 1 - tanh(u) = 2 e^{-2u} / (1 + e^{-2u})
            let comp = 2.0 * e / (1.0 + e);
            let cu = u.cosh();
            let w = h * FRAC_PI_2 * t.cosh() / (cu * cu);
            if w < 1e-300 || comp == 0.0 {
                break;
            }
            tail.push((comp, w));
            k += 1;
        }
        TanhSinh { level, center_weight, tail }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Visit nodes of the rule mapped to [a, b] as (x, weight). Points that
    /// round onto an endpoint are skipped.
    pub fn for_each_node<F: FnMut(f64, f64)>(&self, a: f64, b: f64, mut visit: F) {
        let half = 0.5 * (b - a);
        let mid = a + half;
        visit(mid, half * self.center_weight);
        for &(comp, w) in &self.tail {
            let d = half * comp;
            let xl = a + d;
            if xl > a && xl < b {
                visit(xl, half * w);
            }
            let xr = b - d;
            if xr < b && xr > a {
                visit(xr, half * w);
            }
        }
    }

    /// Evaluate the rule on [a, b] with compensated summation.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        self.for_each_node(a, b, |x, w| acc.add(w * f(x)));
        acc.value()
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Adaptive tanh-sinh on [a, b]: levels are refined until two successive
/// estimates agree to `tol` (absolute or relative to the value).
pub fn tanh_sinh<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    tanh_sinh_levels(f, a, b, tol, 3, 10)
}

pub fn tanh_sinh_levels<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    min_level: u32,
    max_level: u32,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evaluations: 0, converged: true };
    }
    let mut prev = f64::NAN;
    let mut evaluations = 0;
    let mut last = QuadResult { value: f64::NAN, error: f64::INFINITY, evaluations: 0, converged: false };
    for level in min_level..=max_level {
        let rule = TanhSinh::new(level);
        let mut acc = CompensatedSum::new();
        rule.for_each_node(a, b, |x, w| {
            evaluations += 1;
            acc.add(w * f(x));
        });
        let value = acc.value();
        let error = (value - prev).abs();
        last = QuadResult { value, error, evaluations, converged: false };
        if level > min_level && (error <= tol || error <= tol * value.abs()) {
            last.converged = true;
            return last;
        }
        prev = value;
    }
    last
}

/// As [`tanh_sinh_levels`] for expensive integrands: nodes shared with
/// coarser levels are reused and new nodes are evaluated in parallel. The sum
/// runs in node order, so the result does not depend on scheduling.
pub fn tanh_sinh_par<F: Fn(f64) -> f64 + Sync>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    min_level: u32,
    max_level: u32,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evaluations: 0, converged: true };
    }
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut prev = f64::NAN;
    let mut level = min_level;
    loop {
        let mut nodes = Vec::new();
        TanhSinh::new(level).for_each_node(a, b, |x, w| nodes.push((x, w)));
        let fresh: Vec<f64> = nodes.iter().map(|n| n.0).filter(|x| !cache.contains_key(&x.to_bits())).collect();
        let values: Vec<f64> = fresh.par_iter().map(|&x| f(x)).collect();
        cache.extend(fresh.iter().map(|x| x.to_bits()).zip(values));
        let value = compensated_sum(nodes.iter().map(|(x, w)| w * cache[&x.to_bits()]));
        let error = (value - prev).abs();
        let converged = level > min_level && (error <= tol || error <= tol * value.abs());
        if converged || level >= max_level {
            return QuadResult { value, error, evaluations: cache.len(), converged };
        }
        prev = value;
        level += 1;
    }
}

/// Tanh-sinh over consecutive breakpoints.
pub fn tanh_sinh_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64) -> QuadResult {
    let mut out = QuadResult { value: 0.0, error: 0.0, evaluations: 0, converged: true };
    let mut acc = CompensatedSum::new();
    for pair in breaks.windows(2) {
        if pair[1] <= pair[0] {
            continue;
        }
        let r = tanh_sinh(&mut f, pair[0], pair[1], tol);
        acc.add(r.value);
        out.error += r.error;
        out.evaluations += r.evaluations;
        out.converged &= r.converged;
    }
    out.value = acc.value();
    out
}

/// Sorted, de-duplicated breakpoints restricted to [lo, hi].
pub fn breakpoints(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v = vec![lo, hi];
    v.extend(interior.into_iter().filter(|&x| x > lo && x < hi));
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    v
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) with bisection of the segment
/// carrying the largest error estimate. Stops at `abs_tol` or when
/// `max_evals` integrand evaluations have been spent.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_evals: usize,
) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    heap.push(Segment { a, b, value: v, error: e });
    let mut total_err = e;
    while total_err > abs_tol && evaluations + 30 <= max_evals {
        let seg = heap.pop().unwrap();
        let m = 0.5 * (seg.a + seg.b);
        if m <= seg.a || m >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&mut f, seg.a, m);
        let (v2, e2) = gk15(&mut f, m, seg.b);
        evaluations += 30;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: seg.b, value: v2, error: e2 });
    }
    let mut segs = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = compensated_sum(segs.iter().map(|s| s.value));
    let error = segs.iter().map(|s| s.error).sum::<f64>();
    QuadResult { value, error, evaluations, converged: error <= abs_tol }
}
