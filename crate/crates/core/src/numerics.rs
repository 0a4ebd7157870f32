//! Scalar numerical kernels: Gaussian tail, adaptive Gauss–Kronrod quadrature
//! and bracketed bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use libm::erfc;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal tail probability `Q(x) = P(N(0,1) > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `exp(x²/2)·Q(x)`, finite for arbitrarily large positive `x`.
///
/// Above `x = 6` the product is evaluated from the Mills-ratio continued
/// fraction `Q(x)·exp(x²/2)·√(2π) = 1/(x + 1/(x + 2/(x + 3/(x + …))))`.
pub fn scaled_gaussian_tail(x: f64) -> f64 {
    if x <= 6.0 {
        return (0.5 * x * x).exp() * gaussian_tail(x);
    }
    // Backward evaluation; 120 terms is far past convergence for x > 6.
    let mut tail = x;
    for k in (1..=120).rev() {
        tail = x + k as f64 / tail;
    }
    FRAC_1_SQRT_2PI / tail
}

/// Result of a definite integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
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
// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quadrature {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Quadrature {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct Segment {
    a: f64,
    b: f64,
    estimate: Quadrature,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.estimate.error == other.estimate.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.estimate.error.total_cmp(&other.estimate.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over the
/// consecutive intervals defined by `breakpoints` (at least two, increasing).
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Quadrature> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("quadrature breakpoints must be strictly increasing".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        heap.push(Segment { a: w[0], b: w[1], estimate: gauss_kronrod_15(&f, w[0], w[1]) });
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.estimate.value, e + s.estimate.error));
        if !value.is_finite() {
            return Err(Error::QuadratureNonConvergence { estimate: value, error });
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature { value, error });
        }
        if heap.len() >= max_segments {
            return Err(Error::QuadratureNonConvergence { estimate: value, error });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNonConvergence { estimate: value, error });
        }
        heap.push(Segment { a: worst.a, b: mid, estimate: gauss_kronrod_15(&f, worst.a, mid) });
        heap.push(Segment { a: mid, b: worst.b, estimate: gauss_kronrod_15(&f, mid, worst.b) });
    }
}

/// Bisection for a root of `f` on `[lo, hi]`, where `f(lo)` and `f(hi)` have
/// opposite signs (or one is zero). Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, abs_tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootNotBracketed { upper: hi });
    }
    while hi - lo > abs_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Neumaier-compensated sum; order-dependent only at the last ulp.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
