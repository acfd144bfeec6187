//! Special functions used by the bounds and templates.
//!
//! Everything goes through `libm`, so results are bit-identical across
//! platforms and available without `std`.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln k!`. Small arguments are summed directly.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else if k <= 64 {
        (2..=k).map(|i| libm::log(i as f64)).sum()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// `ln binom(a, b)`; `-inf` when `b > a`.
pub fn ln_binomial(a: u64, b: u64) -> f64 {
    if b > a {
        return f64::NEG_INFINITY;
    }
    ln_factorial(a) - ln_factorial(b) - ln_factorial(a - b)
}

/// `erf` by Abramowitz & Stegun 7.1.26, absolute error below `1.5e-7`.
pub fn erf_approx(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [
        0.254_829_592,
        -0.284_496_736,
        1.421_413_741,
        -1.453_152_027,
        1.061_405_429,
    ];
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = libm::fabs(x);
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    sign * (1.0 - poly * libm::exp(-x * x))
}

/// Standard normal cdf built on [`erf_approx`]; absolute error `<= 7.5e-8`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf_approx(x * FRAC_1_SQRT_2))
}

pub(crate) fn sqrt_two_pi() -> f64 {
    libm::sqrt(2.0 * PI)
}

/// Regularized incomplete beta `I_x(a, b)`.
///
/// Continued fraction with the modified Lentz iteration; the argument is
/// reflected through `I_x(a,b) = 1 - I_{1-x}(b,a)` whenever `x` lies past
/// the mean so the fraction converges fast.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Quantile of `Beta(a, b)` at level `q`, by bisection on [`incomplete_beta`].
///
/// Stops once the bracket is narrower than `1e-14`, well inside the `1e-9`
/// absolute accuracy the templates need.
pub fn beta_quantile(q: f64, a: f64, b: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if incomplete_beta(mid, a, b) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}
