//! DKW-type envelopes for the empirical distribution function of
//! conformal p-values.
//!
//! With `tau = n m / (n + m)`,
//!
//! ```text
//! P( sup_t (F_m(t) - I_n(t)) > lambda )
//!     <= 1{lambda < 1} [1 + 2 sqrt(2 pi) lambda tau / sqrt(n+m)] exp(-2 tau lambda^2)
//! ```
//!
//! and `lambda_dkw = Psi^(r)(1)` makes the right-hand side at most `delta`.

use alloc::vec::Vec;

use num_rational::Ratio;

use crate::error::{check_open_unit, Error, Result};
use crate::grid::discretized_identity;
use crate::polya::{urn_draw, PolyaLaw};
use crate::rng;
use crate::scores::{ecdf, sup_deviation, PValueSet};
use crate::special::{normal_cdf, sqrt_two_pi};

/// Default number of `Psi` iterations.
pub const DEFAULT_ITERATIONS: u32 = 3;

/// Smallest replicate count accepted by the Monte-Carlo quantiles.
pub const MIN_REPLICATES: usize = 1000;

/// Sizes, confidence and iteration count for the analytic threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkwParams {
    n: usize,
    m: usize,
    delta: f64,
    iterations: u32,
}

impl DkwParams {
    pub fn new(n: usize, m: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyCalibration);
        }
        if m == 0 {
            return Err(Error::EmptyTest);
        }
        check_open_unit("delta", delta)?;
        Ok(Self {
            n,
            m,
            delta,
            iterations: DEFAULT_ITERATIONS,
        })
    }

    pub fn with_iterations(mut self, iterations: u32) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidConfig(
                "at least one Psi iteration is needed".into(),
            ));
        }
        self.iterations = iterations;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    /// Effective sample size `n m / (n + m)`.
    pub fn tau(&self) -> f64 {
        tau(self.n, self.m)
    }
}

pub fn tau(n: usize, m: usize) -> f64 {
    (n as f64 * m as f64) / (n + m) as f64
}

/// Tail bound `B^DKW(lambda, n, m)`.
pub fn b_dkw(lambda: f64, n: usize, m: usize) -> f64 {
    if lambda >= 1.0 {
        return 0.0;
    }
    let tau = tau(n, m);
    let slope = 2.0 * sqrt_two_pi() * tau / libm::sqrt((n + m) as f64);
    (1.0 + slope * lambda) * libm::exp(-2.0 * tau * lambda * lambda)
}

/// How the crossed-term constant of [`b_dkw_full`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTerm {
    /// `P(N(lambda mu, sigma^2) in [0, lambda])` through [`normal_cdf`].
    #[default]
    Normal,
    /// Replace the probability by its upper bound 1.
    One,
}

/// `C_{lambda,n,m} = P(N(lambda mu, sigma^2) in [0, lambda])` with
/// `mu = n/(n+m)`, `sigma^2 = 1/(4(n+m))`.
pub fn cross_term(lambda: f64, n: usize, m: usize) -> f64 {
    let mu = n as f64 / (n + m) as f64;
    let sigma = 0.5 / libm::sqrt((n + m) as f64);
    let centre = lambda * mu;
    (normal_cdf((lambda - centre) / sigma) - normal_cdf(-centre / sigma)).clamp(0.0, 1.0)
}

/// Tail bound `B^DKWfull(lambda, n, m)`, never larger than [`b_dkw`].
///
/// The deviation cannot exceed 1, so the bound is 0 for `lambda >= 1` as
/// for [`b_dkw`].
pub fn b_dkw_full(lambda: f64, n: usize, m: usize) -> f64 {
    b_dkw_full_with(lambda, n, m, CrossTerm::Normal)
}

pub fn b_dkw_full_with(lambda: f64, n: usize, m: usize, cross: CrossTerm) -> f64 {
    if lambda >= 1.0 {
        return 0.0;
    }
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let c = match cross {
        CrossTerm::Normal => cross_term(lambda, n, m),
        CrossTerm::One => 1.0,
    };
    let l2 = lambda * lambda;
    nf / total * libm::exp(-2.0 * mf * l2)
        + mf / total * libm::exp(-2.0 * nf * l2)
        + c * 2.0 * sqrt_two_pi() * lambda * nf * mf / libm::pow(total, 1.5)
            * libm::exp(-2.0 * tau(n, m) * l2)
}

/// `Psi(x) = min(1, sqrt((log(1/delta) + log(1 + 2 sqrt(2 pi) tau x / sqrt(n+m))) / (2 tau)))`.
pub fn psi(x: f64, params: &DkwParams) -> f64 {
    let tau = params.tau();
    let slope = 2.0 * sqrt_two_pi() * tau / libm::sqrt((params.n + params.m) as f64);
    let inner = (libm::log(1.0 / params.delta) + libm::log1p(slope * x)) / (2.0 * tau);
    libm::sqrt(inner).min(1.0)
}

/// `Psi` iterated `params.iterations()` times from 1.
pub fn lambda_dkw(params: &DkwParams) -> f64 {
    (0..params.iterations).fold(1.0, |x, _| psi(x, params))
}

/// Smallest `lambda` with `B^DKWfull(lambda) <= delta`, found by bisection
/// below [`lambda_dkw`] (where the full bound already holds).
pub fn lambda_dkw_full(params: &DkwParams, cross: CrossTerm) -> f64 {
    let (n, m, delta) = (params.n, params.m, params.delta);
    let mut hi = lambda_dkw(params);
    if b_dkw_full_with(hi, n, m, cross) > delta {
        return hi;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if b_dkw_full_with(mid, n, m, cross) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    hi
}

/// Result of [`lambda_numerical`].
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalLambda {
    /// The selected order statistic of the simulated deviations.
    pub lambda: Ratio<i64>,
    pub reps: usize,
    /// 1-based index of the order statistic used.
    pub order_index: usize,
    /// Binomial standard error of the tail frequency at level `delta`.
    pub std_error: f64,
}

impl NumericalLambda {
    pub fn value(&self) -> f64 {
        *self.lambda.numer() as f64 / *self.lambda.denom() as f64
    }
}

/// 1-based index `ceil((1 - delta) reps)`, clamped to `1..=reps`.
pub(crate) fn upper_order_index(delta: f64, reps: usize) -> usize {
    (libm::ceil((1.0 - delta) * reps as f64 - 1e-9) as usize).clamp(1, reps)
}

pub(crate) fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPLICATES {
        Err(Error::TooFewReplicates {
            reps,
            min: MIN_REPLICATES,
        })
    } else {
        Ok(())
    }
}

/// Simulated deviations `sup_t (F_m(t) - I_n(t))` of `reps` urn draws.
pub fn simulate_sup_deviations(law: &PolyaLaw, seed: u64, reps: usize) -> Vec<Ratio<i64>> {
    rng::map_replicates(seed, reps, |_, rng| {
        sup_deviation(&ecdf(&urn_draw(law, rng)))
    })
}

/// Monte-Carlo version of the sharp threshold
/// `min { x >= 0 : P(sup_t (F_m(t) - I_n(t)) > x) <= delta }`.
///
/// Takes the `ceil((1 - delta) reps)`-th smallest simulated deviation, so
/// at most a `delta` fraction of the simulated values exceed it.
pub fn lambda_numerical(
    law: &PolyaLaw,
    delta: f64,
    seed: u64,
    reps: usize,
) -> Result<NumericalLambda> {
    check_open_unit("delta", delta)?;
    check_reps(reps)?;
    let mut devs = simulate_sup_deviations(law, seed, reps);
    devs.sort_unstable();
    let order_index = upper_order_index(delta, reps);
    Ok(NumericalLambda {
        lambda: devs[order_index - 1],
        reps,
        order_index,
        std_error: libm::sqrt(delta * (1.0 - delta) / reps as f64),
    })
}

/// `sup_{t in (0,1]} F_m(t) / t = max_i (i/m) / p_(i)`, exact.
pub fn simes_statistic(pvals: &PValueSet) -> Ratio<u64> {
    let sorted = pvals.sorted_ranks();
    let m = sorted.len() as u64;
    let np1 = (pvals.n() + 1) as u64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| Ratio::new((i as u64 + 1) * np1, m * r as u64))
        .max()
        .expect("m >= 1")
}

/// Tail bound `P(sup_t F_m(t)/t >= lambda) <= 1/lambda`.
pub fn simes_check(lambda: f64) -> Result<f64> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(1.0 / lambda)
    } else {
        Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            range: "(0, inf)",
        })
    }
}

/// How an [`Envelope`] threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    AnalyticDkw,
    FullDkw,
    NumericalDkw,
}

/// Upper envelope `t -> I_n(t) + lambda` for `F_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub n: usize,
    pub lambda: f64,
}

impl Envelope {
    pub fn analytic(params: &DkwParams) -> Self {
        Self {
            kind: EnvelopeKind::AnalyticDkw,
            n: params.n,
            lambda: lambda_dkw(params),
        }
    }

    pub fn full(params: &DkwParams) -> Self {
        Self {
            kind: EnvelopeKind::FullDkw,
            n: params.n,
            lambda: lambda_dkw_full(params, CrossTerm::Normal),
        }
    }

    pub fn numerical(law: &PolyaLaw, delta: f64, seed: u64, reps: usize) -> Result<Self> {
        let num = lambda_numerical(law, delta, seed, reps)?;
        Ok(Self {
            kind: EnvelopeKind::NumericalDkw,
            n: law.n(),
            lambda: num.value(),
        })
    }

    pub fn upper(&self, t: f64) -> f64 {
        discretized_identity(t, self.n) + self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_dkw_rises_then_falls() {
        for &(n, m) in &[(1, 1), (20, 20), (75, 75), (50, 200), (5000, 10)] {
            let t = tau(n, m);
            let c = 2.0 * sqrt_two_pi() * t / libm::sqrt((n + m) as f64);
            // Stationary point of (1 + c x) exp(-2 t x^2).
            let peak = (-1.0 + libm::sqrt(1.0 + c * c / t)) / (2.0 * c);
            assert!(b_dkw(peak / 2.0, n, m) > 1.0);
            let grid: Vec<f64> = (0..=400)
                .map(|i| peak + (1.0 - peak) * i as f64 / 400.0)
                .collect();
            for w in grid.windows(2) {
                assert!(
                    b_dkw(w[1], n, m) <= b_dkw(w[0], n, m),
                    "n={n} m={m} x={}",
                    w[1]
                );
            }
            for delta in [0.01, 0.2, 0.9] {
                assert!(lambda_dkw(&DkwParams::new(n, m, delta).unwrap()) >= peak);
            }
        }
    }

    #[test]
    fn b_dkw_edges() {
        assert_eq!(b_dkw(1.0, 10, 10), 0.0);
        assert_eq!(b_dkw(3.0, 10, 10), 0.0);
        assert_eq!(b_dkw(0.0, 10, 10), 1.0);
        assert_eq!(b_dkw_full(0.0, 7, 30), 1.0);
        assert_eq!(b_dkw_full(1.0, 7, 30), 0.0);
    }

    #[test]
    fn b_dkw_reference_value() {
        // (1 + 2 sqrt(2 pi) 0.2 37.5 / sqrt(150)) e^{-3}, evaluated with mpmath at 30 digits.
        let expected = 0.202_632_378_681_442_82;
        assert!((b_dkw(0.2, 75, 75) - expected).abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(DkwParams::new(0, 5, 0.1).is_err());
        assert!(DkwParams::new(5, 0, 0.1).is_err());
        assert!(DkwParams::new(5, 5, 0.0).is_err());
        assert!(DkwParams::new(5, 5, 1.0).is_err());
        assert!(DkwParams::new(5, 5, 0.1)
            .unwrap()
            .with_iterations(0)
            .is_err());
        let p = DkwParams::new(75, 75, 0.2).unwrap();
        assert_eq!(p.tau(), 37.5);
        assert_eq!(p.iterations(), DEFAULT_ITERATIONS);
    }

    #[test]
    fn lambda_dkw_saturates_for_tiny_samples() {
        let p = DkwParams::new(1, 1, 0.01).unwrap();
        assert_eq!(lambda_dkw(&p), 1.0);
        assert_eq!(b_dkw(1.0, 1, 1), 0.0);
    }

    #[test]
    fn more_iterations_never_hurt() {
        let base = DkwParams::new(75, 75, 0.2).unwrap();
        let mut prev = 1.0;
        for r in 1..=8 {
            let p = base.with_iterations(r).unwrap();
            let l = lambda_dkw(&p);
            assert!(l <= prev + 1e-15, "r={r}");
            assert!(b_dkw(l, 75, 75) <= 0.2);
            assert!(psi(l, &p) <= l + 1e-15);
            prev = l;
        }
    }

    #[test]
    fn full_threshold_is_sharper() {
        let p = DkwParams::new(75, 75, 0.2).unwrap();
        let full = lambda_dkw_full(&p, CrossTerm::Normal);
        assert!(full <= lambda_dkw(&p));
        assert!(b_dkw_full(full, 75, 75) <= 0.2 + 1e-12);
        let coarse = lambda_dkw_full(&p, CrossTerm::One);
        assert!(full <= coarse + 1e-12);
    }

    #[test]
    fn cross_term_is_probability() {
        for &(l, n, m) in &[(0.0, 3, 4), (0.1, 50, 50), (0.9, 10, 200), (0.5, 200, 10)] {
            let c = cross_term(l, n, m);
            assert!((0.0..=1.0).contains(&c));
        }
        assert_eq!(cross_term(0.0, 5, 5), 0.0);
    }

    #[test]
    fn simes_statistic_examples() {
        let all_one = PValueSet::new(4, vec![5, 5, 5]).unwrap();
        assert_eq!(simes_statistic(&all_one), Ratio::new(1, 1));
        for l in 1..=5 {
            let single = PValueSet::new(4, vec![l]).unwrap();
            assert_eq!(simes_statistic(&single), Ratio::new(5, l as u64));
        }
        assert_eq!(simes_check(4.0).unwrap(), 0.25);
        assert!(simes_check(0.0).is_err());
    }

    #[test]
    fn numerical_lambda_contract() {
        let law = PolyaLaw::new(10, 10).unwrap();
        assert!(matches!(
            lambda_numerical(&law, 0.2, 1, 10),
            Err(Error::TooFewReplicates { .. })
        ));
        let a = lambda_numerical(&law, 0.2, 1, 2000).unwrap();
        let b = lambda_numerical(&law, 0.2, 1, 2000).unwrap();
        assert_eq!(a, b);
        let devs = simulate_sup_deviations(&law, 1, 2000);
        let above = devs.iter().filter(|&&d| d > a.lambda).count();
        assert!(above as f64 <= 0.2 * 2000.0);
    }

    #[test]
    fn numerical_lambda_near_one_is_order_statistic() {
        let law = PolyaLaw::new(10, 10).unwrap();
        let delta = 0.999;
        let reps = 2000;
        let res = lambda_numerical(&law, delta, 4, reps).unwrap();
        let devs = simulate_sup_deviations(&law, 4, reps);
        let below = devs.iter().filter(|&&d| d < res.lambda).count();
        assert!(below < upper_order_index(delta, reps));
        assert_eq!(res.order_index, 2);
    }
}
