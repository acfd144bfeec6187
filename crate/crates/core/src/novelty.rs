//! Conformal novelty detection with uniform FDP bounds.
//!
//! Test points are flagged by thresholding their conformal p-values,
//! `R(t) = {i : p_i <= t}`. Null test scores are exchangeable with the
//! calibration scores, so the null p-values follow `P_{n,m0}` and the DKW
//! envelope bounds `|R(t) ∩ H0|` for all `t` at once. The unknown `m0` is
//! replaced by an upper confidence estimate.

use alloc::vec::Vec;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{lambda_dkw, DkwParams};
use crate::error::{check_closed_unit, check_open_unit, Error, Result};
use crate::grid::{discretized_identity, grid_floor};
use crate::rng;
use crate::scores::{ecdf, EcdfStep, PValueSet};

/// `{i : p_i <= t}`, indices in increasing order.
pub fn reject(pvals: &PValueSet, t: f64) -> Result<Vec<usize>> {
    check_closed_unit("t", t)?;
    let ell = grid_floor(t, pvals.n());
    Ok(pvals
        .ranks()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= ell)
        .map(|(i, _)| i)
        .collect())
}

/// `(FDP, TDP) = (|R ∩ H0| / (|R| ∨ 1), |R ∩ H1| / (|H1| ∨ 1))`.
///
/// `rejected` and `nulls` hold 0-based indices into `0..m`.
pub fn fdp_tdp(
    rejected: &[usize],
    nulls: &[usize],
    m: usize,
) -> Result<(Ratio<usize>, Ratio<usize>)> {
    let mut is_null = alloc::vec![false; m];
    for &i in nulls {
        *is_null.get_mut(i).ok_or(Error::LengthMismatch {
            expected: m,
            actual: i + 1,
        })? = true;
    }
    let mut false_disc = 0;
    for &i in rejected {
        if i >= m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: i + 1,
            });
        }
        if is_null[i] {
            false_disc += 1;
        }
    }
    let m1 = m - is_null.iter().filter(|&&b| b).count();
    let true_disc = rejected.len() - false_disc;
    Ok((
        Ratio::new(false_disc, rejected.len().max(1)),
        Ratio::new(true_disc, m1.max(1)),
    ))
}

/// Which estimator produced an [`M0Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum M0Method {
    Dkw,
    Simes,
    /// No estimation: `m0 = m`.
    Total,
}

/// Upper confidence estimate of the number of null test points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M0Estimate {
    pub value: usize,
    pub method: M0Method,
}

/// `lambda_dkw(delta, n, r)` for `r = 1..=m` (index `r - 1`).
pub fn lambda_table(n: usize, m: usize, delta: f64) -> Result<Vec<f64>> {
    (1..=m)
        .map(|r| Ok(lambda_dkw(&DkwParams::new(n, r, delta)?)))
        .collect()
}

/// `max { r in 1..=m : inf_t (#{p_i > t} + r lambda_r) / (1 - I_n(t)) >= r }`,
/// or `m` if no `r` qualifies.
///
/// The infimum runs over grid points `l = 0..=n`. Written as
/// `r lambda_r >= max_l [r (1 - l/(n+1)) - #{p_i > l/(n+1)}]`, the bracket
/// decreases in `l` wherever the count is flat, so only `l = 0` and the
/// observed ranks need checking.
pub fn m0_hat_dkw(pvals: &PValueSet, delta: f64) -> Result<M0Estimate> {
    check_open_unit("delta", delta)?;
    let lambdas = lambda_table(pvals.n(), pvals.m(), delta)?;
    Ok(m0_hat_dkw_with(pvals, &lambdas))
}

/// [`m0_hat_dkw`] with a precomputed [`lambda_table`].
pub fn m0_hat_dkw_with(pvals: &PValueSet, lambdas: &[f64]) -> M0Estimate {
    let n = pvals.n();
    let m = pvals.m();
    let e = ecdf(pvals);
    let mut levels: Vec<usize> = pvals.ranks().iter().copied().filter(|&r| r <= n).collect();
    levels.push(0);
    levels.sort_unstable();
    levels.dedup();
    let np1 = (n + 1) as f64;
    let value = (1..=m)
        .rev()
        .find(|&r| {
            let rf = r as f64;
            let slack = rf * lambdas[r - 1];
            levels.iter().all(|&l| {
                let above = (m - e.count_at(l)) as f64;
                above + slack >= rf * (1.0 - l as f64 / np1)
            })
        })
        .unwrap_or(m);
    M0Estimate {
        value,
        method: M0Method::Dkw,
    }
}

/// `m ∧ ceil(inf_{t in (0, delta)} #{p_i > t} / (1 - t/delta))` over grid
/// points, at least 1. No grid point in `(0, delta)` gives `m`.
pub fn m0_hat_simes(pvals: &PValueSet, delta: f64) -> Result<M0Estimate> {
    check_open_unit("delta", delta)?;
    let n = pvals.n();
    let m = pvals.m();
    let e = ecdf(pvals);
    let np1 = (n + 1) as f64;
    let inf = (1..=n)
        .map(|l| (l, l as f64 / np1))
        .take_while(|&(_, t)| t < delta)
        .map(|(l, t)| (m - e.count_at(l)) as f64 / (1.0 - t / delta))
        .fold(f64::INFINITY, f64::min);
    let value = if inf.is_finite() {
        (libm::ceil(inf) as usize).clamp(1, m)
    } else {
        m
    };
    Ok(M0Estimate {
        value,
        method: M0Method::Simes,
    })
}

/// Uniform FDP bounds for one set of p-values.
///
/// Holds both `m0` estimates so bound curves can be evaluated cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct FdpBounds {
    ecdf: EcdfStep,
    delta: f64,
    m0_dkw: M0Estimate,
    lambda_m0: f64,
    m0_simes: M0Estimate,
}

impl FdpBounds {
    pub fn new(pvals: &PValueSet, delta: f64) -> Result<Self> {
        let lambdas = lambda_table(pvals.n(), pvals.m(), delta)?;
        Ok(Self::with_lambdas(pvals, delta, &lambdas))
    }

    /// As [`FdpBounds::new`] with a precomputed [`lambda_table`].
    pub fn with_lambdas(pvals: &PValueSet, delta: f64, lambdas: &[f64]) -> Self {
        let m0_dkw = m0_hat_dkw_with(pvals, lambdas);
        let m0_simes = m0_hat_simes(pvals, delta).expect("delta validated by lambda_table");
        Self {
            ecdf: ecdf(pvals),
            delta,
            lambda_m0: lambdas[m0_dkw.value - 1],
            m0_dkw,
            m0_simes,
        }
    }

    /// Same bounds with `m0` replaced by `m` (no estimation).
    pub fn without_estimation(pvals: &PValueSet, delta: f64) -> Result<Self> {
        check_open_unit("delta", delta)?;
        let m = pvals.m();
        Ok(Self {
            ecdf: ecdf(pvals),
            delta,
            lambda_m0: lambda_dkw(&DkwParams::new(pvals.n(), m, delta)?),
            m0_dkw: M0Estimate {
                value: m,
                method: M0Method::Total,
            },
            m0_simes: M0Estimate {
                value: m,
                method: M0Method::Total,
            },
        })
    }

    pub fn m0_dkw(&self) -> M0Estimate {
        self.m0_dkw
    }

    pub fn m0_simes(&self) -> M0Estimate {
        self.m0_simes
    }

    pub fn lambda_m0(&self) -> f64 {
        self.lambda_m0
    }

    pub fn rejections(&self, t: f64) -> usize {
        self.ecdf.count_at(grid_floor(t, self.ecdf.n()))
    }

    /// `m0 (I_n(t) + lambda_{delta,n,m0}) / (1 ∨ |R(t)|)`.
    pub fn dkw(&self, t: f64) -> f64 {
        let m0 = self.m0_dkw.value as f64;
        m0 * (discretized_identity(t, self.ecdf.n()) + self.lambda_m0)
            / self.rejections(t).max(1) as f64
    }

    /// `(m0 t / delta) / (1 ∨ |R(t)|)`.
    pub fn simes(&self, t: f64) -> f64 {
        self.m0_simes.value as f64 * t / self.delta / self.rejections(t).max(1) as f64
    }

    /// Bounds on `FDP(AD_alpha)` given the BH rejection number `k_hat`.
    pub fn adadetect(&self, alpha: f64, k_hat: usize) -> (f64, f64) {
        if k_hat == 0 {
            return (0.0, 0.0);
        }
        let m = self.ecdf.m() as f64;
        let m0 = self.m0_dkw.value as f64;
        let dkw = alpha * m0 / m + m0 * self.lambda_m0 / k_hat as f64;
        let simes = self.m0_simes.value as f64 * alpha / (m * self.delta);
        (dkw, simes)
    }
}

/// FDP bound of `R(t)` from the DKW envelope, valid for all `t` at once.
pub fn fdp_bound_dkw(pvals: &PValueSet, t: f64, delta: f64) -> Result<f64> {
    check_open_unit("t", t)?;
    Ok(FdpBounds::new(pvals, delta)?.dkw(t))
}

/// FDP bound of `R(t)` from the Simes inequality, valid for all `t` at once.
pub fn fdp_bound_simes(pvals: &PValueSet, t: f64, delta: f64) -> Result<f64> {
    check_open_unit("t", t)?;
    Ok(FdpBounds::new(pvals, delta)?.simes(t))
}

/// Benjamini–Hochberg: `k_hat = max { k : #{p_i <= alpha k / m} >= k }`
/// and the rejection set `R(alpha k_hat / m)`.
pub fn bh_threshold(pvals: &PValueSet, alpha: f64) -> Result<(usize, Vec<usize>)> {
    check_open_unit("alpha", alpha)?;
    let m = pvals.m();
    let n = pvals.n();
    let sorted = pvals.sorted_ranks();
    let k_hat = (1..=m)
        .rev()
        .find(|&k| {
            let ell = grid_floor(alpha * k as f64 / m as f64, n);
            sorted.partition_point(|&r| r <= ell) >= k
        })
        .unwrap_or(0);
    let set = if k_hat == 0 {
        Vec::new()
    } else {
        reject(pvals, alpha * k_hat as f64 / m as f64)?
    };
    Ok((k_hat, set))
}

/// `(DKW, Simes)` bounds on the FDP of BH at level `alpha`; both zero when
/// nothing is rejected.
pub fn adadetect_fdp_bounds(pvals: &PValueSet, alpha: f64, delta: f64) -> Result<(f64, f64)> {
    let (k_hat, _) = bh_threshold(pvals, alpha)?;
    Ok(FdpBounds::new(pvals, delta)?.adadetect(alpha, k_hat))
}

/// One row of a [`RejectionCurve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub rejections: usize,
    pub false_rejections: usize,
    pub fdp: f64,
    pub tdp: f64,
    pub bound_dkw: f64,
    pub bound_simes: f64,
}

/// FDP/TDP and bounds over the grid thresholds `t = l/(n+1)`, `l = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionCurve {
    pub points: Vec<CurvePoint>,
}

impl RejectionCurve {
    pub fn new(pvals: &PValueSet, nulls: &[usize], bounds: &FdpBounds) -> Result<Self> {
        let n = pvals.n();
        let m = pvals.m();
        let mut is_null = alloc::vec![false; m];
        for &i in nulls {
            *is_null.get_mut(i).ok_or(Error::LengthMismatch {
                expected: m,
                actual: i + 1,
            })? = true;
        }
        let m1 = m - nulls.len();
        // Per-rank counts of all / null rejections, then prefix sums.
        let mut all = alloc::vec![0usize; n + 2];
        let mut null = alloc::vec![0usize; n + 2];
        for (i, &r) in pvals.ranks().iter().enumerate() {
            all[r] += 1;
            if is_null[i] {
                null[r] += 1;
            }
        }
        let mut points = Vec::with_capacity(n);
        let (mut ra, mut rn) = (0, 0);
        for ell in 1..=n {
            ra += all[ell];
            rn += null[ell];
            let t = ell as f64 / (n + 1) as f64;
            points.push(CurvePoint {
                t,
                rejections: ra,
                false_rejections: rn,
                fdp: rn as f64 / ra.max(1) as f64,
                tdp: (ra - rn) as f64 / m1.max(1) as f64,
                bound_dkw: bounds.dkw(t),
                bound_simes: bounds.simes(t),
            });
        }
        Ok(Self { points })
    }

    pub fn dkw_violated(&self) -> bool {
        self.points.iter().any(|p| p.fdp > p.bound_dkw)
    }

    pub fn simes_violated(&self) -> bool {
        self.points.iter().any(|p| p.fdp > p.bound_simes)
    }
}

/// Synthetic novelty-detection scores.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyData {
    pub calibration: Vec<f64>,
    pub test: Vec<f64>,
    /// 0-based indices of null test points.
    pub nulls: Vec<usize>,
}

impl NoveltyData {
    pub fn pvalues(&self) -> Result<PValueSet> {
        crate::scores::conformal_pvalues(&crate::scores::ScoreSet::new(
            self.calibration.clone(),
            self.test.clone(),
        )?)
    }
}

/// Calibration and null scores `N(0,1)`, novelties `N(shift, 1)`, test
/// order shuffled. Large scores are nonconforming. Stream 0 of `seed`.
pub fn synth_nd(n: usize, m0: usize, m1: usize, shift: f64, seed: u64) -> Result<NoveltyData> {
    if n == 0 {
        return Err(Error::EmptyCalibration);
    }
    if m0 + m1 == 0 {
        return Err(Error::EmptyTest);
    }
    if !shift.is_finite() {
        return Err(Error::InvalidConfig("shift must be finite".into()));
    }
    Ok(synth_nd_with(n, m0, m1, shift, &mut rng::stream(seed, 0)))
}

pub fn synth_nd_with<R: Rng + ?Sized>(
    n: usize,
    m0: usize,
    m1: usize,
    shift: f64,
    rng: &mut R,
) -> NoveltyData {
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let calibration: Vec<f64> = (0..n).map(|_| normal()).collect();
    let mut labelled: Vec<(f64, bool)> = Vec::with_capacity(m0 + m1);
    labelled.extend((0..m0).map(|_| (normal(), true)));
    labelled.extend((0..m1).map(|_| (shift + normal(), false)));
    labelled.shuffle(rng);
    let nulls = labelled
        .iter()
        .enumerate()
        .filter(|(_, (_, null))| *null)
        .map(|(i, _)| i)
        .collect();
    NoveltyData {
        calibration,
        test: labelled.into_iter().map(|(s, _)| s).collect(),
        nulls,
    }
}

/// Parameters of a synthetic novelty-detection experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdConfig {
    pub n: usize,
    pub m0: usize,
    pub m1: usize,
    pub shift: f64,
    /// BH level.
    pub alpha: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for NdConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            m0: 500,
            m1: 260,
            shift: 3.0,
            alpha: 0.1,
            delta: 0.2,
            seed: 0,
        }
    }
}

impl NdConfig {
    pub fn m(&self) -> usize {
        self.m0 + self.m1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyCalibration);
        }
        if self.m() == 0 {
            return Err(Error::EmptyTest);
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidConfig("shift must be finite".into()));
        }
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("delta", self.delta)
    }
}

/// Replicated novelty-detection summary.
#[derive(Debug, Clone, PartialEq)]
pub struct NdCoverage {
    pub reps: usize,
    pub m0: usize,
    pub dkw_violations: usize,
    pub simes_violations: usize,
    pub m0_dkw_below: usize,
    pub m0_simes_below: usize,
    pub bh_mean_fdp: f64,
    pub bh_sd_fdp: f64,
    pub bh_mean_tdp: f64,
}

/// Simulates `reps` draws of [`synth_nd`] (replicate `r` on stream `r`) and
/// tallies bound failures, `m0` underestimates and BH's FDP.
pub fn simulate_nd_coverage(config: &NdConfig, reps: usize) -> Result<NdCoverage> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::TooFewReplicates { reps, min: 1 });
    }
    let NdConfig {
        n,
        m0,
        m1,
        shift,
        alpha,
        delta,
        seed,
    } = *config;
    let lambdas = lambda_table(n, m0 + m1, delta)?;
    let per_rep = rng::map_replicates(seed, reps, |_, rng| {
        let data = synth_nd_with(n, m0, m1, shift, rng);
        let p = data.pvalues().expect("continuous scores have no ties");
        let bounds = FdpBounds::with_lambdas(&p, delta, &lambdas);
        let curve = RejectionCurve::new(&p, &data.nulls, &bounds).expect("valid indices");
        let (_, set) = bh_threshold(&p, alpha).expect("alpha validated");
        let (fdp, tdp) = fdp_tdp(&set, &data.nulls, p.m()).expect("valid indices");
        (
            curve.dkw_violated(),
            curve.simes_violated(),
            bounds.m0_dkw().value < m0,
            bounds.m0_simes().value < m0,
            ratio_f64(fdp),
            ratio_f64(tdp),
        )
    });
    let r = reps as f64;
    let mean_fdp = per_rep.iter().map(|x| x.4).sum::<f64>() / r;
    let var_fdp = per_rep
        .iter()
        .map(|x| (x.4 - mean_fdp) * (x.4 - mean_fdp))
        .sum::<f64>()
        / r;
    Ok(NdCoverage {
        reps,
        m0,
        dkw_violations: per_rep.iter().filter(|x| x.0).count(),
        simes_violations: per_rep.iter().filter(|x| x.1).count(),
        m0_dkw_below: per_rep.iter().filter(|x| x.2).count(),
        m0_simes_below: per_rep.iter().filter(|x| x.3).count(),
        bh_mean_fdp: mean_fdp,
        bh_sd_fdp: libm::sqrt(var_fdp),
        bh_mean_tdp: per_rep.iter().map(|x| x.5).sum::<f64>() / r,
    })
}

pub fn ratio_f64(r: Ratio<usize>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pv(n: usize, r: &[usize]) -> PValueSet {
        PValueSet::new(n, r.to_vec()).unwrap()
    }

    #[test]
    fn reject_examples() {
        let p = pv(2, &[1, 3, 2]);
        assert_eq!(reject(&p, 0.2).unwrap(), Vec::<usize>::new());
        assert_eq!(reject(&p, 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(reject(&p, 1.0 / 3.0).unwrap(), vec![0]);
    }

    #[test]
    fn fdp_tdp_examples() {
        let zero = Ratio::new(0, 1);
        assert_eq!(fdp_tdp(&[], &[0, 1], 4).unwrap(), (zero, zero));
        assert_eq!(fdp_tdp(&[0, 2], &[], 4).unwrap().0, zero);
        let (fdp, tdp) = fdp_tdp(&[0, 2, 3], &[0, 1], 4).unwrap();
        assert_eq!(fdp, Ratio::new(1, 3));
        assert_eq!(tdp, Ratio::new(1, 1));
        assert!(fdp_tdp(&[7], &[], 4).is_err());
    }

    /// Full-grid evaluation of the defining inequality, no shortcuts.
    fn m0_dkw_brute(p: &PValueSet, delta: f64) -> usize {
        let (n, m) = (p.n(), p.m());
        let e = ecdf(p);
        (1..=m)
            .rev()
            .find(|&r| {
                let lam = lambda_dkw(&DkwParams::new(n, r, delta).unwrap());
                let inf = (0..=n)
                    .map(|l| {
                        let above = (m - e.count_at(l)) as f64;
                        (above + r as f64 * lam) / (1.0 - l as f64 / (n + 1) as f64)
                    })
                    .fold(f64::INFINITY, f64::min);
                inf >= r as f64
            })
            .unwrap_or(m)
    }

    #[test]
    fn m0_dkw_matches_brute_force() {
        let mut rng = rng::stream(42, 0);
        for _ in 0..200 {
            let n = rng.random_range(1..60);
            let m = rng.random_range(1..40);
            let ranks: Vec<usize> = (0..m)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        rng.random_range(1..=(n / 5 + 1))
                    } else {
                        rng.random_range(1..=n + 1)
                    }
                })
                .collect();
            let p = pv(n, &ranks);
            for &delta in &[0.05, 0.2, 0.5] {
                assert_eq!(
                    m0_hat_dkw(&p, delta).unwrap().value,
                    m0_dkw_brute(&p, delta)
                );
            }
        }
    }

    #[test]
    fn m0_dkw_examples() {
        let all_one = pv(50, &[51; 20]);
        assert_eq!(m0_hat_dkw(&all_one, 0.1).unwrap().value, 20);
        let all_min = pv(2000, &[1; 300]);
        let est = m0_hat_dkw(&all_min, 0.01).unwrap();
        assert!(est.value < 300, "{est:?}");
        assert_eq!(est.method, M0Method::Dkw);
    }

    #[test]
    fn m0_simes_examples() {
        let p = pv(9, &[1, 10, 10, 10]);
        assert_eq!(m0_hat_simes(&p, 0.5).unwrap().value, 4);
        assert_eq!(m0_hat_simes(&p, 0.05).unwrap().value, 4);
        assert_eq!(m0_hat_simes(&pv(9, &[10, 10]), 0.5).unwrap().value, 2);
        // Strong signal: the infimum drops below m.
        let mut ranks = vec![1; 30];
        ranks.extend([100; 10]);
        let est = m0_hat_simes(&pv(99, &ranks), 0.5).unwrap();
        assert_eq!(est.value, 11);
    }

    #[test]
    fn bh_examples() {
        let p = pv(99, &[1, 2, 50]);
        let (k, set) = bh_threshold(&p, 0.15).unwrap();
        assert_eq!(k, 2);
        assert_eq!(set, vec![0, 1]);
        let (k, set) = bh_threshold(&pv(9, &[10, 10, 10]), 0.5).unwrap();
        assert_eq!(k, 0);
        assert!(set.is_empty());
    }

    #[test]
    fn bh_brute_force() {
        let mut rng = rng::stream(8, 0);
        for _ in 0..300 {
            let n = rng.random_range(1..40);
            let m = rng.random_range(1..30);
            let ranks: Vec<usize> = (0..m).map(|_| rng.random_range(1..=n + 1)).collect();
            let p = pv(n, &ranks);
            let alpha = rng.random_range(0.01..0.9);
            let (k, set) = bh_threshold(&p, alpha).unwrap();
            let expected = (0..=m)
                .filter(|&k| p.count_at_most(alpha * k as f64 / m as f64) >= k)
                .max()
                .unwrap();
            assert_eq!(k, expected);
            assert!(set.len() >= k);
        }
    }

    #[test]
    fn bound_edge_cases() {
        let p = pv(9, &[10, 10, 10, 10]);
        let b = FdpBounds::new(&p, 0.2).unwrap();
        assert_eq!(b.rejections(0.5), 0);
        let lam = b.lambda_m0();
        let m0 = b.m0_dkw().value as f64;
        assert!((b.dkw(0.5) - m0 * (0.5 + lam)).abs() < 1e-12);
        assert!((b.dkw(0.05) - m0 * lam).abs() < 1e-12);
        assert!(b.simes(1e-9) < 1e-6);
        assert_eq!(b.adadetect(0.1, 0), (0.0, 0.0));
        assert_eq!(adadetect_fdp_bounds(&p, 0.1, 0.2).unwrap(), (0.0, 0.0));
        assert!(fdp_bound_dkw(&p, 0.0, 0.2).is_err());
        assert!(fdp_bound_simes(&p, 0.5, 1.0).is_err());
    }

    #[test]
    fn simes_bound_vacuous_at_delta() {
        // t = delta and |R(t)| = m0 -> 1.
        let p = pv(9, &[1, 2, 10, 10]);
        let b = FdpBounds::new(&p, 0.2).unwrap();
        assert_eq!(b.rejections(0.2), 2);
        let expected = b.m0_simes().value as f64 * 0.2 / 0.2 / 2.0;
        assert!((b.simes(0.2) - expected).abs() < 1e-12);
    }

    #[test]
    fn estimation_never_loosens_bounds() {
        let data = synth_nd(200, 80, 40, 3.0, 5).unwrap();
        let p = data.pvalues().unwrap();
        let est = FdpBounds::new(&p, 0.2).unwrap();
        let full = FdpBounds::without_estimation(&p, 0.2).unwrap();
        assert!(est.m0_dkw().value <= p.m());
        assert!(est.m0_simes().value <= p.m());
        for l in 1..=200 {
            let t = l as f64 / 201.0;
            assert!(est.dkw(t) <= full.dkw(t) + 1e-12);
            assert!(est.simes(t) <= full.simes(t) + 1e-12);
        }
    }

    #[test]
    fn m0_dkw_monotone_in_signal() {
        // Lowering p-values pointwise never raises the estimate.
        let mut rng = rng::stream(21, 0);
        for _ in 0..100 {
            let n = 100;
            let ranks: Vec<usize> = (0..60).map(|_| rng.random_range(1..=n + 1)).collect();
            let lowered: Vec<usize> = ranks
                .iter()
                .map(|&r| {
                    if rng.random_bool(0.3) {
                        1 + (r - 1) / 4
                    } else {
                        r
                    }
                })
                .collect();
            let a = m0_hat_dkw(&pv(n, &ranks), 0.2).unwrap().value;
            let b = m0_hat_dkw(&pv(n, &lowered), 0.2).unwrap().value;
            assert!(b <= a, "{b} > {a}");
        }
    }

    #[test]
    fn synth_nd_contract() {
        let d = synth_nd(100, 30, 20, 3.0, 9).unwrap();
        assert_eq!(d.calibration.len(), 100);
        assert_eq!(d.test.len(), 50);
        assert_eq!(d.nulls.len(), 30);
        assert_eq!(d, synth_nd(100, 30, 20, 3.0, 9).unwrap());
        assert!(synth_nd(0, 3, 3, 0.0, 1).is_err());
        assert!(synth_nd(3, 0, 0, 0.0, 1).is_err());
    }

    #[test]
    fn strong_shift_gives_power() {
        let d = synth_nd(1000, 500, 260, 3.0, 1).unwrap();
        let p = d.pvalues().unwrap();
        let (_, set) = bh_threshold(&p, 0.1).unwrap();
        let (_, tdp) = fdp_tdp(&set, &d.nulls, p.m()).unwrap();
        assert!(ratio_f64(tdp) > 0.3);
    }

    #[test]
    fn small_nd_simulation() {
        let config = NdConfig {
            n: 100,
            m0: 40,
            m1: 20,
            seed: 3,
            ..NdConfig::default()
        };
        let a = simulate_nd_coverage(&config, 50).unwrap();
        assert_eq!(a, simulate_nd_coverage(&config, 50).unwrap());
        assert!(a.dkw_violations <= 25);
        assert!(a.bh_mean_tdp > 0.2);
        assert!(simulate_nd_coverage(
            &NdConfig {
                alpha: 0.0,
                ..config
            },
            5
        )
        .is_err());
    }

    #[test]
    fn curve_is_consistent() {
        let d = synth_nd(50, 20, 10, 2.0, 3).unwrap();
        let p = d.pvalues().unwrap();
        let b = FdpBounds::new(&p, 0.2).unwrap();
        let c = RejectionCurve::new(&p, &d.nulls, &b).unwrap();
        assert_eq!(c.points.len(), 50);
        for w in c.points.windows(2) {
            assert!(w[0].rejections <= w[1].rejections);
        }
        for pt in &c.points {
            let set = reject(&p, pt.t).unwrap();
            let (fdp, tdp) = fdp_tdp(&set, &d.nulls, p.m()).unwrap();
            assert_eq!(set.len(), pt.rejections);
            assert_eq!(ratio_f64(fdp), pt.fdp);
            assert_eq!(ratio_f64(tdp), pt.tdp);
        }
    }
}
