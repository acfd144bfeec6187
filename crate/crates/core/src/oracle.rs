//! Brute-force ground truth for small instances.
//!
//! [`enumerate_law`] walks every ordering of `n + m` distinct scores, which
//! are equally likely under exchangeability, and tallies the resulting rank
//! trajectories. Nothing from the urn description is used, so agreement
//! with [`polya`](crate::polya) is a genuine check.
//!
//! Statistics that only depend on the multiset of ranks (the ecdf, order
//! statistics, the sup deviation) can use [`enumerate_histograms`] instead,
//! which walks the `binom(n+m, m)` equally likely interleavings of
//! calibration and test points and reaches larger sizes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

use crate::bounds::b_dkw;
use crate::error::{check_open_unit, Error, Result};
use crate::grid::grid_floor;
use crate::polya::{
    self, binomial, ecdf_count_pmf_grid, histogram_pmf, joint_pmf, sequential_pmf,
    trajectory_conditional_pmf, two_color_sequential, Histogram, PolyaLaw,
};
use crate::prediction::{calibrate_level, level_zero_explicit, order_statistic_cdf};
use crate::prob::{rational_from_f64, Arithmetic, Probability};
use crate::scores::{ecdf, sup_deviation, EcdfStep, PValueSet};

/// Default bound on `n + m` for full permutation enumeration.
pub const DEFAULT_LIMIT: usize = 9;
/// Hard cap for the override.
pub const OVERRIDE_LIMIT: usize = 11;
/// Bound on `n + m` for interleaving enumeration.
pub const INTERLEAVING_LIMIT: usize = 24;

fn check_sizes(n: usize, m: usize, limit: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyCalibration);
    }
    if m == 0 {
        return Err(Error::EmptyTest);
    }
    if n + m > limit {
        return Err(Error::SizeGuard { size: n + m, limit });
    }
    Ok(())
}

fn q(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact law of a discrete random object, stored as integer weights over a
/// common denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountLaw<K: Ord> {
    weights: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> CountLaw<K> {
    fn new(weights: BTreeMap<K, u64>, total: u64) -> Self {
        Self { weights, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of outcomes with positive probability.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn probability(&self, key: &K) -> BigRational {
        q(self.weights.get(key).copied().unwrap_or(0), self.total)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, BigRational)> + '_ {
        self.weights.iter().map(|(k, &w)| (k, q(w, self.total)))
    }

    pub fn mass(&self) -> BigRational {
        q(self.weights.values().sum(), self.total)
    }

    pub fn pushforward<L: Ord, F: Fn(&K) -> L>(&self, f: F) -> CountLaw<L> {
        let mut out = BTreeMap::new();
        for (k, &w) in &self.weights {
            *out.entry(f(k)).or_insert(0) += w;
        }
        CountLaw::new(out, self.total)
    }

    /// `P(pred)`.
    pub fn probability_of<F: Fn(&K) -> bool>(&self, pred: F) -> BigRational {
        q(
            self.weights
                .iter()
                .filter(|(k, _)| pred(k))
                .map(|(_, &w)| w)
                .sum(),
            self.total,
        )
    }
}

/// Law of the rank trajectory `((n+1) p_1, ..., (n+1) p_m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactLaw {
    n: usize,
    m: usize,
    law: CountLaw<Vec<usize>>,
}

impl ExactLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn probability(&self, trajectory: &[usize]) -> BigRational {
        self.law.probability(&trajectory.to_vec())
    }

    pub fn counts(&self) -> &CountLaw<Vec<usize>> {
        &self.law
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, BigRational)> + '_ {
        self.law.iter()
    }

    pub fn histograms(&self) -> CountLaw<Vec<usize>> {
        let n = self.n;
        self.law
            .pushforward(|j| Histogram::of_trajectory(n, j).bins().to_vec())
    }
}

/// Rearranges `v` into the next permutation in lexicographic order;
/// `false` once `v` is the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("v[i+1] > v[i]");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// All orderings with the first item's score fixed to `first`.
fn enumerate_prefix(n: usize, m: usize, first: usize) -> BTreeMap<Vec<usize>, u64> {
    let total = n + m;
    let mut rest: Vec<usize> = (0..total).filter(|&s| s != first).collect();
    let mut perm = vec![0usize; total];
    let mut out = BTreeMap::new();
    let mut traj = vec![0usize; m];
    loop {
        perm[0] = first;
        perm[1..].copy_from_slice(&rest);
        // Items 0..n are calibration, n.. test; perm[i] is the score of item i.
        for (t, slot) in traj.iter_mut().enumerate() {
            let s = perm[n + t];
            *slot = 1 + perm[..n].iter().filter(|&&c| c >= s).count();
        }
        *out.entry(traj.clone()).or_insert(0) += 1;
        if !next_permutation(&mut rest) {
            return out;
        }
    }
}

fn merge(
    mut a: BTreeMap<Vec<usize>, u64>,
    b: BTreeMap<Vec<usize>, u64>,
) -> BTreeMap<Vec<usize>, u64> {
    for (k, w) in b {
        *a.entry(k).or_insert(0) += w;
    }
    a
}

/// Law of the rank trajectory by walking all `(n+m)!` score orderings.
pub fn enumerate_law(n: usize, m: usize) -> Result<ExactLaw> {
    enumerate_law_with_limit(n, m, DEFAULT_LIMIT)
}

/// [`enumerate_law`] with a raised size guard, at most [`OVERRIDE_LIMIT`].
pub fn enumerate_law_with_limit(n: usize, m: usize, limit: usize) -> Result<ExactLaw> {
    if limit > OVERRIDE_LIMIT {
        return Err(Error::SizeGuard {
            size: limit,
            limit: OVERRIDE_LIMIT,
        });
    }
    check_sizes(n, m, limit)?;
    let total = n + m;
    #[cfg(feature = "parallel")]
    let weights = {
        use rayon::prelude::*;
        (0..total)
            .into_par_iter()
            .map(|first| enumerate_prefix(n, m, first))
            .reduce(BTreeMap::new, merge)
    };
    #[cfg(not(feature = "parallel"))]
    let weights = (0..total)
        .map(|first| enumerate_prefix(n, m, first))
        .fold(BTreeMap::new(), merge);
    let denom = (1..=total as u64).product();
    Ok(ExactLaw {
        n,
        m,
        law: CountLaw::new(weights, denom),
    })
}

/// Law of the rank histogram by walking all interleavings of calibration
/// and test points. Bins are indexed by rank `1..=n+1`.
pub fn enumerate_histograms(n: usize, m: usize) -> Result<CountLaw<Vec<usize>>> {
    check_sizes(n, m, INTERLEAVING_LIMIT)?;
    let total = n + m;
    let mut out = BTreeMap::new();
    let mut count = 0u64;
    // Bit i set: the i-th largest score is a test point. Gosper's hack
    // visits every mask with exactly m bits.
    let mut mask: u32 = (1u32 << m) - 1;
    let end = 1u32 << total;
    while mask < end {
        let mut bins = vec![0usize; n + 1];
        let mut cal_above = 0;
        for i in 0..total {
            if mask & (1 << i) != 0 {
                bins[cal_above] += 1;
            } else {
                cal_above += 1;
            }
        }
        *out.entry(bins).or_insert(0) += 1;
        count += 1;
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok(CountLaw::new(out, count))
}

fn ecdf_of_histogram(n: usize, bins: &[usize]) -> EcdfStep {
    let mut acc = 0;
    let counts = bins[..n + 1]
        .iter()
        .map(|&b| {
            acc += b;
            acc
        })
        .collect();
    EcdfStep::from_counts(n, counts).expect("cumulative counts are valid")
}

/// Law of `sup_t (F_m(t) - I_n(t))`, pushed forward from [`enumerate_law`].
pub fn exact_sup_deviation_law(n: usize, m: usize) -> Result<CountLaw<Ratio<i64>>> {
    let law = enumerate_law(n, m)?;
    Ok(law
        .counts()
        .pushforward(|j| sup_deviation(&ecdf(&PValueSet::new_unchecked(n, j.clone())))))
}

/// As [`exact_sup_deviation_law`] from the interleaving enumeration.
pub fn exact_sup_deviation_law_interleaved(n: usize, m: usize) -> Result<CountLaw<Ratio<i64>>> {
    Ok(enumerate_histograms(n, m)?.pushforward(|h| sup_deviation(&ecdf_of_histogram(n, h))))
}

/// Law of `m F_m(k0/(n+1)) = #{i : rank_i <= k0}`, indexed by `0..=m`.
pub fn exact_ecdf_count_law(n: usize, m: usize, k0: usize) -> Result<Vec<BigRational>> {
    if k0 > n + 1 {
        return Err(Error::RankOutOfRange {
            rank: k0,
            max: n + 1,
        });
    }
    let law = enumerate_histograms(n, m)?.pushforward(|h| h[..k0].iter().sum::<usize>());
    Ok((0..=m).map(|k| law.probability(&k)).collect())
}

/// `P(p_(k) <= l/(n+1))` by enumeration.
pub fn exact_order_statistic_cdf(n: usize, m: usize, k: usize, ell: usize) -> Result<BigRational> {
    if k == 0 || k > m {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "1..=m",
        });
    }
    Ok(exact_ecdf_count_law(n, m, ell)?
        .into_iter()
        .skip(k)
        .fold(BigRational::zero(), |a, b| a + b))
}

/// Law of `(1{p_1 > t}, ..., 1{p_m > t})` at `t = k0/(n+1)`.
pub fn two_color_pushforward(law: &ExactLaw, k0: usize) -> CountLaw<Vec<bool>> {
    law.counts()
        .pushforward(|j| j.iter().map(|&r| r > k0).collect())
}

/// Largest grid level `l` with `P(p_(k) <= l/(n+1)) <= delta`, by enumeration.
pub fn exact_calibrated_level(n: usize, m: usize, k: usize, delta: f64) -> Result<usize> {
    check_open_unit("delta", delta)?;
    let d = rational_from_f64(delta);
    let mut best = 0;
    for ell in 1..=n + 1 {
        if exact_order_statistic_cdf(n, m, k, ell)? <= d {
            best = ell;
        }
    }
    Ok(best)
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub passed: bool,
    /// First mismatch, if any.
    pub detail: Option<String>,
}

/// Settings for [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Bound on `n + m` for permutation-based checks.
    pub max_size: usize,
    /// Bound on `n` and `m` for interleaving-based checks.
    pub max_side: usize,
    /// Test hook: scale one reference probability by `1001/1000`.
    pub perturb: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_size: DEFAULT_LIMIT,
            max_side: 6,
            perturb: false,
        }
    }
}

struct Check {
    name: &'static str,
    instances: usize,
    detail: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            instances: 0,
            detail: None,
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok && self.detail.is_none() {
            self.detail = Some(what());
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            instances: self.instances,
            passed: self.detail.is_none(),
            detail: self.detail,
        }
    }
}

fn exact(p: Probability) -> BigRational {
    p.into_exact().expect("exact arithmetic requested")
}

fn exact_law(n: usize, m: usize) -> PolyaLaw {
    PolyaLaw::new(n, m)
        .expect("sizes checked")
        .with_arithmetic(Arithmetic::Exact)
}

/// All pairs `n, m >= 1` with `n + m <= size`.
fn pairs_up_to(size: usize) -> impl Iterator<Item = (usize, usize)> {
    (2..=size).flat_map(|s| (1..s).map(move |n| (n, s - n)))
}

/// Every trajectory in `{1..=colors}^m`.
fn all_trajectories(colors: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|t| {
                (1..=colors).map(move |c| {
                    let mut t = t.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

const MARQUES_ALPHAS: [f64; 4] = [0.1, 0.3, 0.5, 0.9];
const LEVEL_DELTAS: [f64; 3] = [0.1, 0.2, 0.5];
const LEVEL_TARGETS: [f64; 4] = [0.0, 0.1, 0.25, 0.5];

/// Runs every exact-equality check and reports one line per check.
pub fn verify(options: VerifyOptions) -> Result<Vec<CheckResult>> {
    if options.max_size > OVERRIDE_LIMIT {
        return Err(Error::SizeGuard {
            size: options.max_size,
            limit: OVERRIDE_LIMIT,
        });
    }
    if 2 * options.max_side > INTERLEAVING_LIMIT {
        return Err(Error::SizeGuard {
            size: 2 * options.max_side,
            limit: INTERLEAVING_LIMIT,
        });
    }
    let mut joint = Check::new("joint pmf = enumeration");
    let mut mass = Check::new("total mass = 1");
    let mut hist = Check::new("histograms uniform");
    let mut cond = Check::new("trajectory | histogram");
    let mut two = Check::new("two-colour urn");
    let mut dkw = Check::new("DKW tail dominance");
    let mut perturbed = options.perturb;
    for (n, m) in pairs_up_to(options.max_size) {
        let law = enumerate_law_with_limit(n, m, options.max_size)?;
        let urn = exact_law(n, m);
        mass.expect(law.counts().mass().is_one(), || format!("n={n} m={m}"));
        for j in all_trajectories(n + 1, m) {
            let enumerated = law.probability(&j);
            let mut reference = exact(joint_pmf(&urn, &j)?);
            if perturbed {
                reference *= q(1001, 1000);
                perturbed = false;
            }
            joint.expect(enumerated == reference, || format!("n={n} m={m} j={j:?}"));
            let split = exact(histogram_pmf(&urn, &Histogram::of_trajectory(n, &j))?)
                * exact(trajectory_conditional_pmf(&urn, &j)?);
            cond.expect(split == enumerated, || format!("n={n} m={m} j={j:?}"));
        }
        let hists = law.histograms();
        let uniform = BigRational::new(BigInt::one(), binomial(n + m, m));
        hist.expect(
            hists.len() == binomial(n + m, m).try_into().unwrap_or(0usize),
            || format!("n={n} m={m}: {} histograms", hists.len()),
        );
        for (h, p) in hists.iter() {
            hist.expect(p == uniform, || format!("n={n} m={m} h={h:?}"));
        }
        for k0 in 0..=n + 1 {
            let alpha = if k0 == 0 {
                0.5 / (n + 1) as f64
            } else {
                k0 as f64 / (n + 1) as f64
            };
            if alpha >= 1.0 {
                continue;
            }
            let pushed = two_color_pushforward(&law, k0);
            for z in all_trajectories(2, m) {
                let z: Vec<bool> = z.into_iter().map(|c| c == 2).collect();
                let mut p = BigRational::one();
                for i in 0..m {
                    let (p0, p1) = two_color_sequential(&urn, alpha, &z[..i])?;
                    p *= exact(if z[i] { p1 } else { p0 });
                }
                two.expect(pushed.probability(&z) == p, || {
                    format!("n={n} m={m} k0={k0} z={z:?}")
                });
            }
        }
        let sup = law
            .counts()
            .pushforward(|j| sup_deviation(&ecdf(&PValueSet::new_unchecked(n, j.clone()))));
        for step in 1..=20u32 {
            let lambda = 0.05 * f64::from(step);
            let exact_lambda = rational_from_f64(lambda);
            let tail = sup.probability_of(|d| {
                BigRational::new(BigInt::from(*d.numer()), BigInt::from(*d.denom())) > exact_lambda
            });
            let bound = rational_from_f64(b_dkw(lambda, n, m));
            dkw.expect(tail <= bound, || format!("n={n} m={m} lambda={lambda}"));
        }
    }

    let mut chain = Check::new("chain rule");
    for (n, m) in pairs_up_to(options.max_size.min(8)) {
        let urn = exact_law(n, m);
        for j in all_trajectories(n + 1, m) {
            let mut p = BigRational::one();
            for i in 0..m {
                p *= exact(sequential_pmf(&urn, &j[..i], j[i])?);
            }
            chain.expect(p == exact(joint_pmf(&urn, &j)?), || {
                format!("n={n} m={m} j={j:?}")
            });
        }
    }

    let mut marques = Check::new("ecdf count law");
    let mut order = Check::new("order statistic cdf");
    let mut level = Check::new("level calibration");
    let side = options.max_side;
    for n in 1..=side {
        for m in 1..=side {
            let urn = exact_law(n, m);
            for &alpha in &MARQUES_ALPHAS {
                let k0 = grid_floor(alpha, n);
                let reference = exact_ecdf_count_law(n, m, k0)?;
                let mut sum = BigRational::zero();
                for (k, r) in reference.iter().enumerate() {
                    let p = exact(polya::ecdf_count_pmf(&urn, alpha, k)?);
                    marques.expect(&p == r, || format!("n={n} m={m} alpha={alpha} k={k}"));
                    sum += p;
                }
                marques.expect(sum.is_one(), || {
                    format!("n={n} m={m} alpha={alpha}: mass {sum}")
                });
            }
            for k in 1..=m {
                for ell in 0..=n + 1 {
                    let p = exact(order_statistic_cdf(&urn, k, ell)?);
                    order.expect(p == exact_order_statistic_cdf(n, m, k, ell)?, || {
                        format!("n={n} m={m} k={k} l={ell}")
                    });
                }
                // The Marques route must also agree directly.
                let direct: BigRational = (k..=m)
                    .map(|j| exact(ecdf_count_pmf_grid(&urn, n + 1, j).expect("valid")))
                    .fold(BigRational::zero(), |a, b| a + b);
                order.expect(direct.is_one(), || format!("n={n} m={m} k={k} at t=1"));
            }
            for &delta in &LEVEL_DELTAS {
                for &target in &LEVEL_TARGETS {
                    let cal = calibrate_level(&urn, target, delta)?;
                    let k = ((libm::floor(target * m as f64) as usize) + 1).min(m);
                    let oracle = exact_calibrated_level(n, m, k, delta)?;
                    level.expect(cal.level.index() == oracle, || {
                        format!(
                            "n={n} m={m} delta={delta} target={target}: {} vs {oracle}",
                            cal.level.index()
                        )
                    });
                }
                let zero = level_zero_explicit(n, m, delta)?;
                let oracle = exact_calibrated_level(n, m, 1, delta)?;
                level.expect(zero.index() == oracle, || {
                    format!(
                        "n={n} m={m} delta={delta}: explicit {} vs {oracle}",
                        zero.index()
                    )
                });
            }
        }
    }

    Ok([
        joint, mass, hist, cond, chain, two, marques, order, level, dkw,
    ]
    .into_iter()
    .map(Check::finish)
    .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_permutation_counts() {
        let mut v = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut v) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(v, vec![3, 2, 1, 0]);
    }

    #[test]
    fn small_laws() {
        let law = enumerate_law(1, 2).unwrap();
        assert_eq!(law.probability(&[1, 1]), q(1, 3));
        assert_eq!(law.probability(&[1, 2]), q(1, 6));
        assert!(law.counts().mass().is_one());
        let law = enumerate_law(2, 1).unwrap();
        for r in 1..=3 {
            assert_eq!(law.probability(&[r]), q(1, 3));
        }
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            enumerate_law(5, 5),
            Err(Error::SizeGuard { size: 10, limit: 9 })
        ));
        assert!(enumerate_law_with_limit(5, 5, 10).is_ok());
        assert!(enumerate_law_with_limit(6, 6, 12).is_err());
        assert!(enumerate_law(0, 3).is_err());
        assert!(enumerate_histograms(13, 12).is_err());
    }

    #[test]
    fn sup_deviation_n1_m1() {
        let law = exact_sup_deviation_law(1, 1).unwrap();
        assert_eq!(law.len(), 2);
        assert_eq!(law.probability(&Ratio::new(0, 1)), q(1, 2));
        assert_eq!(law.probability(&Ratio::new(1, 2)), q(1, 2));
    }

    #[test]
    fn interleaving_matches_permutations() {
        for (n, m) in pairs_up_to(8) {
            let full = enumerate_law(n, m).unwrap().histograms();
            let inter = enumerate_histograms(n, m).unwrap();
            for (h, p) in full.iter() {
                assert_eq!(inter.probability(h), p, "n={n} m={m}");
            }
            assert_eq!(
                exact_sup_deviation_law(n, m)
                    .unwrap()
                    .iter()
                    .collect::<Vec<_>>(),
                exact_sup_deviation_law_interleaved(n, m)
                    .unwrap()
                    .iter()
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn order_statistic_edges() {
        for n in 1..5 {
            for m in 1..5 {
                assert!(exact_order_statistic_cdf(n, m, 1, n + 1).unwrap().is_one());
                assert!(exact_order_statistic_cdf(n, m, m, 0).unwrap().is_zero());
            }
        }
        assert!(exact_order_statistic_cdf(2, 2, 3, 1).is_err());
    }

    #[test]
    fn verify_passes_and_detects_perturbation() {
        let opts = VerifyOptions {
            max_size: 6,
            max_side: 4,
            perturb: false,
        };
        let report = verify(opts).unwrap();
        for c in &report {
            assert!(c.passed, "{c:?}");
            assert!(c.instances > 0, "{c:?}");
        }
        let report = verify(VerifyOptions {
            perturb: true,
            ..opts
        })
        .unwrap();
        let failed: Vec<_> = report
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        assert_eq!(failed, vec!["joint pmf = enumeration"]);
        assert!(verify(VerifyOptions {
            max_size: 12,
            ..opts
        })
        .is_err());
    }
}
