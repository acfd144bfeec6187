//! The universal law `P_{n,m}` of `m` conformal p-values with `n`
//! calibration points.
//!
//! Writing `j_i = (n+1) p_i`, the ranks behave like the colours drawn from
//! a Pólya urn that starts with one ball of each of `n + 1` colours and
//! gets an extra ball of the drawn colour after each draw. Consequences
//! exposed here:
//!
//! * joint pmf `M(j)! n! / (n+m)!`, with `M(j)!` the product of the
//!   factorials of the colour multiplicities;
//! * sequential pmf `(1 + #{k <= i : j_k = l}) / (n + 1 + i)`;
//! * the colour histogram is uniform over compositions of `m` into `n + 1`
//!   parts, and given the histogram the trajectory is uniform;
//! * grouping colours into `{p <= alpha}` / `{p > alpha}` gives a two-colour
//!   urn, hence a closed form for the law of `m F_m(alpha)`.
//!
//! Exact pmfs use big rationals; beyond [`EXACT_LIMIT`](crate::prob::EXACT_LIMIT)
//! they switch to sums of log-factorials.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{check_open_unit, Error, Result};
use crate::grid::grid_floor;
use crate::prob::{Arithmetic, Probability};
use crate::rng::{self, StreamRng};
use crate::scores::PValueSet;
use crate::special::{ln_binomial, ln_factorial};

/// Handle on `P_{n,m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyaLaw {
    n: usize,
    m: usize,
    arithmetic: Arithmetic,
}

impl PolyaLaw {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyCalibration);
        }
        if m == 0 {
            return Err(Error::EmptyTest);
        }
        Ok(Self {
            n,
            m,
            arithmetic: Arithmetic::Auto,
        })
    }

    pub fn with_arithmetic(mut self, arithmetic: Arithmetic) -> Self {
        self.arithmetic = arithmetic;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn colors(&self) -> usize {
        self.n + 1
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn is_exact(&self) -> bool {
        self.arithmetic.is_exact(self.n, self.m)
    }

    fn check_colors(&self, j: &[usize]) -> Result<()> {
        match j.iter().find(|&&c| c == 0 || c > self.n + 1) {
            Some(&rank) => Err(Error::RankOutOfRange {
                rank,
                max: self.n + 1,
            }),
            None => Ok(()),
        }
    }
}

/// Uniform pseudo-scores `U_1..U_n`, kept sorted.
///
/// Given `U`, the p-values are i.i.d. from `P^U`, which puts mass
/// `U_(l) - U_(l-1)` on rank `l` (with `U_(0) = 0`, `U_(n+1) = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoScoreVector {
    sorted: Vec<f64>,
}

impl PseudoScoreVector {
    pub fn new(mut u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if let Some(&bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                name: "pseudo-score",
                value: bad,
                range: "[0, 1]",
            });
        }
        u.sort_by(f64::total_cmp);
        Ok(Self { sorted: u })
    }

    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        u.sort_by(f64::total_cmp);
        Self { sorted: u }
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn order_statistics(&self) -> &[f64] {
        &self.sorted
    }

    /// Atoms of `P^U` on ranks `1..=n+1`.
    pub fn atoms(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.sorted.len() + 1);
        for &u in self.sorted.iter().chain(core::iter::once(&1.0)) {
            out.push(u - prev);
            prev = u;
        }
        out
    }

    /// `F^U(t) = P^U(p <= t)` on the grid: `U_(floor((n+1) t))`.
    pub fn cdf(&self, t: f64) -> f64 {
        match grid_floor(t, self.n()) {
            0 => 0.0,
            l if l > self.n() => 1.0,
            l => self.sorted[l - 1],
        }
    }

    /// One draw from `P^U`, as a rank.
    pub fn draw_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let v: f64 = rng.random();
        1 + self.sorted.partition_point(|&u| u < v)
    }
}

/// Colour histogram of a trajectory: `bins[l - 1] = #{i : j_i = l}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Histogram {
    bins: Vec<usize>,
}

impl Histogram {
    pub fn new(bins: Vec<usize>) -> Self {
        Self { bins }
    }

    pub fn of_trajectory(n: usize, j: &[usize]) -> Self {
        let mut bins = vec![0; n + 1];
        for &c in j {
            bins[c - 1] += 1;
        }
        Self { bins }
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn total(&self) -> usize {
        self.bins.iter().sum()
    }
}

pub(crate) fn factorial(k: usize) -> BigInt {
    (2..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `a (a+1) ... (a+len-1)`, empty product 1.
pub(crate) fn rising(a: usize, len: usize) -> BigInt {
    (a..a + len).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn ln_rising(a: usize, len: usize) -> f64 {
    if len == 0 {
        0.0
    } else if a == 0 {
        f64::NEG_INFINITY
    } else {
        ln_factorial((a + len - 1) as u64) - ln_factorial((a - 1) as u64)
    }
}

pub(crate) fn binomial(a: usize, b: usize) -> BigInt {
    if b > a {
        return BigInt::zero();
    }
    rising(a - b + 1, b) / factorial(b)
}

fn ratio(num: BigInt, den: BigInt) -> Probability {
    Probability::Exact(BigRational::new(num, den))
}

/// One urn trajectory.
pub fn urn_draw<R: Rng + ?Sized>(law: &PolyaLaw, rng: &mut R) -> PValueSet {
    let colors = law.n + 1;
    let mut drawn: Vec<usize> = Vec::with_capacity(law.m);
    for i in 0..law.m {
        // Balls: one per colour plus one per previous draw.
        let ball = rng.random_range(0..colors + i);
        let c = if ball < colors {
            ball + 1
        } else {
            drawn[ball - colors]
        };
        drawn.push(c);
    }
    PValueSet::new_unchecked(law.n, drawn)
}

/// `reps` independent urn trajectories; replicate `r` uses stream `r`.
pub fn sample_urn(law: &PolyaLaw, seed: u64, reps: usize) -> Vec<PValueSet> {
    rng::map_replicates(seed, reps, |_, rng| urn_draw(law, rng))
}

/// One draw through `U ~ Unif[0,1]^n`, then `m` i.i.d. ranks from `P^U`.
pub fn representation_draw(law: &PolyaLaw, rng: &mut StreamRng) -> PValueSet {
    let u = PseudoScoreVector::sample(law.n, rng);
    sample_given(&u, law.m, rng)
}

/// `m` i.i.d. ranks from `P^U` for a fixed `U`.
pub fn sample_given<R: Rng + ?Sized>(u: &PseudoScoreVector, m: usize, rng: &mut R) -> PValueSet {
    let ranks = (0..m).map(|_| u.draw_rank(rng)).collect();
    PValueSet::new_unchecked(u.n(), ranks)
}

pub fn sample_representation(law: &PolyaLaw, seed: u64, reps: usize) -> Vec<PValueSet> {
    rng::map_replicates(seed, reps, |_, rng| representation_draw(law, rng))
}

/// `P((n+1) p = j) = M(j)! n! / (n+m)!`.
pub fn joint_pmf(law: &PolyaLaw, j: &[usize]) -> Result<Probability> {
    if j.len() != law.m {
        return Err(Error::LengthMismatch {
            expected: law.m,
            actual: j.len(),
        });
    }
    law.check_colors(j)?;
    let h = Histogram::of_trajectory(law.n, j);
    Ok(if law.is_exact() {
        let num = h
            .bins
            .iter()
            .fold(factorial(law.n), |acc, &b| acc * factorial(b));
        ratio(num, factorial(law.n + law.m))
    } else {
        let ln = h.bins.iter().map(|&b| ln_factorial(b as u64)).sum::<f64>()
            + ln_factorial(law.n as u64)
            - ln_factorial((law.n + law.m) as u64);
        Probability::Log(ln)
    })
}

/// `P(j_{i+1} = next | j_1..j_i = history) = (1 + #{k : history_k = next}) / (n+1+i)`.
pub fn sequential_pmf(law: &PolyaLaw, history: &[usize], next: usize) -> Result<Probability> {
    if history.len() >= law.m {
        return Err(Error::LengthMismatch {
            expected: law.m - 1,
            actual: history.len(),
        });
    }
    law.check_colors(history)?;
    law.check_colors(&[next])?;
    let same = history.iter().filter(|&&c| c == next).count();
    Ok(Probability::ratio(
        (1 + same) as u64,
        (law.n + 1 + history.len()) as u64,
    ))
}

/// `1 / binom(n+m, m)` for any histogram with total `m`.
pub fn histogram_pmf(law: &PolyaLaw, h: &Histogram) -> Result<Probability> {
    if h.bins.len() != law.n + 1 {
        return Err(Error::LengthMismatch {
            expected: law.n + 1,
            actual: h.bins.len(),
        });
    }
    let sum = h.total();
    if sum != law.m {
        return Err(Error::HistogramSum {
            sum,
            expected: law.m,
        });
    }
    Ok(if law.is_exact() {
        ratio(BigInt::one(), binomial(law.n + law.m, law.m))
    } else {
        Probability::Log(-ln_binomial((law.n + law.m) as u64, law.m as u64))
    })
}

/// `P(trajectory = j | histogram = M(j)) = M(j)! / m!`.
pub fn trajectory_conditional_pmf(law: &PolyaLaw, j: &[usize]) -> Result<Probability> {
    if j.len() != law.m {
        return Err(Error::LengthMismatch {
            expected: law.m,
            actual: j.len(),
        });
    }
    law.check_colors(j)?;
    let h = Histogram::of_trajectory(law.n, j);
    Ok(if law.is_exact() {
        let num = h
            .bins
            .iter()
            .fold(BigInt::one(), |acc, &b| acc * factorial(b));
        ratio(num, factorial(law.m))
    } else {
        let ln = h.bins.iter().map(|&b| ln_factorial(b as u64)).sum::<f64>()
            - ln_factorial(law.m as u64);
        Probability::Log(ln)
    })
}

/// `P(F_m(alpha) = k/m)`.
///
/// The event `{p_i <= alpha}` is `{rank_i <= k0}` with
/// `k0 = floor(alpha (n+1))`, the number of grid atoms in `(0, alpha]`.
/// The two-colour urn then gives
/// `binom(m,k) [(n-k0+1)...(n-k0+m-k)] [k0...(k0+k-1)] / [(n+1)...(n+m)]`.
pub fn ecdf_count_pmf(law: &PolyaLaw, alpha: f64, k: usize) -> Result<Probability> {
    check_open_unit("alpha", alpha)?;
    ecdf_count_pmf_grid(law, grid_floor(alpha, law.n), k)
}

/// [`ecdf_count_pmf`] at the grid point `k0 / (n+1)`, `k0` in `0..=n+1`.
pub fn ecdf_count_pmf_grid(law: &PolyaLaw, k0: usize, k: usize) -> Result<Probability> {
    let (n, m) = (law.n, law.m);
    if k0 > n + 1 {
        return Err(Error::RankOutOfRange {
            rank: k0,
            max: n + 1,
        });
    }
    if k > m {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "0..=m",
        });
    }
    Ok(if law.is_exact() {
        let num = binomial(m, k) * rising(n + 1 - k0, m - k) * rising(k0, k);
        ratio(num, rising(n + 1, m))
    } else {
        let ln = ln_binomial(m as u64, k as u64) + ln_rising(n + 1 - k0, m - k) + ln_rising(k0, k)
            - ln_rising(n + 1, m);
        Probability::Log(ln)
    })
}

/// The whole law of `m F_m(k0/(n+1))`, indexed by `k = 0..=m`.
pub fn ecdf_count_law_grid(law: &PolyaLaw, k0: usize) -> Result<Vec<Probability>> {
    (0..=law.m)
        .map(|k| ecdf_count_pmf_grid(law, k0, k))
        .collect()
}

/// Law of `Z_{i+1} = 1{p_{i+1} > alpha}` given `Z_1..Z_i` (`true` = above).
///
/// Returns `(P(Z = 0), P(Z = 1))`: a two-colour urn started with
/// `floor(alpha (n+1))` zeros and `ceil((1-alpha)(n+1))` ones.
pub fn two_color_sequential(
    law: &PolyaLaw,
    alpha: f64,
    history: &[bool],
) -> Result<(Probability, Probability)> {
    check_open_unit("alpha", alpha)?;
    let zeros0 = grid_floor(alpha, law.n);
    let ones0 = law.n + 1 - zeros0;
    let ones = history.iter().filter(|&&z| z).count();
    let zeros = history.len() - ones;
    let den = (law.n + 1 + history.len()) as u64;
    Ok((
        Probability::ratio((zeros0 + zeros) as u64, den),
        Probability::ratio((ones0 + ones) as u64, den),
    ))
}
