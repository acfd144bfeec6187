//! Conformal p-values from calibration and test scores.
//!
//! A p-value is stored as its integer rank `(n+1) p` in `1..=n+1`; every
//! comparison against a grid threshold is an integer comparison.

use alloc::format;
use alloc::vec::Vec;

use num_rational::Ratio;
use rand::Rng;
use rand_distr::Open01;

use crate::error::{Error, Result};
use crate::grid::grid_floor;
use crate::rng;

/// Nonconformity scores: `n` calibration values followed by `m` test values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    calibration: Vec<f64>,
    test: Vec<f64>,
}

impl ScoreSet {
    /// Rejects empty blocks and non-finite scores.
    pub fn new(calibration: Vec<f64>, test: Vec<f64>) -> Result<Self> {
        if calibration.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if test.is_empty() {
            return Err(Error::EmptyTest);
        }
        if let Some((index, &value)) = calibration
            .iter()
            .chain(test.iter())
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFiniteScore { index, value });
        }
        Ok(Self { calibration, test })
    }

    pub fn calibration(&self) -> &[f64] {
        &self.calibration
    }

    pub fn test(&self) -> &[f64] {
        &self.test
    }

    pub fn n(&self) -> usize {
        self.calibration.len()
    }

    pub fn m(&self) -> usize {
        self.test.len()
    }

    fn sorted_all(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.calibration.iter().chain(&self.test).copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Whether any two of the `n + m` scores coincide.
    pub fn has_ties(&self) -> bool {
        self.sorted_all().windows(2).any(|w| w[0] == w[1])
    }

    /// Smallest strictly positive gap between two scores, if any.
    pub fn min_gap(&self) -> Option<f64> {
        self.sorted_all()
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// Tie-breaking noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieBreak {
    /// Noise width used when every score is identical. Zero disables it.
    pub floor_gap: f64,
}

impl Default for TieBreak {
    fn default() -> Self {
        Self { floor_gap: 1e-12 }
    }
}

const TIE_ATTEMPTS: u64 = 8;

/// Adds i.i.d. uniform noise on `(-g/2, g/2)` to every score, where `g` is
/// a quarter of the smallest nonzero gap (or `floor_gap` when all scores
/// coincide). Distinct inputs keep their strict order.
pub fn break_ties(scores: &ScoreSet, seed: u64) -> Result<ScoreSet> {
    break_ties_with(scores, seed, TieBreak::default())
}

pub fn break_ties_with(scores: &ScoreSet, seed: u64, config: TieBreak) -> Result<ScoreSet> {
    let width = match scores.min_gap() {
        Some(gap) => gap / 4.0,
        None if config.floor_gap > 0.0 => config.floor_gap,
        None => {
            return Err(Error::TieUnresolvable(
                "all scores are identical and the floor gap is zero".into(),
            ))
        }
    };
    let half = width / 2.0;
    for attempt in 0..TIE_ATTEMPTS {
        let mut rng = rng::stream(seed, attempt);
        let mut jitter = |v: &f64| {
            let u: f64 = rng.sample(Open01);
            v + (2.0 * u - 1.0) * half
        };
        let calibration: Vec<f64> = scores.calibration.iter().map(&mut jitter).collect();
        let test: Vec<f64> = scores.test.iter().map(&mut jitter).collect();
        let out = ScoreSet { calibration, test };
        if !out.has_ties() {
            return Ok(out);
        }
    }
    Err(Error::TieUnresolvable(format!(
        "noise of width {width:e} is below the floating-point resolution of the scores"
    )))
}

/// Test p-values as ranks out of `n + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PValueSet {
    n: usize,
    ranks: Vec<usize>,
}

impl PValueSet {
    pub fn new(n: usize, ranks: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyCalibration);
        }
        if ranks.is_empty() {
            return Err(Error::EmptyTest);
        }
        if let Some(&rank) = ranks.iter().find(|&&r| r == 0 || r > n + 1) {
            return Err(Error::RankOutOfRange { rank, max: n + 1 });
        }
        Ok(Self { n, ranks })
    }

    pub(crate) fn new_unchecked(n: usize, ranks: Vec<usize>) -> Self {
        debug_assert!(ranks.iter().all(|&r| (1..=n + 1).contains(&r)));
        Self { n, ranks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn into_ranks(self) -> Vec<usize> {
        self.ranks
    }

    pub fn pvalue(&self, i: usize) -> f64 {
        self.ranks[i] as f64 / (self.n + 1) as f64
    }

    pub fn pvalue_exact(&self, i: usize) -> Ratio<usize> {
        Ratio::new(self.ranks[i], self.n + 1)
    }

    pub fn pvalues(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.pvalue(i)).collect()
    }

    pub fn sorted_ranks(&self) -> Vec<usize> {
        let mut r = self.ranks.clone();
        r.sort_unstable();
        r
    }

    /// `#{i : p_i <= t}`.
    pub fn count_at_most(&self, t: f64) -> usize {
        let ell = grid_floor(t, self.n);
        self.ranks.iter().filter(|&&r| r <= ell).count()
    }

    /// The p-values restricted to `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ranks = indices
            .iter()
            .map(|&i| {
                self.ranks.get(i).copied().ok_or(Error::LengthMismatch {
                    expected: self.m(),
                    actual: i + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PValueSet::new(self.n, ranks)
    }
}

/// `ranks[i] = 1 + #{j <= n : S_j >= S_{n+i}}`.
pub fn conformal_pvalues(scores: &ScoreSet) -> Result<PValueSet> {
    if scores.has_ties() {
        return Err(Error::TiesPresent);
    }
    let mut cal = scores.calibration.clone();
    cal.sort_by(f64::total_cmp);
    let n = cal.len();
    let ranks = scores
        .test
        .iter()
        .map(|&s| 1 + n - cal.partition_point(|&c| c < s))
        .collect();
    Ok(PValueSet::new_unchecked(n, ranks))
}

/// Empirical distribution function of the p-values, tabulated on the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcdfStep {
    n: usize,
    m: usize,
    /// `counts[l - 1] = #{i : rank_i <= l}` for `l = 1..=n+1`.
    counts: Vec<usize>,
}

impl EcdfStep {
    pub fn from_counts(n: usize, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != n + 1 {
            return Err(Error::LengthMismatch {
                expected: n + 1,
                actual: counts.len(),
            });
        }
        if counts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "ecdf counts must be nondecreasing".into(),
            ));
        }
        let m = counts[n];
        if m == 0 {
            return Err(Error::EmptyTest);
        }
        Ok(Self { n, m, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `#{i : rank_i <= ell}` for `ell` in `0..=n+1`.
    pub fn count_at(&self, ell: usize) -> usize {
        match ell {
            0 => 0,
            l => self.counts[l.min(self.n + 1) - 1],
        }
    }

    /// `F_m(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.count_at(grid_floor(t, self.n)) as f64 / self.m as f64
    }

    pub fn eval_exact(&self, t: f64) -> Ratio<usize> {
        Ratio::new(self.count_at(grid_floor(t, self.n)), self.m)
    }
}

pub fn ecdf(pvals: &PValueSet) -> EcdfStep {
    let n = pvals.n;
    let mut counts = alloc::vec![0usize; n + 1];
    for &r in &pvals.ranks {
        counts[r - 1] += 1;
    }
    for l in 1..=n {
        counts[l] += counts[l - 1];
    }
    EcdfStep {
        n,
        m: pvals.m(),
        counts,
    }
}

/// `sup_t (F_m(t) - I_n(t))`, exact.
///
/// Both functions are constant on `[l/(n+1), (l+1)/(n+1))`, so the
/// supremum is the maximum over grid points `l = 0..=n+1`. The value at
/// `l = 0` is zero, hence the result is never negative.
pub fn sup_deviation(e: &EcdfStep) -> Ratio<i64> {
    let np1 = (e.n + 1) as i64;
    let m = e.m as i64;
    let best = (0..=e.n + 1)
        .map(|l| e.count_at(l) as i64 * np1 - l as i64 * m)
        .max()
        .unwrap_or(0);
    Ratio::new(best, m * np1)
}
