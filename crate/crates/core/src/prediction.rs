//! Simultaneous conformal prediction intervals.
//!
//! With residual scores `S_i = |Y_i - mu(X_i)|`, the band at level `alpha`
//! is `C_i(alpha) = [mu(X_{n+i}) - r, mu(X_{n+i}) + r]` with
//! `r = S_(ceil((n+1)(1-alpha)))` (and `S_(n+1) = +inf`). Since
//! `{Y_{n+i} outside C_i(alpha)} = {p_i <= alpha}`, the false coverage
//! proportion of the band equals `F_m(alpha)`, and every envelope for the
//! p-value ecdf is an FCP bound holding uniformly in `alpha`.

use alloc::format;
use alloc::vec::Vec;

use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bounds::{lambda_dkw, DkwParams};
use crate::error::{check_closed_unit, check_open_unit, Error, Result};
use crate::grid::{grid_floor, GridLevel};
use crate::polya::{ecdf_count_pmf_grid, rising, PolyaLaw};
use crate::prob::{rational_from_f64, Probability};
use crate::rng::{self, StreamRng};
use crate::scores::{conformal_pvalues, ecdf, PValueSet, ScoreSet};

/// Intervals `centers[i] ± radius` at a grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBand {
    centers: Vec<f64>,
    radius: f64,
    requested_alpha: f64,
    level: GridLevel,
}

impl PredictionBand {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `+inf` when the effective level is below `1/(n+1)`, `-inf` (empty
    /// intervals) at level 1.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn requested_alpha(&self) -> f64 {
        self.requested_alpha
    }

    /// `alpha` snapped down to the grid.
    pub fn level(&self) -> GridLevel {
        self.level
    }

    pub fn contains(&self, i: usize, y: f64) -> bool {
        libm::fabs(y - self.centers[i]) <= self.radius
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.centers[i] - self.radius, self.centers[i] + self.radius)
    }
}

fn sorted_finite(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteScore { index, value });
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Band at level `alpha` from calibration residuals.
pub fn build_band(
    calibration_scores: &[f64],
    centers: &[f64],
    alpha: f64,
) -> Result<PredictionBand> {
    check_closed_unit("alpha", alpha)?;
    let sorted = sorted_finite(calibration_scores)?;
    let n = sorted.len();
    let level = GridLevel::floor(alpha, n);
    // ceil((n+1)(1 - l/(n+1))) = n + 1 - l
    let idx = n + 1 - level.index();
    let radius = match idx {
        0 => f64::NEG_INFINITY,
        i if i > n => f64::INFINITY,
        i => sorted[i - 1],
    };
    Ok(PredictionBand {
        centers: centers.to_vec(),
        radius,
        requested_alpha: alpha,
        level,
    })
}

/// `#{i : Y_{n+i} not in C_i} / m`.
pub fn fcp(band: &PredictionBand, outcomes: &[f64]) -> Result<Ratio<usize>> {
    if outcomes.len() != band.centers.len() {
        return Err(Error::LengthMismatch {
            expected: band.centers.len(),
            actual: outcomes.len(),
        });
    }
    if outcomes.is_empty() {
        return Err(Error::EmptyTest);
    }
    let misses = outcomes
        .iter()
        .enumerate()
        .filter(|&(i, &y)| !band.contains(i, y))
        .count();
    Ok(Ratio::new(misses, outcomes.len()))
}

/// `(alpha + lambda) 1{alpha >= 1/(n+1)}` for a given envelope width.
pub fn fcp_bound_with_lambda(alpha: f64, n: usize, lambda: f64) -> f64 {
    if grid_floor(alpha, n) == 0 {
        0.0
    } else {
        alpha + lambda
    }
}

/// `(alpha + lambda_dkw) 1{alpha >= 1/(n+1)}`, valid uniformly in `alpha`
/// with probability `1 - delta`.
pub fn fcp_bound_dkw(alpha: f64, params: &DkwParams) -> f64 {
    fcp_bound_with_lambda(alpha, params.n(), lambda_dkw(params))
}

/// `(alpha / delta) 1{alpha >= 1/(n+1)}` from the Simes inequality.
pub fn fcp_bound_simes(alpha: f64, delta: f64, n: usize) -> f64 {
    if grid_floor(alpha, n) == 0 {
        0.0
    } else {
        alpha / delta
    }
}

/// `P(p_(k) <= l/(n+1))` under `P_{n,m}`, summed from the two-colour law.
pub fn order_statistic_cdf(law: &PolyaLaw, k: usize, ell: usize) -> Result<Probability> {
    if k == 0 || k > law.m() {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "1..=m",
        });
    }
    let terms = (k..=law.m())
        .map(|j| ecdf_count_pmf_grid(law, ell, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(if law.is_exact() {
        let sum = terms
            .into_iter()
            .map(|p| p.into_exact().expect("exact mode"))
            .fold(BigRational::zero(), |a, b| a + b);
        Probability::Exact(sum)
    } else {
        let total: f64 = terms.iter().map(Probability::to_f64).sum();
        Probability::Log(libm::log(total.min(1.0)))
    })
}

fn at_most(p: &Probability, delta: f64) -> bool {
    match p {
        Probability::Exact(r) => *r <= rational_from_f64(delta),
        Probability::Log(_) => p.to_f64() <= delta,
    }
}

/// Outcome of [`calibrate_level`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCalibration {
    pub level: GridLevel,
    /// `P(p_(k+1) <= level)` at the chosen level.
    pub exceedance: Probability,
    /// Only `t = 0` qualifies: the band is the whole real line.
    pub empty: bool,
}

/// Largest grid `t` with `P(p_(floor(target m) + 1) <= t) <= delta`; the
/// band at that level then has `FCP <= target` with probability `1 - delta`.
pub fn calibrate_level(law: &PolyaLaw, target_fcp: f64, delta: f64) -> Result<LevelCalibration> {
    if !(0.0..1.0).contains(&target_fcp) {
        return Err(Error::OutOfRange {
            name: "target_fcp",
            value: target_fcp,
            range: "[0, 1)",
        });
    }
    check_open_unit("delta", delta)?;
    let k = libm::floor(target_fcp * law.m() as f64) as usize + 1;
    let k = k.min(law.m());
    let mut best = (0, Probability::zero());
    // The cdf is nondecreasing in the level; stop at the first failure.
    for ell in 1..=law.n() + 1 {
        let p = order_statistic_cdf(law, k, ell)?;
        if !at_most(&p, delta) {
            break;
        }
        best = (ell, p);
    }
    Ok(LevelCalibration {
        level: GridLevel::new(best.0, law.n()),
        exceedance: best.1,
        empty: best.0 == 0,
    })
}

/// `max { k/(n+1) : [(n-k+1)...(n-k+m)] / [(n+1)...(n+m)] >= 1 - delta }`,
/// 0 when no `k` in `1..=n+1` qualifies. Exact rational arithmetic.
pub fn level_zero_explicit(n: usize, m: usize, delta: f64) -> Result<GridLevel> {
    if n == 0 {
        return Err(Error::EmptyCalibration);
    }
    if m == 0 {
        return Err(Error::EmptyTest);
    }
    check_open_unit("delta", delta)?;
    let den = rising(n + 1, m);
    let target = BigRational::one() - rational_from_f64(delta);
    let ell = (1..=n + 1)
        .rev()
        .find(|&k| BigRational::new(rising(n + 1 - k, m), den.clone()) >= target)
        .unwrap_or(0);
    Ok(GridLevel::new(ell, n))
}

/// `alpha(L) = #{i <= n : S_i <= L} / (n+1)`: the band at this level has
/// radius at most `L` whenever it is nonzero.
pub fn alpha_for_radius(calibration_scores: &[f64], radius: f64) -> Result<GridLevel> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::OutOfRange {
            name: "radius",
            value: radius,
            range: "(0, inf)",
        });
    }
    let sorted = sorted_finite(calibration_scores)?;
    let count = sorted.partition_point(|&s| s <= radius);
    Ok(GridLevel::new(count, sorted.len()))
}

/// Regression mean `mu(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanFunction {
    #[default]
    Cos,
}

impl MeanFunction {
    pub fn eval(self, w: f64) -> f64 {
        match self {
            MeanFunction::Cos => libm::cos(w),
        }
    }
}

/// Covariate map `w -> x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `x = w`.
    Identity,
    /// `x = 0.6 w + w^2 / 25`.
    Quadratic,
}

impl Transform {
    pub fn eval(self, w: f64) -> f64 {
        match self {
            Transform::Identity => w,
            Transform::Quadratic => 0.6 * w + w * w / 25.0,
        }
    }
}

/// Synthetic regression with a covariate shift between training and
/// calibration/test data.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    pub n_train: usize,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub mean: MeanFunction,
    pub train_transform: Transform,
    pub shifted_transform: Transform,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n: 75,
            m: 75,
            sigma: 0.1,
            mean: MeanFunction::Cos,
            train_transform: Transform::Identity,
            shifted_transform: Transform::Quadratic,
            seed: 0,
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::InvalidConfig(
                "all sample sizes must be positive".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma = {} must be >= 0",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Covariate/outcome pairs of one synthetic draw.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionData {
    pub train: Vec<(f64, f64)>,
    pub calibration: Vec<(f64, f64)>,
    pub test: Vec<(f64, f64)>,
}

/// `W ~ Unif(0,5)`, `Y | W ~ N(mu(W), sigma^2)`, `X = f1(W)` for training
/// and `X = f2(W)` for calibration and test. Uses stream 0 of `config.seed`.
pub fn synth_regression(config: &RegressionConfig) -> Result<RegressionData> {
    config.validate()?;
    Ok(synth_regression_with(
        config,
        &mut rng::stream(config.seed, 0),
    ))
}

pub fn synth_regression_with<R: Rng + ?Sized>(
    config: &RegressionConfig,
    rng: &mut R,
) -> RegressionData {
    let noise = Normal::new(0.0, config.sigma).expect("sigma validated");
    let mut draw = |count: usize, transform: Transform| -> Vec<(f64, f64)> {
        (0..count)
            .map(|_| {
                let w = rng.random_range(0.0..5.0);
                let y = config.mean.eval(w) + noise.sample(rng);
                (transform.eval(w), y)
            })
            .collect()
    };
    let train = draw(config.n_train, config.train_transform);
    let calibration = draw(config.n, config.shifted_transform);
    let test = draw(config.m, config.shifted_transform);
    RegressionData {
        train,
        calibration,
        test,
    }
}

/// Built-in predictors; each is invariant under permutations of the pooled
/// calibration + test sample, so residual scores stay exchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// The true mean, evaluated at the latent `w` recovered from `x`.
    OracleMean,
    /// k-NN fit on training data, queried at the raw covariate.
    NaiveKnn { k: usize },
    /// k-NN queried after mapping each pooled covariate to the training
    /// covariate with the same empirical quantile.
    TransferKnn { k: usize },
}

impl Default for Predictor {
    fn default() -> Self {
        Predictor::TransferKnn { k: 25 }
    }
}

fn invert_transform(t: Transform, x: f64) -> f64 {
    match t {
        Transform::Identity => x,
        // x = 0.6 w + w^2/25  =>  w = (-0.6 + sqrt(0.36 + 4x/25)) * 12.5
        Transform::Quadratic => (-0.6 + libm::sqrt(0.36 + 0.16 * x)) * 12.5,
    }
}

struct Knn {
    xs: Vec<f64>,
    ys: Vec<f64>,
    k: usize,
}

impl Knn {
    fn fit(train: &[(f64, f64)], k: usize) -> Self {
        let mut pairs = train.to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            xs: pairs.iter().map(|p| p.0).collect(),
            ys: pairs.iter().map(|p| p.1).collect(),
            k: k.clamp(1, train.len()),
        }
    }

    fn predict(&self, q: f64) -> f64 {
        let len = self.xs.len();
        let mut hi = self.xs.partition_point(|&x| x < q);
        let mut lo = hi;
        let mut sum = 0.0;
        for _ in 0..self.k {
            let take_left = match (lo > 0, hi < len) {
                (true, true) => q - self.xs[lo - 1] <= self.xs[hi] - q,
                (true, false) => true,
                (false, _) => false,
            };
            if take_left {
                lo -= 1;
                sum += self.ys[lo];
            } else {
                sum += self.ys[hi];
                hi += 1;
            }
        }
        sum / self.k as f64
    }

    /// Empirical quantile of the training covariates.
    fn covariate_quantile(&self, q: f64) -> f64 {
        let idx = libm::floor(q * self.xs.len() as f64) as usize;
        self.xs[idx.min(self.xs.len() - 1)]
    }
}

/// Predictions `(calibration, test)` for one synthetic draw.
pub fn predict(
    predictor: Predictor,
    config: &RegressionConfig,
    data: &RegressionData,
) -> (Vec<f64>, Vec<f64>) {
    match predictor {
        Predictor::OracleMean => {
            let f = |&(x, _): &(f64, f64)| {
                config
                    .mean
                    .eval(invert_transform(config.shifted_transform, x))
            };
            (
                data.calibration.iter().map(f).collect(),
                data.test.iter().map(f).collect(),
            )
        }
        Predictor::NaiveKnn { k } => {
            let knn = Knn::fit(&data.train, k);
            let f = |&(x, _): &(f64, f64)| knn.predict(x);
            (
                data.calibration.iter().map(f).collect(),
                data.test.iter().map(f).collect(),
            )
        }
        Predictor::TransferKnn { k } => {
            let knn = Knn::fit(&data.train, k);
            let mut pool: Vec<f64> = data
                .calibration
                .iter()
                .chain(&data.test)
                .map(|p| p.0)
                .collect();
            pool.sort_by(f64::total_cmp);
            let size = pool.len() as f64;
            let f = |&(x, _): &(f64, f64)| {
                let rank = pool.partition_point(|&v| v < x) as f64;
                knn.predict(knn.covariate_quantile((rank + 0.5) / size))
            };
            (
                data.calibration.iter().map(f).collect(),
                data.test.iter().map(f).collect(),
            )
        }
    }
}

/// Residual scores and test-point centres for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub calibration_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
    pub test_centers: Vec<f64>,
    pub test_outcomes: Vec<f64>,
}

impl ResidualSample {
    pub fn pvalues(&self) -> Result<PValueSet> {
        conformal_pvalues(&ScoreSet::new(
            self.calibration_scores.clone(),
            self.test_scores.clone(),
        )?)
    }
}

pub fn residual_sample(
    predictor: Predictor,
    config: &RegressionConfig,
    data: &RegressionData,
) -> ResidualSample {
    let (cal_pred, test_pred) = predict(predictor, config, data);
    let resid = |pairs: &[(f64, f64)], pred: &[f64]| -> Vec<f64> {
        pairs
            .iter()
            .zip(pred)
            .map(|(&(_, y), &mu)| libm::fabs(y - mu))
            .collect()
    };
    ResidualSample {
        calibration_scores: resid(&data.calibration, &cal_pred),
        test_scores: resid(&data.test, &test_pred),
        test_centers: test_pred,
        test_outcomes: data.test.iter().map(|p| p.1).collect(),
    }
}

/// Replicated-coverage summary for the synthetic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FcpCoverage {
    pub reps: usize,
    pub delta: f64,
    pub lambda_dkw: f64,
    /// Replicates with `FCP > bound` at some grid level, DKW bound.
    pub dkw_violations: usize,
    /// Same for the Simes bound.
    pub simes_violations: usize,
    /// Per-level mean FCP over replicates, for `marginal_levels`.
    pub marginal_levels: Vec<f64>,
    pub marginal_miscoverage: Vec<f64>,
    /// Mean FCP at `marginal_levels`, per replicate standard deviation.
    pub marginal_sd: Vec<f64>,
    /// Replicates where `fcp(band) != F_m(alpha)` at some level (must be 0).
    pub identity_failures: usize,
    /// Mean over replicates of `FCP(alpha)` on the grid `l/(n+1)`, `l = 1..=n`.
    pub mean_fcp_curve: Vec<f64>,
}

impl FcpCoverage {
    pub fn dkw_rate(&self) -> f64 {
        self.dkw_violations as f64 / self.reps as f64
    }

    pub fn simes_rate(&self) -> f64 {
        self.simes_violations as f64 / self.reps as f64
    }
}

struct ReplicateFcp {
    dkw_violation: bool,
    simes_violation: bool,
    identity_failure: bool,
    marginal: Vec<f64>,
    curve: Vec<f64>,
}

fn replicate_fcp(
    config: &RegressionConfig,
    predictor: Predictor,
    lambda: f64,
    delta: f64,
    marginal_levels: &[f64],
    rng: &mut StreamRng,
) -> ReplicateFcp {
    let data = synth_regression_with(config, rng);
    let sample = residual_sample(predictor, config, &data);
    let n = config.n;
    let e = ecdf(&sample.pvalues().expect("continuous scores have no ties"));
    let mut out = ReplicateFcp {
        dkw_violation: false,
        simes_violation: false,
        identity_failure: false,
        marginal: Vec::with_capacity(marginal_levels.len()),
        curve: Vec::with_capacity(n),
    };
    let mut sorted = sample.calibration_scores.clone();
    sorted.sort_by(f64::total_cmp);
    for ell in 1..=n {
        let alpha = ell as f64 / (n + 1) as f64;
        // Band radius S_(n+1-l) and its realized FCP.
        let radius = sorted[n - ell];
        let misses = sample
            .test_outcomes
            .iter()
            .zip(&sample.test_centers)
            .filter(|(&y, &c)| libm::fabs(y - c) > radius)
            .count();
        if misses != e.count_at(ell) {
            out.identity_failure = true;
        }
        let fcp = misses as f64 / config.m as f64;
        out.curve.push(fcp);
        if fcp > fcp_bound_with_lambda(alpha, n, lambda) {
            out.dkw_violation = true;
        }
        if fcp > fcp_bound_simes(alpha, delta, n) {
            out.simes_violation = true;
        }
    }
    for &a in marginal_levels {
        out.marginal.push(e.eval(a));
    }
    out
}

/// Runs `reps` independent draws of the synthetic regression and counts
/// failures of the uniform FCP bounds.
pub fn simulate_fcp_coverage(
    config: &RegressionConfig,
    predictor: Predictor,
    delta: f64,
    reps: usize,
    marginal_levels: &[f64],
) -> Result<FcpCoverage> {
    config.validate()?;
    check_open_unit("delta", delta)?;
    if reps == 0 {
        return Err(Error::TooFewReplicates { reps, min: 1 });
    }
    let lambda = lambda_dkw(&DkwParams::new(config.n, config.m, delta)?);
    let results = rng::map_replicates(config.seed, reps, |_, rng| {
        replicate_fcp(config, predictor, lambda, delta, marginal_levels, rng)
    });
    let r = reps as f64;
    let mut marginal = alloc::vec![0.0; marginal_levels.len()];
    let mut marginal_sq = alloc::vec![0.0; marginal_levels.len()];
    let mut curve = alloc::vec![0.0; config.n];
    for res in &results {
        for (i, v) in res.marginal.iter().enumerate() {
            marginal[i] += v / r;
            marginal_sq[i] += v * v / r;
        }
        for (i, v) in res.curve.iter().enumerate() {
            curve[i] += v / r;
        }
    }
    let marginal_sd = marginal
        .iter()
        .zip(&marginal_sq)
        .map(|(m1, m2)| libm::sqrt((m2 - m1 * m1).max(0.0)))
        .collect();
    Ok(FcpCoverage {
        reps,
        delta,
        lambda_dkw: lambda,
        dkw_violations: results.iter().filter(|x| x.dkw_violation).count(),
        simes_violations: results.iter().filter(|x| x.simes_violation).count(),
        marginal_levels: marginal_levels.to_vec(),
        marginal_miscoverage: marginal,
        marginal_sd,
        identity_failures: results.iter().filter(|x| x.identity_failure).count(),
        mean_fcp_curve: curve,
    })
}
