//! Template envelopes for the p-value ecdf.
//!
//! A template is a family of thresholds `t_k(lambda)`, `k` in a set
//! `K ⊆ {1..m}`, increasing in `lambda` with `t_k(0) = 0`. Calibrating
//! `lambda` on simulated draws from `P_{n,m}` gives
//! `P(for all k in K: F_m(t_k(lambda*)) <= k/m) >= 1 - delta`.

use alloc::format;
use alloc::vec::Vec;

use crate::bounds::{check_reps, upper_order_index};
use crate::error::{check_open_unit, Error, Result};
use crate::polya::{urn_draw, PolyaLaw};
use crate::rng;
use crate::scores::PValueSet;
use crate::special::{beta_quantile, incomplete_beta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    /// `t_k(lambda) = k lambda / m`.
    Linear,
    /// `t_k(lambda)` = `lambda`-quantile of `Beta(k, m + 1 - k)`.
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    kind: TemplateKind,
    m: usize,
    k_set: Vec<usize>,
}

fn normalize_k_set(m: usize, mut k_set: Vec<usize>) -> Result<Vec<usize>> {
    if k_set.is_empty() {
        return Err(Error::EmptyKSet);
    }
    if let Some(&bad) = k_set.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::InvalidKSet(format!("{bad} is outside 1..={m}")));
    }
    k_set.sort_unstable();
    k_set.dedup();
    Ok(k_set)
}

/// Linear template over `K`.
pub fn linear_template(m: usize, k_set: Vec<usize>) -> Result<Template> {
    Ok(Template {
        kind: TemplateKind::Linear,
        m,
        k_set: normalize_k_set(m, k_set)?,
    })
}

/// Beta template over `K`.
pub fn beta_template(m: usize, k_set: Vec<usize>) -> Result<Template> {
    Ok(Template {
        kind: TemplateKind::Beta,
        m,
        k_set: normalize_k_set(m, k_set)?,
    })
}

/// `{1 + k ceil(ln m) : k >= 1} ∩ {1..m}`; falls back to `{1}` when that
/// is empty (`m <= 2`).
pub fn default_beta_k_set(m: usize) -> Vec<usize> {
    let step = (libm::ceil(libm::log(m as f64)) as usize).max(1);
    let set: Vec<usize> = (1..)
        .map(|k| 1 + k * step)
        .take_while(|&v| v <= m)
        .collect();
    if set.is_empty() {
        alloc::vec![1]
    } else {
        set
    }
}

/// All of `{1..m}`.
pub fn full_k_set(m: usize) -> Vec<usize> {
    (1..=m).collect()
}

impl Template {
    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_set(&self) -> &[usize] {
        &self.k_set
    }

    /// `t_k(lambda)`, `lambda` in `[0, 1]`.
    pub fn threshold(&self, k: usize, lambda: f64) -> f64 {
        match self.kind {
            TemplateKind::Linear => k as f64 * lambda / self.m as f64,
            TemplateKind::Beta => beta_quantile(lambda, k as f64, (self.m + 1 - k) as f64),
        }
    }

    /// `t_k^{-1}(p)`. The linear inverse is not capped at 1.
    pub fn inverse(&self, k: usize, p: f64) -> f64 {
        match self.kind {
            TemplateKind::Linear => self.m as f64 * p / k as f64,
            TemplateKind::Beta => incomplete_beta(p, k as f64, (self.m + 1 - k) as f64),
        }
    }
}

/// Which order statistic enters the calibration statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderIndex {
    /// `min_k t_k^{-1}(p_(k))`, the calibration formula as displayed.
    #[default]
    Same,
    /// `min_k t_k^{-1}(p_(k+1))` with `p_(m+1) = +inf`; matches the envelope
    /// event exactly. `Same` is never larger, so it is the conservative one.
    Next,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedEnvelope {
    pub template: Template,
    pub lambda_star: f64,
    /// `t_k(lambda_star)` for `k` in `K`, same order as `template.k_set()`.
    pub thresholds: Vec<f64>,
    /// No candidate met the coverage constraint; `lambda_star = 0`.
    pub vacuous: bool,
    pub order_index: OrderIndex,
    pub reps: usize,
}

impl CalibratedEnvelope {
    /// Whether `F_m(t_k) <= k/m` for every `k` in `K`.
    pub fn holds(&self, pvals: &PValueSet) -> bool {
        self.template
            .k_set
            .iter()
            .zip(&self.thresholds)
            .all(|(&k, &t)| pvals.count_at_most(t) <= k)
    }
}

/// Candidate set `{t_k^{-1}(l/(n+1)) : k in K, l in 1..=n+1} ∩ [0, 1]`, sorted.
pub fn candidate_lambdas(template: &Template, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = template
        .k_set
        .iter()
        .flat_map(|&k| (1..=n + 1).map(move |l| template.inverse(k, l as f64 / (n + 1) as f64)))
        .filter(|v| (0.0..=1.0).contains(v))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `min_{k in K} t_k^{-1}(p_(k))` (or `p_(k+1)`) for one draw.
pub fn template_statistic(template: &Template, pvals: &PValueSet, order: OrderIndex) -> f64 {
    let sorted = pvals.sorted_ranks();
    let np1 = (pvals.n() + 1) as f64;
    template
        .k_set
        .iter()
        .filter_map(|&k| {
            let idx = match order {
                OrderIndex::Same => k - 1,
                OrderIndex::Next => k,
            };
            sorted
                .get(idx)
                .map(|&r| template.inverse(k, r as f64 / np1))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn calibrate_template(
    law: &PolyaLaw,
    template: &Template,
    delta: f64,
    seed: u64,
    reps: usize,
) -> Result<CalibratedEnvelope> {
    calibrate_template_with(law, template, delta, seed, reps, OrderIndex::Same)
}

/// `lambda* = max { lambda in Lambda : P(stat > lambda) >= 1 - delta }`,
/// the probability estimated from `reps` urn draws.
///
/// With the simulated statistics sorted, at least `c = ceil((1-delta) reps)`
/// of them exceed `lambda` iff `lambda` is below the `(reps - c + 1)`-th
/// smallest, so one pass suffices.
pub fn calibrate_template_with(
    law: &PolyaLaw,
    template: &Template,
    delta: f64,
    seed: u64,
    reps: usize,
    order_index: OrderIndex,
) -> Result<CalibratedEnvelope> {
    check_open_unit("delta", delta)?;
    check_reps(reps)?;
    if template.m != law.m() {
        return Err(Error::InvalidConfig(format!(
            "template built for m = {} but the law has m = {}",
            template.m,
            law.m()
        )));
    }
    let mut stats = rng::map_replicates(seed, reps, |_, rng| {
        template_statistic(template, &urn_draw(law, rng), order_index)
    });
    stats.sort_by(f64::total_cmp);
    let needed = upper_order_index(delta, reps);
    let cutoff = stats[reps - needed];

    let candidates = candidate_lambdas(template, law.n());
    let pick = candidates.iter().rev().find(|&&l| l < cutoff).copied();
    let (lambda_star, vacuous) = match pick {
        Some(l) => (l, false),
        None => (0.0, true),
    };
    let thresholds = template
        .k_set
        .iter()
        .map(|&k| template.threshold(k, lambda_star))
        .collect();
    Ok(CalibratedEnvelope {
        template: template.clone(),
        lambda_star,
        thresholds,
        vacuous,
        order_index,
        reps,
    })
}
