//! One pass/fail line per acceptance criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use conformal_urn::bounds::{
    b_dkw, b_dkw_full, lambda_dkw, lambda_numerical, simes_check, simes_statistic,
    simulate_sup_deviations, DkwParams,
};
use conformal_urn::grid::grid_floor;
use conformal_urn::novelty::{simulate_nd_coverage, NdConfig};
use conformal_urn::oracle::{
    enumerate_law, exact_calibrated_level, exact_ecdf_count_law, exact_order_statistic_cdf,
};
use conformal_urn::polya::{
    ecdf_count_pmf, joint_pmf, representation_draw, sample_urn, sequential_pmf, Histogram,
};
use conformal_urn::prediction::{
    calibrate_level, level_zero_explicit, order_statistic_cdf, simulate_fcp_coverage, Predictor,
    RegressionConfig,
};
use conformal_urn::prob::{rational_from_f64, Arithmetic};
use conformal_urn::rng::map_replicates;
use conformal_urn::templates::{
    beta_template, calibrate_template, default_beta_k_set, full_k_set, linear_template, Template,
};
use conformal_urn::{PValueSet, PolyaLaw};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sigma(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn exact_law(n: usize, m: usize) -> PolyaLaw {
    PolyaLaw::new(n, m)
        .unwrap()
        .with_arithmetic(Arithmetic::Exact)
}

fn exact(p: conformal_urn::Probability) -> BigRational {
    p.into_exact().unwrap()
}

fn pairs_up_to(size: usize) -> Vec<(usize, usize)> {
    (2..=size)
        .flat_map(|s| (1..s).map(move |n| (n, s - n)))
        .collect()
}

fn trajectories(colors: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
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

fn exact_law_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = None;
    for (n, m) in pairs_up_to(9) {
        let law = enumerate_law(n, m).unwrap();
        let urn = exact_law(n, m);
        if !law.counts().mass().is_one() {
            bad.get_or_insert(format!("mass n={n} m={m}"));
        }
        for j in trajectories(n + 1, m) {
            checked += 1;
            if law.probability(&j) != exact(joint_pmf(&urn, &j).unwrap()) {
                bad.get_or_insert(format!("n={n} m={m} j={j:?}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_none() && secs < 30.0,
        format!(
            "{checked} trajectories, n+m <= 9, {secs:.2} s{}",
            fmt_bad(bad)
        ),
    )
}

fn fmt_bad(bad: Option<String>) -> String {
    bad.map(|b| format!(", first mismatch {b}"))
        .unwrap_or_default()
}

fn histogram_uniformity() -> Outcome {
    let mut checked = 0;
    let mut bad = None;
    for (n, m) in pairs_up_to(9) {
        let hists = enumerate_law(n, m).unwrap().histograms();
        let total = trajectories(n + 1, m)
            .into_iter()
            .map(|j| Histogram::of_trajectory(n, &j).bins().to_vec())
            .collect::<std::collections::BTreeSet<_>>();
        let expected = BigRational::new(1.into(), binomial(n + m, m).into());
        for h in total {
            checked += 1;
            if hists.probability(&h) != expected {
                bad.get_or_insert(format!("n={n} m={m} h={h:?}"));
            }
        }
    }
    outcome(
        bad.is_none(),
        format!("{checked} histograms, n+m <= 9{}", fmt_bad(bad)),
    )
}

fn binomial(a: usize, b: usize) -> u64 {
    (0..b).fold(1u64, |acc, i| acc * (a - i) as u64 / (i + 1) as u64)
}

fn chain_rule() -> Outcome {
    let mut checked = 0;
    let mut bad = None;
    for (n, m) in pairs_up_to(8) {
        let urn = exact_law(n, m);
        for j in trajectories(n + 1, m) {
            checked += 1;
            let mut p = BigRational::one();
            for i in 0..m {
                p *= exact(sequential_pmf(&urn, &j[..i], j[i]).unwrap());
            }
            if p != exact(joint_pmf(&urn, &j).unwrap()) {
                bad.get_or_insert(format!("n={n} m={m} j={j:?}"));
            }
        }
    }
    outcome(
        bad.is_none(),
        format!("{checked} trajectories, n+m <= 8{}", fmt_bad(bad)),
    )
}

fn marques_law() -> Outcome {
    let mut checked = 0;
    let mut bad = None;
    for n in 1..=6 {
        for m in 1..=6 {
            let urn = exact_law(n, m);
            for alpha in [0.1, 0.3, 0.5, 0.9] {
                let reference = exact_ecdf_count_law(n, m, grid_floor(alpha, n)).unwrap();
                let mut sum = BigRational::from_integer(0.into());
                for (k, r) in reference.iter().enumerate() {
                    checked += 1;
                    let p = exact(ecdf_count_pmf(&urn, alpha, k).unwrap());
                    if &p != r {
                        bad.get_or_insert(format!("n={n} m={m} alpha={alpha} k={k}"));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    bad.get_or_insert(format!("mass n={n} m={m} alpha={alpha}"));
                }
            }
        }
    }
    outcome(
        bad.is_none(),
        format!("{checked} probabilities, n,m <= 6{}", fmt_bad(bad)),
    )
}

fn sampler_correctness() -> Outcome {
    let start = Instant::now();
    let (n, m, reps) = (2, 2, 200_000);
    let law = PolyaLaw::new(n, m).unwrap();
    let exact_law = enumerate_law(n, m).unwrap();
    let threshold = ChiSquared::new(8.0).unwrap().inverse_cdf(1.0 - 1e-4);
    let chi2 = |draws: Vec<PValueSet>| {
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for d in draws {
            *counts.entry(d.into_ranks()).or_default() += 1;
        }
        trajectories(n + 1, m)
            .into_iter()
            .map(|j| {
                let e = exact_law.probability(&j).to_f64().unwrap() * reps as f64;
                let o = counts.get(&j).copied().unwrap_or(0) as f64;
                (o - e) * (o - e) / e
            })
            .sum::<f64>()
    };
    let urn = chi2(sample_urn(&law, 11, reps));
    let rep = chi2(map_replicates(12, reps, |_, rng| {
        representation_draw(&law, rng)
    }));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        urn < threshold && rep < threshold && secs < 60.0,
        format!(
            "chi2 urn {urn:.2}, representation {rep:.2}, threshold {threshold:.2}, {secs:.2} s"
        ),
    )
}

fn theorem_one() -> (Outcome, Vec<(usize, usize, f64, f64)>) {
    let reps = 20_000;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut lambdas = Vec::new();
    for (i, &(n, m)) in [(20, 20), (75, 75), (50, 200)].iter().enumerate() {
        let law = PolyaLaw::new(n, m).unwrap();
        let devs = simulate_sup_deviations(&law, 100 + i as u64, reps);
        for delta in [0.05, 0.2] {
            let lambda = lambda_dkw(&DkwParams::new(n, m, delta).unwrap());
            let freq =
                devs.iter().filter(|d| d.to_f64().unwrap() > lambda).count() as f64 / reps as f64;
            let limit = delta + 4.0 * sigma(delta, reps);
            ok &= freq <= limit;
            parts.push(format!("({n},{m},{delta}) {freq:.4}<={limit:.4}"));
            lambdas.push((n, m, delta, lambda));
        }
    }
    let mut sweep = 0;
    let sizes = [1, 2, 3, 5, 10, 20, 50, 100, 1000, 10_000];
    for &n in &sizes {
        for &m in &sizes {
            for delta in [0.05, 0.2] {
                sweep += 1;
                let lambda = lambda_dkw(&DkwParams::new(n, m, delta).unwrap());
                if b_dkw(lambda, n, m) > delta {
                    ok = false;
                    parts.push(format!("B(lambda) > delta at n={n} m={m} delta={delta}"));
                }
            }
        }
    }
    parts.push(format!("analytic sweep {sweep} points"));
    (outcome(ok, parts.join("; ")), lambdas)
}

fn dominance(lambdas: &[(usize, usize, f64, f64)]) -> Outcome {
    let mut ok = true;
    let mut sweep = 0;
    for &(n, m) in &[(5, 5), (20, 20), (75, 75), (50, 200), (1000, 100)] {
        for i in 1..=20 {
            sweep += 1;
            let lambda = i as f64 * 0.05 - 0.001;
            if b_dkw_full(lambda, n, m) > b_dkw(lambda, n, m) {
                ok = false;
            }
        }
    }
    let mut parts = vec![format!("full <= analytic on {sweep} points: {ok}")];
    for (i, &(n, m, delta, analytic)) in lambdas.iter().enumerate() {
        let law = PolyaLaw::new(n, m).unwrap();
        let num = lambda_numerical(&law, delta, 200 + i as u64, 20_000)
            .unwrap()
            .value();
        ok &= num <= analytic;
        parts.push(format!("({n},{m},{delta}) num {num:.4} <= {analytic:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn fcp_bound() -> Outcome {
    let reps = 20_000;
    let config = RegressionConfig::default();
    let cov = simulate_fcp_coverage(&config, Predictor::default(), 0.2, reps, &[0.1]).unwrap();
    let rate = cov.dkw_rate();
    let limit = 0.2 + 4.0 * sigma(0.2, reps);
    let marginal = cov.marginal_miscoverage[0];
    let lower = 0.1 - 4.0 * sigma(0.1, reps);
    outcome(
        rate <= limit && (lower..=0.1).contains(&marginal) && cov.identity_failures == 0,
        format!(
            "DKW violation rate {rate:.4} <= {limit:.4}, Simes rate {:.4}, marginal miscoverage {marginal:.4} in [{lower:.4}, 0.1]",
            cov.simes_rate()
        ),
    )
}

fn nd_simulation() -> (Outcome, Outcome) {
    let start = Instant::now();
    let reps = 2000;
    let config = NdConfig::default();
    let cov = simulate_nd_coverage(&config, reps).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let r = reps as f64;
    let delta = config.delta;
    let limit = delta + 4.0 * sigma(delta, reps);
    let dkw = cov.dkw_violations as f64 / r;
    let fdr_limit =
        config.alpha * config.m0 as f64 / config.m() as f64 + 4.0 * cov.bh_sd_fdp / r.sqrt();
    let nine = outcome(
        dkw <= limit && cov.bh_mean_fdp <= fdr_limit && secs < 600.0,
        format!(
            "DKW violation rate {dkw:.4} <= {limit:.4}, Simes rate {:.4}, BH mean FDP {:.4} <= {fdr_limit:.4}, TDP {:.3}, {secs:.1} s",
            cov.simes_violations as f64 / r,
            cov.bh_mean_fdp,
            cov.bh_mean_tdp
        ),
    );
    let below_dkw = cov.m0_dkw_below as f64 / r;
    let below_simes = cov.m0_simes_below as f64 / r;
    let ten = outcome(
        below_dkw <= limit && below_simes <= limit,
        format!("P(m0_hat < m0): DKW {below_dkw:.4}, Simes {below_simes:.4}, limit {limit:.4}"),
    );
    (nine, ten)
}

fn template_validity() -> Outcome {
    let (n, m, delta, reps) = (50, 50, 0.2, 20_000);
    let law = PolyaLaw::new(n, m).unwrap();
    let lower = 1.0 - delta - 4.0 * sigma(delta, reps);
    let mut ok = true;
    let mut parts = Vec::new();
    let templates: [(&str, Template); 2] = [
        ("linear", linear_template(m, full_k_set(m)).unwrap()),
        ("beta", beta_template(m, default_beta_k_set(m)).unwrap()),
    ];
    for (name, template) in templates {
        let env = calibrate_template(&law, &template, delta, 300, reps).unwrap();
        let fresh = sample_urn(&law, 301, reps);
        let coverage = fresh.iter().filter(|p| env.holds(p)).count() as f64 / reps as f64;
        ok &= coverage >= lower && !env.vacuous;
        parts.push(format!(
            "{name} lambda*={:.4} coverage {coverage:.4} >= {lower:.4}",
            env.lambda_star
        ));
    }
    let draws = sample_urn(&law, 302, reps);
    for lambda in [2.0, 5.0, 10.0] {
        let bound = simes_check(lambda).unwrap();
        let freq = draws
            .iter()
            .filter(|p| simes_statistic(p).to_f64().unwrap() >= lambda)
            .count() as f64
            / reps as f64;
        let limit = bound + 4.0 * sigma(bound, reps);
        ok &= freq <= limit;
        parts.push(format!("Simes lambda={lambda} {freq:.4} <= {limit:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn level_calibration() -> Outcome {
    let mut checked = 0;
    let mut bad = None;
    for n in 1..=6 {
        for m in 1..=6 {
            let urn = exact_law(n, m);
            for k in 1..=m {
                for ell in 0..=n + 1 {
                    checked += 1;
                    if exact(order_statistic_cdf(&urn, k, ell).unwrap())
                        != exact_order_statistic_cdf(n, m, k, ell).unwrap()
                    {
                        bad.get_or_insert(format!("cdf n={n} m={m} k={k} l={ell}"));
                    }
                }
            }
            for delta in [0.1, 0.2, 0.5] {
                for target in [0.0, 0.1, 0.2, 0.25, 0.5, 0.9] {
                    checked += 1;
                    let cal = calibrate_level(&urn, target, delta).unwrap();
                    let k = ((target * m as f64).floor() as usize + 1).min(m);
                    let oracle = exact_calibrated_level(n, m, k, delta).unwrap();
                    if cal.level.index() != oracle {
                        bad.get_or_insert(format!(
                            "level n={n} m={m} delta={delta} target={target}"
                        ));
                    }
                    let cdf = exact_order_statistic_cdf(n, m, k, cal.level.index()).unwrap();
                    if cdf > rational_from_f64(delta) {
                        bad.get_or_insert(format!("exceedance n={n} m={m} delta={delta}"));
                    }
                }
                checked += 1;
                let zero = level_zero_explicit(n, m, delta).unwrap();
                if zero.index() != exact_calibrated_level(n, m, 1, delta).unwrap() {
                    bad.get_or_insert(format!("explicit n={n} m={m} delta={delta}"));
                }
            }
        }
    }
    outcome(
        bad.is_none(),
        format!("{checked} comparisons, n,m <= 6{}", fmt_bad(bad)),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "exact-law equivalence", exact_law_equivalence()),
        (2, "histogram uniformity", histogram_uniformity()),
        (3, "chain rule", chain_rule()),
        (4, "two-colour count law", marques_law()),
        (5, "sampler correctness", sampler_correctness()),
    ];
    let (six, lambdas) = theorem_one();
    results.push((6, "DKW tail bound", six));
    results.push((7, "dominance", dominance(&lambdas)));
    results.push((8, "uniform FCP bound", fcp_bound()));
    let (nine, ten) = nd_simulation();
    results.push((9, "uniform FDP bound", nine));
    results.push((10, "m0 estimate conservativeness", ten));
    results.push((11, "template validity", template_validity()));
    results.push((12, "level calibration exactness", level_calibration()));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
