use serde::Serialize;

use conformal_urn::novelty::{
    bh_threshold, fdp_tdp, ratio_f64, reject, simulate_nd_coverage, synth_nd, FdpBounds, NdConfig,
};

use crate::args::{NdArgs, NdAxis};
use crate::error::{CliError, CliResult};

use super::check_unit;
use super::pi::emit;

#[derive(Serialize)]
struct Config {
    n: usize,
    m0: usize,
    m1: usize,
    shift: f64,
    delta: f64,
    alpha: f64,
    axis: &'static str,
    /// Explicit grid; `null` means the default for the axis.
    grid: Option<Vec<f64>>,
    reps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Row {
    t_or_alpha: f64,
    n_reject: usize,
    fdp: f64,
    tdp: f64,
    bound_dkw: f64,
    bound_simes: f64,
    m0_dkw: usize,
    m0_simes: usize,
    bound_dkw_m: f64,
    bound_simes_m: f64,
}

#[derive(Serialize)]
struct Coverage {
    reps: usize,
    dkw_violation_rate: f64,
    simes_violation_rate: f64,
    m0_dkw_below_rate: f64,
    m0_simes_below_rate: f64,
    bh_mean_fdp: f64,
    bh_sd_fdp: f64,
    bh_mean_tdp: f64,
}

#[derive(Serialize)]
struct Summary {
    m: usize,
    m0_dkw: usize,
    m0_simes: usize,
    lambda_m0: f64,
    lambda_m: f64,
    coverage: Option<Coverage>,
}

pub fn run(args: &NdArgs) -> CliResult<()> {
    let config = NdConfig {
        n: args.n,
        m0: args.m0,
        m1: args.m1,
        shift: args.shift,
        alpha: args.alpha,
        delta: args.delta,
        seed: args.seed.seed,
    };
    check_unit("delta", args.delta)?;
    check_unit("alpha", args.alpha)?;
    config.validate()?;
    let n = args.n;
    let grid = match (&args.grid, args.axis) {
        (Some(g), _) => g.clone(),
        (None, NdAxis::T) => (1..=n).map(|l| l as f64 / (n + 1) as f64).collect(),
        (None, NdAxis::Alpha) => (1..=50).map(|i| i as f64 / 100.0).collect(),
    };
    if let Some(bad) = grid.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(CliError::Usage(format!("grid value {bad} outside (0, 1)")));
    }
    let data = synth_nd(n, args.m0, args.m1, args.shift, args.seed.seed)?;
    let p = data.pvalues()?;
    let est = FdpBounds::new(&p, args.delta)?;
    let full = FdpBounds::without_estimation(&p, args.delta)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &v in &grid {
        let (set, (dkw, simes), (dkw_m, simes_m)) = match args.axis {
            NdAxis::T => (
                reject(&p, v)?,
                (est.dkw(v), est.simes(v)),
                (full.dkw(v), full.simes(v)),
            ),
            NdAxis::Alpha => {
                let (k, set) = bh_threshold(&p, v)?;
                (set, est.adadetect(v, k), full.adadetect(v, k))
            }
        };
        let (fdp, tdp) = fdp_tdp(&set, &data.nulls, p.m())?;
        rows.push(Row {
            t_or_alpha: v,
            n_reject: set.len(),
            fdp: ratio_f64(fdp),
            tdp: ratio_f64(tdp),
            bound_dkw: dkw,
            bound_simes: simes,
            m0_dkw: est.m0_dkw().value,
            m0_simes: est.m0_simes().value,
            bound_dkw_m: dkw_m,
            bound_simes_m: simes_m,
        });
    }
    let coverage = if args.reps > 0 {
        let c = simulate_nd_coverage(&config, args.reps)?;
        let r = c.reps as f64;
        Some(Coverage {
            reps: c.reps,
            dkw_violation_rate: c.dkw_violations as f64 / r,
            simes_violation_rate: c.simes_violations as f64 / r,
            m0_dkw_below_rate: c.m0_dkw_below as f64 / r,
            m0_simes_below_rate: c.m0_simes_below as f64 / r,
            bh_mean_fdp: c.bh_mean_fdp,
            bh_sd_fdp: c.bh_sd_fdp,
            bh_mean_tdp: c.bh_mean_tdp,
        })
    } else {
        None
    };
    let summary = Summary {
        m: p.m(),
        m0_dkw: est.m0_dkw().value,
        m0_simes: est.m0_simes().value,
        lambda_m0: est.lambda_m0(),
        lambda_m: full.lambda_m0(),
        coverage,
    };
    let echo = Config {
        n,
        m0: args.m0,
        m1: args.m1,
        shift: args.shift,
        delta: args.delta,
        alpha: args.alpha,
        axis: match args.axis {
            NdAxis::T => "t",
            NdAxis::Alpha => "alpha",
        },
        grid: args.grid.clone(),
        reps: args.reps,
        seed: args.seed.seed,
    };
    emit(
        "nd",
        args.output.as_deref(),
        args.format,
        &echo,
        &rows,
        &summary,
    )
}
