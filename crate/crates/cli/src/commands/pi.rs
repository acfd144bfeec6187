use serde::Serialize;

use conformal_urn::bounds::{lambda_dkw, DkwParams};
use conformal_urn::prediction::{
    alpha_for_radius, build_band, fcp, fcp_bound_dkw, fcp_bound_simes, residual_sample,
    simulate_fcp_coverage, synth_regression, FcpCoverage, Predictor, RegressionConfig,
};

use crate::args::{Format, PiArgs, PiAxis, PredictorChoice};
use crate::error::{CliError, CliResult};
use crate::io;

use super::check_unit;

#[derive(Serialize)]
struct Config {
    n: usize,
    m: usize,
    n_train: usize,
    sigma: f64,
    delta: f64,
    predictor: &'static str,
    neighbors: usize,
    axis: &'static str,
    /// Explicit grid; `null` means the default for the axis.
    grid: Option<Vec<f64>>,
    reps: usize,
    alpha: f64,
    seed: u64,
}

#[derive(Serialize)]
struct Row {
    axis_value: f64,
    level: f64,
    radius: f64,
    fcp: f64,
    bound_dkw: f64,
    bound_simes: f64,
}

#[derive(Serialize)]
struct Coverage {
    reps: usize,
    dkw_violation_rate: f64,
    simes_violation_rate: f64,
    marginal_alpha: f64,
    marginal_miscoverage: f64,
    marginal_sd: f64,
}

impl Coverage {
    fn from(c: &FcpCoverage) -> Self {
        Self {
            reps: c.reps,
            dkw_violation_rate: c.dkw_rate(),
            simes_violation_rate: c.simes_rate(),
            marginal_alpha: c.marginal_levels[0],
            marginal_miscoverage: c.marginal_miscoverage[0],
            marginal_sd: c.marginal_sd[0],
        }
    }
}

#[derive(Serialize)]
struct Summary {
    lambda_dkw: f64,
    /// Largest FCP on the emitted grid, for the seed's replicate.
    max_fcp: f64,
    coverage: Option<Coverage>,
}

pub fn run(args: &PiArgs) -> CliResult<()> {
    check_unit("delta", args.delta)?;
    check_unit("alpha", args.alpha)?;
    if args.neighbors == 0 {
        return Err(CliError::Usage("--neighbors must be positive".into()));
    }
    let config = RegressionConfig {
        n_train: args.n_train,
        n: args.n,
        m: args.m,
        sigma: args.sigma,
        seed: args.seed.seed,
        ..RegressionConfig::default()
    };
    config.validate()?;
    let (predictor, predictor_name) = match args.predictor {
        PredictorChoice::Oracle => (Predictor::OracleMean, "oracle"),
        PredictorChoice::Naive => (Predictor::NaiveKnn { k: args.neighbors }, "naive"),
        PredictorChoice::Transfer => (Predictor::TransferKnn { k: args.neighbors }, "transfer"),
    };
    let n = args.n;
    let grid = match (&args.grid, args.axis) {
        (Some(g), _) => g.clone(),
        (None, PiAxis::Alpha) => (1..=n).map(|l| l as f64 / (n + 1) as f64).collect(),
        (None, PiAxis::Radius) => (1..=20).map(|i| i as f64 / 20.0).collect(),
    };
    let params = DkwParams::new(n, args.m, args.delta)?;
    let data = synth_regression(&config)?;
    let sample = residual_sample(predictor, &config, &data);
    let mut rows = Vec::with_capacity(grid.len());
    for &v in &grid {
        let alpha = match args.axis {
            PiAxis::Alpha => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(CliError::Usage(format!(
                        "alpha grid value {v} outside [0, 1]"
                    )));
                }
                v
            }
            PiAxis::Radius => alpha_for_radius(&sample.calibration_scores, v)?.value(),
        };
        let band = build_band(&sample.calibration_scores, &sample.test_centers, alpha)?;
        let realized = fcp(&band, &sample.test_outcomes)?;
        rows.push(Row {
            axis_value: v,
            level: band.level().value(),
            radius: band.radius(),
            fcp: *realized.numer() as f64 / *realized.denom() as f64,
            bound_dkw: fcp_bound_dkw(alpha, &params),
            bound_simes: fcp_bound_simes(alpha, args.delta, n),
        });
    }
    let coverage = if args.reps > 0 {
        let c = simulate_fcp_coverage(&config, predictor, args.delta, args.reps, &[args.alpha])?;
        Some(Coverage::from(&c))
    } else {
        None
    };
    let summary = Summary {
        lambda_dkw: lambda_dkw(&params),
        max_fcp: rows.iter().map(|r| r.fcp).fold(0.0, f64::max),
        coverage,
    };
    let echo = Config {
        n,
        m: args.m,
        n_train: args.n_train,
        sigma: args.sigma,
        delta: args.delta,
        predictor: predictor_name,
        neighbors: args.neighbors,
        axis: match args.axis {
            PiAxis::Alpha => "alpha",
            PiAxis::Radius => "radius",
        },
        grid: args.grid.clone(),
        reps: args.reps,
        alpha: args.alpha,
        seed: args.seed.seed,
    };
    emit(
        "pi",
        args.output.as_deref(),
        args.format,
        &echo,
        &rows,
        &summary,
    )
}

/// CSV curve plus JSON summary: both files under `--output`, otherwise the
/// chosen format on stdout.
pub(crate) fn emit<C: Serialize, R: Serialize, S: Serialize>(
    command: &str,
    output: Option<&std::path::Path>,
    format: Format,
    config: &C,
    rows: &[R],
    summary: &S,
) -> CliResult<()> {
    match output {
        Some(prefix) => {
            io::write_csv(
                &mut *io::sink(Some(&io::with_suffix(prefix, "csv")))?,
                command,
                config,
                rows,
            )?;
            io::write_json(
                &mut *io::sink(Some(&io::with_suffix(prefix, "json")))?,
                command,
                config,
                summary,
            )
        }
        None => {
            let mut out = io::sink(None)?;
            match format {
                Format::Csv => io::write_csv(&mut *out, command, config, rows),
                Format::Json => io::write_json(&mut *out, command, config, summary),
            }
        }
    }
}
