use serde::Serialize;

use conformal_urn::bounds::{
    b_dkw, b_dkw_full, lambda_dkw, lambda_dkw_full, lambda_numerical, CrossTerm, DkwParams,
};
use conformal_urn::PolyaLaw;

use crate::args::{BoundArgs, BoundMode};
use crate::error::CliResult;
use crate::io;

use super::check_unit;

#[derive(Serialize)]
struct Config {
    n: usize,
    m: usize,
    delta: f64,
    mode: &'static str,
    iterations: u32,
    reps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Output {
    lambda: f64,
    /// Analytic tail bound at `lambda`.
    bound_at_lambda: f64,
    /// Full tail bound at `lambda`.
    bound_full_at_lambda: f64,
    tau: f64,
    order_index: Option<usize>,
    std_error: Option<f64>,
}

pub fn run(args: &BoundArgs) -> CliResult<()> {
    check_unit("delta", args.delta)?;
    let params = DkwParams::new(args.n, args.m, args.delta)?.with_iterations(args.iterations)?;
    let (lambda, order_index, std_error) = match args.mode {
        BoundMode::Analytic => (lambda_dkw(&params), None, None),
        BoundMode::Full => (lambda_dkw_full(&params, CrossTerm::Normal), None, None),
        BoundMode::Numerical => {
            let law = PolyaLaw::new(args.n, args.m)?;
            let res = lambda_numerical(&law, args.delta, args.seed.seed, args.reps)?;
            (res.value(), Some(res.order_index), Some(res.std_error))
        }
    };
    let config = Config {
        n: args.n,
        m: args.m,
        delta: args.delta,
        mode: match args.mode {
            BoundMode::Analytic => "analytic",
            BoundMode::Full => "full",
            BoundMode::Numerical => "numerical",
        },
        iterations: args.iterations,
        reps: args.reps,
        seed: args.seed.seed,
    };
    let result = Output {
        lambda,
        bound_at_lambda: b_dkw(lambda, args.n, args.m),
        bound_full_at_lambda: b_dkw_full(lambda, args.n, args.m),
        tau: params.tau(),
        order_index,
        std_error,
    };
    io::write_json(
        &mut *io::sink(args.output.as_deref())?,
        "bound",
        &config,
        &result,
    )
}
