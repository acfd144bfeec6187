use serde::Serialize;

use conformal_urn::prediction::{calibrate_level, level_zero_explicit};
use conformal_urn::templates::{
    beta_template, calibrate_template_with, default_beta_k_set, full_k_set, linear_template,
    OrderIndex,
};
use conformal_urn::PolyaLaw;

use crate::args::{LevelArgs, OrderChoice, TemplateArgs, TemplateChoice};
use crate::error::{CliError, CliResult};
use crate::io;

use super::check_unit;

#[derive(Serialize)]
struct TemplateConfig {
    n: usize,
    m: usize,
    delta: f64,
    template: &'static str,
    k_set: Vec<usize>,
    order: &'static str,
    reps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TemplateOutput {
    lambda_star: f64,
    vacuous: bool,
    thresholds: Vec<Threshold>,
}

#[derive(Serialize)]
struct Threshold {
    k: usize,
    t: f64,
}

pub fn template(args: &TemplateArgs) -> CliResult<()> {
    check_unit("delta", args.delta)?;
    let law = PolyaLaw::new(args.n, args.m)?;
    let (name, k_set) = match (args.template, &args.k_set) {
        (TemplateChoice::Linear, k) => ("linear", k.clone().unwrap_or_else(|| full_k_set(args.m))),
        (TemplateChoice::Beta, k) => (
            "beta",
            k.clone().unwrap_or_else(|| default_beta_k_set(args.m)),
        ),
    };
    let template = match args.template {
        TemplateChoice::Linear => linear_template(args.m, k_set)?,
        TemplateChoice::Beta => beta_template(args.m, k_set)?,
    };
    let (order, order_name) = match args.order {
        OrderChoice::Same => (OrderIndex::Same, "same"),
        OrderChoice::Next => (OrderIndex::Next, "next"),
    };
    let env = calibrate_template_with(
        &law,
        &template,
        args.delta,
        args.seed.seed,
        args.reps,
        order,
    )?;
    if env.vacuous {
        eprintln!("warning: no candidate met the coverage constraint; the envelope is vacuous");
    }
    let config = TemplateConfig {
        n: args.n,
        m: args.m,
        delta: args.delta,
        template: name,
        k_set: template.k_set().to_vec(),
        order: order_name,
        reps: args.reps,
        seed: args.seed.seed,
    };
    let result = TemplateOutput {
        lambda_star: env.lambda_star,
        vacuous: env.vacuous,
        thresholds: template
            .k_set()
            .iter()
            .zip(&env.thresholds)
            .map(|(&k, &t)| Threshold { k, t })
            .collect(),
    };
    io::write_json(
        &mut *io::sink(args.output.as_deref())?,
        "calibrate-template",
        &config,
        &result,
    )
}

#[derive(Serialize)]
struct LevelConfig {
    n: usize,
    m: usize,
    delta: f64,
    target: f64,
}

#[derive(Serialize)]
struct LevelOutput {
    /// Grid index `l` of the level `l/(n+1)`.
    index: usize,
    level: f64,
    exceedance: f64,
    /// The band is the whole line.
    empty: bool,
    /// Closed-form level for target 0.
    explicit_zero_level: Option<f64>,
}

pub fn level(args: &LevelArgs) -> CliResult<()> {
    check_unit("delta", args.delta)?;
    if !(0.0..1.0).contains(&args.target) {
        return Err(CliError::Usage(format!(
            "--target must lie in [0, 1), got {}",
            args.target
        )));
    }
    let law = PolyaLaw::new(args.n, args.m)?;
    let cal = calibrate_level(&law, args.target, args.delta)?;
    let explicit = if args.target * (args.m as f64) < 1.0 {
        Some(level_zero_explicit(args.n, args.m, args.delta)?.value())
    } else {
        None
    };
    let config = LevelConfig {
        n: args.n,
        m: args.m,
        delta: args.delta,
        target: args.target,
    };
    let result = LevelOutput {
        index: cal.level.index(),
        level: cal.level.value(),
        exceedance: cal.exceedance.to_f64(),
        empty: cal.empty,
        explicit_zero_level: explicit,
    };
    io::write_json(
        &mut *io::sink(args.output.as_deref())?,
        "calibrate-level",
        &config,
        &result,
    )
}
