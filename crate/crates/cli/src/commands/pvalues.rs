use serde::Serialize;

use conformal_urn::scores::{break_ties, conformal_pvalues};
use conformal_urn::ScoreSet;

use crate::args::{Format, PvaluesArgs};
use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Serialize)]
struct Config {
    input: Option<String>,
    calibration: Option<String>,
    test: Option<String>,
    seed: u64,
    n: usize,
    m: usize,
    ties_broken: bool,
}

#[derive(Serialize)]
struct Row {
    index: usize,
    rank: usize,
    pvalue: f64,
}

pub fn run(args: &PvaluesArgs) -> CliResult<()> {
    let (cal, test) = match (&args.input, &args.calibration, &args.test) {
        (Some(input), _, _) => io::read_scored_roles(input)?,
        (None, Some(c), Some(t)) => (io::read_score_column(c)?, io::read_score_column(t)?),
        _ => {
            return Err(CliError::Usage(
                "give --input, or both --calibration and --test".into(),
            ))
        }
    };
    if cal.is_empty() {
        return Err(CliError::Usage("no calibration scores".into()));
    }
    if test.is_empty() {
        return Err(CliError::Usage("no test scores".into()));
    }
    let seed = args.seed.seed;
    let mut scores = ScoreSet::new(cal, test)?;
    let ties_broken = scores.has_ties();
    if ties_broken {
        scores = break_ties(&scores, seed)?;
    }
    let p = conformal_pvalues(&scores)?;
    let config = Config {
        input: args.input.as_ref().map(|p| p.display().to_string()),
        calibration: args.calibration.as_ref().map(|p| p.display().to_string()),
        test: args.test.as_ref().map(|p| p.display().to_string()),
        seed,
        n: p.n(),
        m: p.m(),
        ties_broken,
    };
    let rows: Vec<Row> = p
        .ranks()
        .iter()
        .enumerate()
        .map(|(i, &rank)| Row {
            index: i + 1,
            rank,
            pvalue: p.pvalue(i),
        })
        .collect();
    let mut out = io::sink(args.output.as_deref())?;
    match args.format {
        Format::Csv => io::write_csv(&mut *out, "pvalues", &config, &rows),
        Format::Json => io::write_json(&mut *out, "pvalues", &config, &rows),
    }
}
