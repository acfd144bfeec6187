use std::io::Write;

use conformal_urn::oracle::{verify, VerifyOptions, OVERRIDE_LIMIT};

use crate::args::VerifyArgs;
use crate::error::{CliError, CliResult};

pub fn run(args: &VerifyArgs) -> CliResult<()> {
    if args.max_size > OVERRIDE_LIMIT {
        return Err(CliError::Usage(format!(
            "--max-size {} exceeds the cap {OVERRIDE_LIMIT}",
            args.max_size
        )));
    }
    let report = verify(VerifyOptions {
        max_size: args.max_size,
        max_side: args.max_side,
        perturb: args.perturb,
    })?;
    let width = report
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<width$}  {:>9}  result", "check", "instances")?;
    for c in &report {
        let status = if c.passed { "pass" } else { "FAIL" };
        write!(out, "{:<width$}  {:>9}  {status}", c.name, c.instances)?;
        if let Some(d) = &c.detail {
            write!(out, "  ({d})")?;
        }
        writeln!(out)?;
    }
    let failed = report.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "{failed} oracle check(s) failed"
        )));
    }
    Ok(())
}
