pub mod bound;
pub mod calibrate;
pub mod nd;
pub mod oracle;
pub mod pi;
pub mod pvalues;

use crate::error::{CliError, CliResult};

pub(crate) fn check_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{name} must lie in (0, 1), got {v}"
        )))
    }
}
