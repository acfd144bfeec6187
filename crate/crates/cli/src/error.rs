use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        })
    }
}

impl From<conformal_urn::Error> for CliError {
    fn from(e: conformal_urn::Error) -> Self {
        use conformal_urn::Error as E;
        match e {
            E::NonFiniteScore { .. }
            | E::TiesPresent
            | E::TieUnresolvable(_)
            | E::RankOutOfRange { .. }
            | E::HistogramSum { .. }
            | E::LengthMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use conformal_urn::Error;

    #[test]
    fn core_errors_map_to_exit_classes() {
        assert!(matches!(
            CliError::from(Error::TiesPresent),
            CliError::Data(_)
        ));
        assert!(matches!(
            CliError::from(Error::EmptyTest),
            CliError::Usage(_)
        ));
        assert!(matches!(
            CliError::from(Error::SizeGuard {
                size: 12,
                limit: 11
            }),
            CliError::Usage(_)
        ));
        assert_eq!(
            CliError::Verification("x".into()).exit_code(),
            ExitCode::from(3)
        );
    }
}
