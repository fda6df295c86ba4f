use std::fmt;

/// Failures that originate in the CLI itself rather than in the library.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    UnknownLabel(String),
    SweepFailures { failed: usize, total: usize },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => f.write_str(msg),
            Self::UnknownLabel(id) => write!(f, "unknown label id {id:?}"),
            Self::SweepFailures { failed, total } => write!(f, "{failed} of {total} sweep runs failed"),
        }
    }
}

impl std::error::Error for CliError {}

pub const EXIT_DIVERGED: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_FINGERPRINT: u8 = 3;
pub const EXIT_BAD_REFERENCE: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

/// Maps an error chain onto the process exit code. The first recognised
/// cause wins; anything unrecognised exits 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use mlgcn::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::UnknownLabel(_) => EXIT_BAD_REFERENCE,
                CliError::SweepFailures { .. } => EXIT_DIVERGED,
            };
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Diverged { .. } | E::NonFiniteGradient(_) => EXIT_DIVERGED,
                E::Io(_) | E::Parse { .. } | E::NonpositiveWeight { .. } | E::NoLabels | E::Checkpoint(_) => {
                    EXIT_IO
                }
                E::FingerprintMismatch { .. } => EXIT_FINGERPRINT,
                E::Config(_) | E::Split(_) => EXIT_USAGE,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_IO;
        }
    }
    1
}
