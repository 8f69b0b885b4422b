use std::fmt;

/// Process exit codes.
///
/// | code | meaning |
/// |------|---------|
/// | 0 | success |
/// | 2 | usage: bad flags, unknown split, unparseable expression |
/// | 3 | configuration: missing or invalid backend settings |
/// | 4 | I/O: unreadable or malformed input files, unwritable outputs |
/// | 5 | pipeline: a case or run failed |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Config,
    Io,
    Pipeline,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Usage => 2,
            ExitKind::Config => 3,
            ExitKind::Io => 4,
            ExitKind::Pipeline => 5,
        }
    }
}

impl fmt::Display for ExitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExitKind::Usage => "usage error",
            ExitKind::Config => "config error",
            ExitKind::Io => "i/o error",
            ExitKind::Pipeline => "pipeline error",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl fmt::Display) -> Self {
        CliError {
            kind,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Usage, message)
    }

    pub fn config(message: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Config, message)
    }

    pub fn io(message: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Io, message)
    }

    pub fn pipeline(message: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Pipeline, message)
    }
}
