//! Error categories and their exit statuses.

use bess_core::ErrorKind;

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const SOLVER: u8 = 4;

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => USAGE,
            Failure::Data(_) => DATA,
            Failure::Solver(_) => SOLVER,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Solver(e) => e,
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }

    /// Adds context while keeping the category.
    pub fn context(self, ctx: impl std::fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Usage(e) => Failure::Usage(e.context(ctx)),
            Failure::Data(e) => Failure::Data(e.context(ctx)),
            Failure::Solver(e) => Failure::Solver(e.context(ctx)),
        }
    }
}

impl From<bess_core::Error> for Failure {
    fn from(e: bess_core::Error) -> Self {
        match e.kind() {
            ErrorKind::Usage => Failure::Usage(e.into()),
            ErrorKind::Data => Failure::Data(e.into()),
            ErrorKind::Solver => Failure::Solver(e.into()),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Wraps output-side I/O failures, which count as data errors.
pub fn io<T>(r: std::io::Result<T>, path: &std::path::Path) -> CliResult<T> {
    r.map_err(|e| Failure::Data(anyhow::Error::new(e).context(path.display().to_string())))
}
