//! Process exit codes and the error type that carries them.

use std::fmt;

pub const USAGE: i32 = 2;
pub const TRAINING: i32 = 3;
pub const CATALOG: i32 = 4;

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type Outcome<T = i32> = Result<T, Failure>;

pub trait OrExit<T> {
    /// Attaches an exit code to the error side.
    fn or_exit(self, code: i32) -> Outcome<T>;

    /// Exit 4 for catalog mismatches, `code` for anything else.
    fn or_exit_catalog(self, code: i32) -> Outcome<T>;
}

impl<T> OrExit<T> for anyhow::Result<T> {
    fn or_exit(self, code: i32) -> Outcome<T> {
        self.map_err(|error| Failure { code, error })
    }

    fn or_exit_catalog(self, code: i32) -> Outcome<T> {
        self.map_err(|error| {
            let catalog = error
                .chain()
                .any(|e| matches!(e.downcast_ref::<netdiag::Error>(), Some(netdiag::Error::CatalogMismatch(_))));
            Failure {
                code: if catalog { CATALOG } else { code },
                error,
            }
        })
    }
}

impl<T> OrExit<T> for netdiag::Result<T> {
    fn or_exit(self, code: i32) -> Outcome<T> {
        self.map_err(anyhow::Error::from).or_exit(code)
    }

    fn or_exit_catalog(self, code: i32) -> Outcome<T> {
        self.map_err(anyhow::Error::from).or_exit_catalog(code)
    }
}

pub fn usage(msg: impl fmt::Display) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow::anyhow!("{msg}"),
    }
}
