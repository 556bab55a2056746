use anyhow::Error;

pub const COMPUTE: u8 = 1;
pub const USAGE: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

pub type CliResult<T> = Result<T, Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow::anyhow!(msg.into()),
    }
}

/// Tag an error with the exit code it maps to.
pub trait Classify<T> {
    fn usage_err(self, ctx: impl FnOnce() -> String) -> CliResult<T>;
    fn compute_err(self, ctx: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<Error>> Classify<T> for Result<T, E> {
    fn usage_err(self, ctx: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| Failure {
            code: USAGE,
            error: e.into().context(ctx()),
        })
    }

    fn compute_err(self, ctx: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| Failure {
            code: COMPUTE,
            error: e.into().context(ctx()),
        })
    }
}
