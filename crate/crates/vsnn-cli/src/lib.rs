//! Experiment CLI: training, sweeps, evaluation, energy reports and
//! gradient checks, driven by JSON configs.

use std::process::ExitCode;

pub mod commands;
pub mod output;

pub trait ExitCodeExt {
    fn exit_code(&self) -> u8;
}

impl ExitCodeExt for vsnn::Error {
    fn exit_code(&self) -> u8 {
        match self {
            vsnn::Error::Internal(_) => 2,
            _ => 1,
        }
    }
}

/// Exit codes: 0 success, 1 expected failure (bad config, missing data,
/// failed check), 2 internal error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match commands::dispatch(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
