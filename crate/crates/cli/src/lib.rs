//! Command-line front end: single-step subcommands and the resumable
//! experiment pipeline.

pub mod commands;
pub mod config;
pub mod run;
pub mod stamp;

use graphprobe::Error;

/// Process exit status for an error: 2 for usage, input and I/O problems,
/// 1 for failures of the computation itself.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::UnknownTag { .. }
        | Error::InvalidParameter(_)
        | Error::VertexMismatch { .. }
        | Error::EmptyGraph
        | Error::EmptyInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Json(_) => 2,
        _ => 1,
    }
}
