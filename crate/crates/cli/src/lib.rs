//! Library side of the `metasql` command: configuration, artifact I/O and
//! the stage functions each subcommand runs.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod rephrase;
