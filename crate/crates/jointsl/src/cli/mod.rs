//! Command-line layer: file formats, the posterior archive, result
//! reporting, and the command implementations behind the `jointsl` binary.

pub mod archive;
pub mod commands;
pub mod formats;
pub mod report;

pub use crate::TOOL_VERSION;
