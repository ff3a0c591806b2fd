//! Command-line front end for the `gencoll` library. Every subcommand is a
//! thin dispatcher: it loads files, calls the library once, and renders the
//! result into a JSON report whose payload depends only on the inputs.

pub mod args;
pub mod exec;
pub mod report;

pub use args::{Cli, Command, Mode};
pub use exec::{run, CliError};
pub use report::{sig12, RunReport, TOOL_VERSION};
