//! Library side of the `fmix` command-line tool: argument definitions, the
//! four subcommands, and the on-disk formats they read and write (NPY v1.0,
//! PGM P5, PNG, JSON sidecars, CSV).

pub mod args;
pub mod commands;
pub mod error;
pub mod image;
pub mod npy;
pub mod output;
pub mod stats;

pub use args::Cli;
pub use commands::{cmd_gen_mask, cmd_mix, cmd_stats, cmd_visualize, read_tensor, run, Outcome};
pub use error::{CliError, EXIT_IO, EXIT_USAGE, EXIT_VALIDATION};
pub use npy::{DType, Tensor};
