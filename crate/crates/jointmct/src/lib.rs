//! Command-line tool, file formats and parallel drivers for `jointmct-core`.
//!
//! - [`io`]: long-format and binomial CSV input, contrast matrix CSV
//! - [`report`]: text, CSV and JSON renderings with identical numbers
//! - [`scenario`]: TOML scenario files for the simulation harness
//! - [`sim`]: rayon driver whose output does not depend on the thread count
//! - [`fixtures`]: bundled reference datasets and their golden values
//! - [`cli`]: the `jointmct` binary

pub mod cli;
mod error;
pub mod fixtures;
pub mod io;
pub mod report;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use jointmct_core as core;
