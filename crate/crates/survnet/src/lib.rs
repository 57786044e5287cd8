//! File formats, experiment recipes and the command-line interface on top
//! of `survnet-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod history;
pub mod manifest;
pub mod run;

pub use error::{Error, Result};
