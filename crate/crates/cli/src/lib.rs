//! Scenario runner for `cerfkit-core`: tracks critical points along parameter
//! paths, maps census regions over parameter planes and builds doubled collar
//! fields, writing CSV and JSON for plotting.

pub mod builtins;
pub mod json;
pub mod run;
pub mod scenario;

use cerfkit_core::continuation::TrackError;
use cerfkit_core::field::FieldError;
use cerfkit_core::ParseError;
use thiserror::Error;

pub use run::{run_scenario, RunOutcome};
pub use scenario::{Overrides, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema: {0}")]
    Schema(String),
    #[error("{what}: {source}")]
    Syntax {
        what: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}
