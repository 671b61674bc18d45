//! File formats, configuration and command-line plumbing around
//! [`uadt_core`].

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod output;

pub use error::{Error, Result};
