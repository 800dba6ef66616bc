//! File formats, dataset export and the command-line front end for
//! [`contactwav_core`].

pub mod cli;
pub mod container;
pub mod corpus;
pub mod dataset;
mod error;
pub mod manifest;
pub mod wav;

pub use contactwav_core as core;
pub use error::{Error, Result};
