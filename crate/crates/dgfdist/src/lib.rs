//! File formats, experiment orchestration, and analysis output for
//! `dgfdist-core`. The `dgfdist` binary is a thin front end over this crate.

pub mod analyze;
pub mod csvio;
pub mod experiment;
pub mod fsutil;
pub mod manifest;
pub mod text;
