//! File formats, JSON-lines ingestion and the `concmtf` command-line tool on
//! top of [`concmtf_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod io;
