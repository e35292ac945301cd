//! File formats, scorer-client networking, and the command-line interface
//! around `sess-core`.

pub mod cache;
pub mod cli;
pub mod client;
pub mod io;
pub mod manifest;
pub mod output;
