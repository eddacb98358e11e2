//! Dataset IO, the generation backend client, a mock backend and the
//! command line for `turqg-core`.

pub mod cli;
pub mod client;
pub mod config;
pub mod fetch;
pub mod generate;
pub mod jsonl;
pub mod mock;
pub mod predictions;
pub mod report;
pub mod squad;

pub use turqg_core as core;
