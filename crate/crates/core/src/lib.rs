//! Data preparation and evaluation core for Turkish answer-aware question
//! generation.
//!
//! The crate is `no_std` (with `alloc`). File formats, networking and the
//! command line live in the companion `turqg` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod format;
pub mod metrics;
pub mod pipeline;
pub mod text;
pub mod tokenizer;
