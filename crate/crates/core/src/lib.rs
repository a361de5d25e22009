//! Core algorithms for the promptcloak gateway: prompt tokenization and
//! structural parsing, the manipulation action set, code-similarity metrics,
//! the manipulation MDP, and the recurrent PPO agent that drives it.
//!
//! This crate is `no_std` + `alloc`: everything here is pure computation over
//! owned strings and vectors. IO, HTTP bindings, the CLI and file formats live
//! in the companion `promptcloak` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod assist;
pub mod code;
pub mod embed;
pub mod env;
pub mod gateway;
pub mod manip;
pub mod metrics;
pub mod recon;
pub mod sim;

pub use code::PromptRecord;
pub use manip::{Action, PromptState, TranslationMap};
