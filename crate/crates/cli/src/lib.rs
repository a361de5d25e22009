//! Command-line surface and IO companion to `promptcloak-core`: config
//! layering, dataset files, HTTP bindings, the gateway server, and the
//! leakage evaluation pipeline.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod providers;
pub mod remote;
pub mod server;
