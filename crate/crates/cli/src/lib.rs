//! Command-line front end and local HTTP service for panorama staging.

pub mod app;
pub mod commands;
pub mod config;
pub mod server;
