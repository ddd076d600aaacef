//! Configuration, manifests and commands.

pub mod config;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod commands;
pub mod sweep;
pub mod verify;
