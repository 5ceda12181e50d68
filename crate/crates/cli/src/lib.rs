//! Command-line driver and HTTP service for distforest models.

pub mod cli;
pub mod render;
pub mod service;
pub mod wire;
