//! Batch simulation and the live session server.

pub mod batch;
pub mod server;
