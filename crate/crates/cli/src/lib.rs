//! Operator-facing binding of the monitoring pipeline: configuration,
//! synthetic fixtures, and the `iotmon` command surface.

pub mod app;
pub mod config;
pub mod fixture;
