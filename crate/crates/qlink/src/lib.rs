//! Command-line harness around `qlink-core`: run configurations, shipped
//! presets, result bundles and regression comparison.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod device;
pub mod error;
pub mod exec;
pub mod presets;
pub mod tables;
