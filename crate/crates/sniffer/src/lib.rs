//! Capture files, analysis workflows and the access-point/collector services
//! built on `csi-core`.

pub mod broker;
pub mod capture_csv;
pub mod collector;
pub mod config;
pub mod control;
mod error;
pub mod formats;
pub mod http;
pub mod store;
pub mod sweep;
pub mod wire;

pub use error::{Error, Result};
