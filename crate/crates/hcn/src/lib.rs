//! File formats, run configurations, experiment presets and evaluation on
//! top of `hcn-core`. The `hcn` binary is a thin front end over this crate.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod mnist;
pub mod pbm;
pub mod presets;
pub mod store;

pub use error::{Error, Result};
pub use hcn_core;
