//! Max-product message passing for binary AND/OR/POOL factor graphs, and the
//! hierarchical compositional network (HCN) built on it.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! front end and parallel evaluation live in the `hcn` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod ext;
pub mod infer;
pub mod learn;
pub mod mp;
pub mod model;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{BinaryTensor3, BinaryTensor4};
