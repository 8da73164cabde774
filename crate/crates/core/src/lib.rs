//! Discrete choice modelling with learned embeddings of categorical
//! variables: dataset preparation, encoders (dummy, PCA, learned), a
//! multinomial logit estimator, coefficient back-projection and MDS layouts.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod category;
pub mod data;
pub mod embed;
pub mod encoders;
pub mod error;
pub mod linalg;
pub mod math;
pub mod matrix;
pub mod mds;
pub mod mnl;
pub mod projection;

pub use error::{Error, Result};
pub use matrix::Matrix;
