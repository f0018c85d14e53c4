//! Holonomy of hybrid principal bundles with abelian structure group.
//!
//! Modes carry local connections `ω = dg + A(m) dm`; guards and resets glue them
//! into a hybrid bundle. Base loops are lifted horizontally through every mode
//! and reset, and the net fiber displacement is the hybrid holonomy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hybrid;
pub mod lift;
pub mod limits;
pub mod models;
pub mod output;

pub use error::{Error, Result};
