// Comparisons like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod green;
pub mod freegroup;
pub mod fuchsian;
pub mod h3geom;
pub mod kleinian;
pub mod moebius;
pub mod periods;
pub mod schottky;
pub mod series;

pub use error::{Error, ErrorKind, Result};
