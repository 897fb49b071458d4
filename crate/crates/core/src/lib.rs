#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod field;
pub mod measure;
pub mod model;
pub mod ou;
pub mod par;
pub mod psi;
pub mod quad;
pub mod rng;
pub mod series;
pub mod special;
pub mod stable_integral;
pub mod stats;
pub mod tail;
pub mod verify;

pub use error::{Error, Result};
