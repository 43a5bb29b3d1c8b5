// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod planner;
pub mod sim_world;
pub mod terrain;
pub mod tracker;

pub use error::{NavError, Result};
