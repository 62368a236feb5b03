//! Averaged simulation, fuzzy/PID duty control and metaheuristic tuning of
//! the weighting factors of a three-output forward DC-DC converter.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control_loop;
pub mod error;
pub mod fuzzy;
pub mod optim;
pub mod plant;
pub mod scenario;
pub mod tuning;

pub use error::{Error, Result};
