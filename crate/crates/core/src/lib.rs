//! Learning generative models of spatial object relations from
//! demonstrations and planning placements with them.

// guards like `!(x > 0.0)` also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod geometry;
pub mod grounding;
pub mod harness;
pub mod memory;
pub mod planner;
pub mod relation;
pub mod seed;
pub mod session;
pub mod stats;
