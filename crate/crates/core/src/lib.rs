//! Bistable reaction-diffusion fronts on masked 2D grids.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod reaction;
pub mod wave;
pub mod geometry;
pub mod pde;
pub mod fronts;
pub mod certificates;
pub mod stationary;
pub mod scenario;
