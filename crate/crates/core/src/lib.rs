// NaN-rejecting comparisons such as `!(x > 0.0)` are intentional throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod estimates;
pub mod fdm;
pub mod history;
pub mod model;
pub mod presets;
pub mod runner;
pub mod solver;
pub mod trajectory;
