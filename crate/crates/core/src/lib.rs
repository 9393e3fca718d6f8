//! Exterior differential calculus for 5-dimensional, 2-nondegenerate,
//! uniformly Levi-degenerate CR structures.

pub mod dga;
pub mod expr;
pub mod exterior;
pub mod model;
pub mod report;
pub mod tube;
