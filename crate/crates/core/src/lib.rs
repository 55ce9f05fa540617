//! 3-SAT to grid MAPF reduction with plan synthesis, validation and
//! exhaustive oracles for small instances.

pub mod cli;
pub mod formula;
pub mod gridmap;
pub mod oracle;
pub mod plan;
pub mod reduction;
pub mod render;
pub mod selftest;
pub mod validator;
pub mod witness;

pub use formula::{Assignment, Formula};
pub use gridmap::{Cell, GridMap};
pub use plan::Plan;
pub use reduction::{build, Instance, Layout, Variant};
pub use validator::{validate, MotionMode, ValidationReport};
