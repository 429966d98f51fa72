//! Evolving surface finite elements with linearly implicit BDF time stepping
//! for forced mean curvature flow coupled to reaction–diffusion on the moving
//! surface.

pub mod analysis;
pub mod assembly;
pub mod bdf;
pub mod cli;
pub mod error;
pub mod field;
pub mod flow_solver;
pub mod problems;
pub mod ref_element;
pub mod sparse;
pub mod surface_mesh;

pub use error::{Error, Result};
