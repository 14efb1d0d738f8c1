pub mod bounds;
pub mod cases;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod gallery;
pub mod immersion;
pub mod mesh;
pub mod minkowski;
pub mod pipeline;
pub mod quadrature;
pub mod report;
pub mod sparse;

pub use error::{LabError, Result};
