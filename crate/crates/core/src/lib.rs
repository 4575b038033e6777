pub mod energy;
pub mod error;
pub mod grid;
pub mod hartree;
mod interp;
pub mod scaling;
pub mod solvers;

pub use error::{Result, SpsError};
pub use grid::{differentiate, integrate, make_grid, resample, Grid, GridSpec, RadialFn};
