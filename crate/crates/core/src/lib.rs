//! Finite-difference solvers for nonnegative parabolic problems using the
//! cutoff method: after each implicit step the solution is replaced by its
//! nonnegative part (or by `max(U, δ)`).

pub mod cutoff;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod par;
pub mod problems;
pub mod singularity;
pub mod sparse;
pub mod stepper;

pub use cutoff::CutoffParams;
pub use error::{Error, Result};
pub use mesh::{Field, Grid, Grid1D, Grid2D};
