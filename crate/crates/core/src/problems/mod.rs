pub mod anisotropic;
pub mod heat;
pub mod lubrication;

pub use anisotropic::AnisotropicSpec;
pub use heat::HeatProblem1D;
pub use lubrication::{LubricationRun, LubricationSpec, MobilitySpec};
