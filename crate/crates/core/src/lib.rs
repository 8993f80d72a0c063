pub mod cones;
pub mod criticality;
pub mod error;
pub mod families;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod perturb;
pub mod problem;
pub mod report;
pub mod sosc;
pub mod symmat;

pub use error::{Error, Result};
pub use problem::{KktPoint, ProblemData};
pub use symmat::{SpectralDecomp, SymMat};
