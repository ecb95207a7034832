pub mod assoc;
pub mod covariance;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod replicate;
pub mod sampler;
pub mod scanner;
pub mod seeding;
pub mod simgen;
pub mod types;

pub use error::{Error, Result};

// Re-exported because matrix and vector types appear throughout the public
// API; downstream crates need the same nalgebra version.
pub use nalgebra;
