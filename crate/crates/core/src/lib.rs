pub mod cli;
pub mod error;
pub mod gbsolver;
pub mod generalized;
pub mod geom;
pub mod imu;
pub mod poly;
pub mod regular;
pub mod robust;
pub mod synth;

pub use error::{Error, Result};
