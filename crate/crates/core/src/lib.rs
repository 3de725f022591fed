pub mod analysis;
pub mod error;
pub mod fitting;
pub mod imaging;
pub mod par;
pub mod physics;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
