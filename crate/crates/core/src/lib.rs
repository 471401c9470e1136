pub mod denoiser;
pub mod discrete;
pub mod error;
pub mod features;
pub mod flow;
pub mod graph;
pub mod harness;
pub mod retro;
pub mod steering;

pub use error::{Error, Result};
