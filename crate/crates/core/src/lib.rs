pub mod basis;
pub mod bcs;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fft;
pub mod lines;
pub mod model;
pub mod readout;
pub mod spectroscopy;
pub mod states;

pub use error::{Error, Result};
