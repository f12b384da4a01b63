//! Sound-speed-profile inversion toolkit: ray-theory travel-time forward
//! model, EOF profile extension, a few-shot multi-task neural inverter,
//! and classical baseline methods, plus a benchmark harness.

pub mod baselines;
pub mod bench;
pub mod cluster;
pub mod eof;
pub mod error;
pub mod io;
pub mod net;
pub mod profile;
pub mod ray;
pub mod world;

pub use error::{Error, Result};
