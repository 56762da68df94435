//! Gate matrices, virtual Z rotations, average fidelity and error metrics.

mod io;
mod metrics;

pub use io::{GateJson, PolarEntry};
pub use metrics::*;
