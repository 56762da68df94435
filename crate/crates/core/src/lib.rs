pub mod cli;
pub mod config;
pub mod device;
pub mod dvr;
pub mod electrostatics;
pub mod error;
pub mod gate;
pub mod manifest;
pub mod optim;
pub mod pipeline;
pub mod propagation;
pub mod search;
pub mod spectrum;
pub mod voltage_opt;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/electrostatics.md")]
    pub mod electrostatics {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    pub mod spectrum {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    pub mod propagation {}
    #[doc = include_str!("../../../book/src/gates.md")]
    pub mod gates {}
    #[doc = include_str!("../../../book/src/search.md")]
    pub mod search {}
    #[doc = include_str!("../../../book/src/voltage-optimization.md")]
    pub mod voltage_optimization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
