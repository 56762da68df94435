//! Electrode geometry, coupling profiles, voltage functions and the gate ramp.

mod profile;
mod ramp;
mod units;
mod voltage;

pub use profile::{CouplingProfile, ElectrodeLayout, TabulatedProfile, ELECTRODE_COUNT};
pub use ramp::{RampSchedule, RampShape, Stage, ERF_TWO};
pub use units::{UnitSystem, DEFAULT_ENERGY_PER_MV, DEFAULT_ENERGY_TO_GHZ};
pub use voltage::{
    surface_potential, FunctionFamily, TargetConfig, VoltageFunction, VoltageTable, VoltageVector,
    LAMBDA_BETA_SWAP, TABLE_I_CZ, TABLE_I_IDLE, TABLE_I_SWAP,
};
