use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conversion between dimensionless simulation units and laboratory units.
///
/// Lengths are measured in `length_unit_um`, energies in a unit worth
/// `energy_to_ghz` GHz (as a frequency E/h), and time in
/// `1 / (2π · energy_to_ghz)` ns so that ħ = 1. Electrode voltages enter
/// the potential through `energy_per_mv`, the potential energy (in
/// simulation units) produced by a 1 mV electrode at unit coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSystem {
    pub length_unit_um: f64,
    pub energy_to_ghz: f64,
    pub energy_per_mv: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            length_unit_um: 1.0,
            energy_to_ghz: DEFAULT_ENERGY_TO_GHZ,
            energy_per_mv: DEFAULT_ENERGY_PER_MV,
        }
    }
}

/// Calibrated so the idle configuration has a mean qubit splitting of 10 GHz.
pub const DEFAULT_ENERGY_TO_GHZ: f64 = 0.02236;
pub const DEFAULT_ENERGY_PER_MV: f64 = 70.0;

impl UnitSystem {
    pub fn new(length_unit_um: f64, energy_to_ghz: f64, energy_per_mv: f64) -> Result<Self> {
        let u = UnitSystem {
            length_unit_um,
            energy_to_ghz,
            energy_per_mv,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length_unit_um", self.length_unit_um),
            ("energy_to_ghz", self.energy_to_ghz),
            ("energy_per_mv", self.energy_per_mv),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Length of one time unit in nanoseconds.
    pub fn time_unit_ns(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.energy_to_ghz)
    }

    pub fn ns_to_time(&self, ns: f64) -> f64 {
        ns / self.time_unit_ns()
    }

    pub fn time_to_ns(&self, t: f64) -> f64 {
        t * self.time_unit_ns()
    }

    pub fn energy_to_ghz(&self, e: f64) -> f64 {
        e * self.energy_to_ghz
    }

    pub fn ghz_to_energy(&self, f: f64) -> f64 {
        f / self.energy_to_ghz
    }

    pub fn um_to_length(&self, x_um: f64) -> f64 {
        x_um / self.length_unit_um
    }

    pub fn length_to_um(&self, x: f64) -> f64 {
        x * self.length_unit_um
    }
}
