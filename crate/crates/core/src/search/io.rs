use serde::{Deserialize, Serialize};

use super::{Cell, Optimum, SweepResult, SweepSpec, SweepStats};
use crate::electrostatics::UnitSystem;

pub const SWEEP_HEADER: &str = "t_ramp_ns,t_hold_ns,fidelity,swap_error,leak_error,theta_L,theta_R";

/// Failed cells carry `ERR` in every metric column.
pub fn cross_section_csv(cells: &[Cell]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for c in cells {
        match &c.outcome {
            Ok(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.t_ramp, c.t_hold, r.fidelity, r.swap_error, r.leakage_error, r.angles.theta_left, r.angles.theta_right
            )),
            Err(_) => out.push_str(&format!("{},{},ERR,ERR,ERR,ERR,ERR\n", c.t_ramp, c.t_hold)),
        }
    }
    out
}

pub fn sweep_csv(result: &SweepResult) -> String {
    cross_section_csv(&result.cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub t_ramp: f64,
    pub t_hold: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub spec: SweepSpec,
    pub units: UnitSystem,
    pub config_hash: String,
    pub grid_points: (usize, usize),
    pub optimum: Option<Optimum>,
    pub failures: Vec<CellFailure>,
    pub stats: SweepStats,
}

impl SweepManifest {
    pub fn new(result: &SweepResult, units: UnitSystem, config_hash: String) -> Self {
        SweepManifest {
            spec: result.spec.clone(),
            units,
            config_hash,
            grid_points: result.grid_points,
            optimum: result.optimum,
            failures: result
                .failures()
                .map(|c| CellFailure {
                    t_ramp: c.t_ramp,
                    t_hold: c.t_hold,
                    error: c.outcome.clone().err().unwrap_or_default(),
                })
                .collect(),
            stats: result.stats.clone(),
        }
    }
}
