//! Shared setup for gate runs: grid, idle eigenbasis, qubit labels, and the
//! propagate-then-analyze path for one (t_ramp, t_hold) cell.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{Device, GridOptions};
use crate::dvr::{TwoBodyBasis, TwoBodyState};
use crate::electrostatics::{RampSchedule, RampShape, VoltageFunction};
use crate::error::Result;
use crate::gate::{optimize_rotations, overlap_gate_matrix, target_gate, FidelityReport, GateKind, GateMatrix, QUBIT_EIGEN_INDICES};
use crate::propagation::{OverlapTracking, PropagationPlan, Propagator, Trajectory};
use crate::spectrum::{label_states, solve_spectrum, DavidsonOptions, EigenSolution, Labeling};

/// How eigenstate indices are chosen for |00⟩, |01⟩, |10⟩, |11⟩.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitIndexing {
    /// From the node-counting labels of the idle spectrum.
    #[default]
    Labeled,
    /// Fixed indices (0, 1, 2, 4).
    Positional,
}

#[derive(Debug, Clone)]
pub struct GateSetup {
    pub device: Device,
    pub basis: Arc<TwoBodyBasis>,
    pub voltage_fn: VoltageFunction,
    /// Six lowest idle eigenpairs (λ = 0).
    pub idle: EigenSolution,
    pub labeling: Option<Labeling>,
    pub qubit_indices: [usize; 4],
    /// E_ref subtracted from H during propagation: the idle ground energy.
    pub energy_offset: f64,
}

impl GateSetup {
    /// Builds the grid over the idle wells and the wells at λ_max, and
    /// solves the idle spectrum.
    pub fn new(device: Device, voltage_fn: VoltageFunction, grid: &GridOptions, indexing: QubitIndexing) -> Result<Self> {
        voltage_fn.validate()?;
        let far = voltage_fn.voltage_at(voltage_fn.lambda_max)?;
        let basis = Arc::new(device.build_basis(&voltage_fn.start, &[far], grid)?);
        let cache = device.operators(basis.clone(), &voltage_fn.start)?;
        let opts = DavidsonOptions { tol: 1e-9, ..Default::default() };
        let idle = solve_spectrum(&cache, 6, &opts)?;
        let labeling = match indexing {
            QubitIndexing::Labeled => Some(label_states(&idle, &cache)?),
            QubitIndexing::Positional => label_states(&idle, &cache).ok(),
        };
        let qubit_indices = match (indexing, &labeling) {
            (QubitIndexing::Labeled, Some(l)) => l.labels.qubit_indices(),
            _ => QUBIT_EIGEN_INDICES,
        };
        let energy_offset = idle.energies[0];
        Ok(GateSetup {
            device,
            basis,
            voltage_fn,
            idle,
            labeling,
            qubit_indices,
            energy_offset,
        })
    }

    /// Same device and grid with a different voltage function whose start
    /// vector matches (the idle spectrum is reused).
    pub fn with_voltage_fn(&self, voltage_fn: VoltageFunction) -> Result<Self> {
        voltage_fn.validate()?;
        if voltage_fn.start != self.voltage_fn.start {
            return Err(crate::Error::invalid("voltage function must start at the same idle vector"));
        }
        Ok(GateSetup { voltage_fn, ..self.clone() })
    }

    /// The four qubit eigenstates in the order 00, 01, 10, 11.
    pub fn qubit_states(&self) -> Vec<TwoBodyState> {
        self.qubit_indices.iter().map(|&i| self.idle.states[i].clone()).collect()
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(&self.device, self.basis.clone(), &self.voltage_fn, self.energy_offset)
    }

    pub fn plan(&self, t_ramp: f64, t_hold: f64, dt: f64, shape: RampShape) -> Result<PropagationPlan> {
        Ok(PropagationPlan::new(RampSchedule::new(t_ramp, t_hold)?, self.voltage_fn.clone(), dt)?.with_shape(shape))
    }

    /// Propagates the four qubit states through `plan`.
    pub fn propagate_qubits(&self, prop: &mut Propagator, plan: &PropagationPlan, track: bool) -> Result<Vec<Trajectory>> {
        let tracking = track.then(|| OverlapTracking {
            reference: self.idle.states.clone(),
            every: 10,
        });
        Ok(prop.propagate_many(plan, &self.qubit_states(), tracking.as_ref())?)
    }

    pub fn gate_matrix(&self, finals: &[TwoBodyState]) -> Result<GateMatrix> {
        overlap_gate_matrix(&self.qubit_states(), finals)
    }

    /// Propagate and analyze one cell against `target`.
    pub fn evaluate(&self, prop: &mut Propagator, plan: &PropagationPlan, target: GateKind) -> Result<(GateMatrix, FidelityReport)> {
        let trajs = self.propagate_qubits(prop, plan, false)?;
        let finals: Vec<TwoBodyState> = trajs.into_iter().map(|t| t.final_state).collect();
        let u = self.gate_matrix(&finals)?;
        Ok((u, optimize_rotations(&u, &target_gate(target))))
    }

    /// ζ from the labeled qubit energies.
    pub fn idle_zz(&self) -> f64 {
        let [a, b, c, d] = self.qubit_indices;
        let e = &self.idle.energies;
        e[d] - e[b] - e[c] + e[a]
    }
}
