//! (t_ramp, t_hold) grid searches and sensitivity windows.
//!
//! Warm-started rows reuse the ramp-up for every hold value. The default
//! (`Strategy::Adjoint`) also reuses the ramp-down: the four target
//! eigenstates are stepped backward through it once, and every hold is a
//! diagonal phase in the hold Hamiltonian's eigenbasis. `Strategy::Forward`
//! chains the hold stepwise and runs the ramp-down per hold. `Strategy::Cold`
//! propagates every cell from scratch.

mod io;

pub use io::{cross_section_csv, sweep_csv, SweepManifest};

use std::time::Instant;

use nalgebra::{DVector, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electrostatics::{RampShape, VoltageFunction};
use crate::error::{Error, Result};
use crate::gate::{optimize_rotations, target_gate, FidelityReport, GateKind, GateMatrix};
use crate::pipeline::GateSetup;
use crate::propagation::{HoldPropagator, Packed, Propagator, SolverStats};

const RAMP_UNIT: f64 = 4.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Adjoint,
    Forward,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// ns, ascending
    pub ramp_values: Vec<f64>,
    /// ns, ascending
    pub hold_values: Vec<f64>,
    pub voltage_fn: VoltageFunction,
    pub target: GateKind,
    /// ns
    pub dt: f64,
    #[serde(default)]
    pub shape: RampShape,
    #[serde(default)]
    pub strategy: Strategy,
}

/// `start, start + step, …` up to `end` (inclusive within 1e-9 steps),
/// each value computed as `k·step` to avoid drift.
pub fn linspace_steps(k0: i64, k1: i64, step: f64) -> Vec<f64> {
    (k0..=k1).map(|k| k as f64 * step).collect()
}

impl SweepSpec {
    /// Holds 0–5 ns by 0.1 ns; ramps 0.05·4√2 to 0.5·4√2 ns by 0.01·4√2 ns.
    pub fn sqrt_iswap(voltage_fn: VoltageFunction, dt: f64) -> Self {
        SweepSpec {
            ramp_values: linspace_steps(5, 50, 0.01 * RAMP_UNIT),
            hold_values: linspace_steps(0, 50, 0.1),
            voltage_fn,
            target: GateKind::SqrtIswap,
            dt,
            shape: RampShape::Staged,
            strategy: Strategy::Adjoint,
        }
    }

    /// Ramps to 0.7·4√2 ns and holds to 10 ns.
    pub fn cz(voltage_fn: VoltageFunction, dt: f64) -> Self {
        SweepSpec {
            ramp_values: linspace_steps(5, 70, 0.01 * RAMP_UNIT),
            hold_values: linspace_steps(0, 100, 0.1),
            voltage_fn,
            target: GateKind::Cz,
            dt,
            shape: RampShape::Staged,
            strategy: Strategy::Adjoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: &[f64], min_exclusive: bool| -> Result<()> {
            if v.is_empty() {
                return Err(Error::invalid(format!("{name} is empty")));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0 || (min_exclusive && *x == 0.0)) {
                return Err(Error::invalid(format!("{name} must be finite and {}", if min_exclusive { "positive" } else { "non-negative" })));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!("{name} must be strictly ascending")));
            }
            Ok(())
        };
        check("ramp_values", &self.ramp_values, true)?;
        check("hold_values", &self.hold_values, false)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        self.voltage_fn.validate()?;
        if self.strategy != Strategy::Cold && self.shape != RampShape::Staged {
            return Err(Error::invalid("warm-started sweeps need the staged ramp shape; use the cold strategy"));
        }
        if self.strategy == Strategy::Forward && self.hold_values.len() > 2 {
            let h = &self.hold_values;
            let step = h[1] - h[0];
            if h.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0)) {
                return Err(Error::invalid("forward warm start needs a uniform hold step"));
            }
        }
        Ok(())
    }

    pub fn hold_steps(&self, h: f64) -> usize {
        (h / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t_ramp: f64,
    pub t_hold: f64,
    pub outcome: std::result::Result<FidelityReport, String>,
    #[serde(skip)]
    pub gate: Option<GateMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub t_ramp: f64,
    pub t_hold: f64,
    pub fidelity: f64,
    pub swap_error: f64,
    pub leakage_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub solver: SolverStats,
    /// Crank–Nicolson steps (each advances all four qubit states).
    pub cn_steps: usize,
    /// Hold steps taken as eigenbasis phases instead.
    pub dense_hold_steps: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Ramp-major: cell (i, j) is at i·holds + j.
    pub cells: Vec<Cell>,
    pub optimum: Option<Optimum>,
    pub stats: SweepStats,
    pub grid_points: (usize, usize),
}

impl SweepResult {
    pub fn cell(&self, ramp_index: usize, hold_index: usize) -> &Cell {
        &self.cells[ramp_index * self.spec.hold_values.len() + hold_index]
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }
}

/// Grid argmax of F; ties go to the shorter gate, then the shorter ramp.
pub fn find_optimum(cells: &[Cell]) -> Option<Optimum> {
    let mut best: Option<Optimum> = None;
    for c in cells {
        let Ok(r) = &c.outcome else { continue };
        if !r.fidelity.is_finite() {
            continue;
        }
        let cand = Optimum {
            t_ramp: c.t_ramp,
            t_hold: c.t_hold,
            fidelity: r.fidelity,
            swap_error: r.swap_error,
            leakage_error: r.leakage_error,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                let (tg, tb) = (cand.t_hold + 2.0 * cand.t_ramp, b.t_hold + 2.0 * b.t_ramp);
                cand.fidelity > b.fidelity
                    || (cand.fidelity == b.fidelity && (tg < tb || (tg == tb && cand.t_ramp < b.t_ramp)))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best
}

struct RowOutput {
    cells: Vec<Cell>,
    stats: SolverStats,
    dense: usize,
}

fn report(u: GateMatrix, target: &GateMatrix) -> (Option<GateMatrix>, std::result::Result<FidelityReport, String>) {
    if !u.is_finite() {
        return (None, Err(Error::NonFinite("gate matrix".into()).to_string()));
    }
    (Some(u), Ok(optimize_rotations(&u, target)))
}

fn failed_row(spec: &SweepSpec, r: f64, e: &Error) -> Vec<Cell> {
    spec.hold_values
        .iter()
        .map(|&h| Cell { t_ramp: r, t_hold: h, outcome: Err(e.to_string()), gate: None })
        .collect()
}

fn row_cold(setup: &GateSetup, spec: &SweepSpec, prop: &mut Propagator, r: f64) -> Vec<Cell> {
    let target = target_gate(spec.target);
    spec.hold_values
        .iter()
        .map(|&h| {
            let res = setup.plan(r, h, spec.dt, spec.shape).and_then(|p| setup.evaluate(prop, &p, spec.target));
            match res {
                Ok((u, _)) => {
                    let (gate, outcome) = report(u, &target);
                    Cell { t_ramp: r, t_hold: h, outcome, gate }
                }
                Err(e) => Cell { t_ramp: r, t_hold: h, outcome: Err(e.to_string()), gate: None },
            }
        })
        .collect()
}

fn packed_qubits(setup: &GateSetup) -> Vec<Packed> {
    setup.qubit_states().iter().map(Packed::from_state).collect()
}

fn gate_from_packed(setup: &GateSetup, finals: &[Packed]) -> Result<GateMatrix> {
    let states = finals.iter().map(|p| p.to_state(setup.basis.clone())).collect::<Result<Vec<_>>>()?;
    setup.gate_matrix(&states)
}

fn row_forward(setup: &GateSetup, spec: &SweepSpec, prop: &mut Propagator, r: f64) -> Result<Vec<Cell>> {
    let target = target_gate(spec.target);
    let base = setup.plan(r, 0.0, spec.dt, spec.shape)?;
    let rise = base.segments()[0];
    let lambda = |t: f64| base.lambda_at(t);
    let mut states = packed_qubits(setup);
    prop.evolve_segment(&mut states, &rise, &lambda, false)?;
    let hold_lambda = base.lambda_at(r)?;
    let mut done = 0usize;
    let mut cells = Vec::with_capacity(spec.hold_values.len());
    for &h in &spec.hold_values {
        let plan = setup.plan(r, h, spec.dt, spec.shape)?;
        let [_, hold, fall] = plan.segments();
        // extend the hold from the previous snapshot
        for k in done..hold.steps {
            prop.step(&mut states, hold_lambda, hold.width(k), hold.boundary(k + 1))?;
        }
        done = done.max(hold.steps);
        let mut finals = states.clone();
        prop.evolve_segment(&mut finals, &fall, &|t| plan.lambda_at(t), false)?;
        let (gate, outcome) = report(gate_from_packed(setup, &finals)?, &target);
        cells.push(Cell { t_ramp: r, t_hold: h, outcome, gate });
    }
    Ok(cells)
}

fn row_adjoint(setup: &GateSetup, spec: &SweepSpec, prop: &mut Propagator, hold: &HoldPropagator, r: f64) -> Result<Vec<Cell>> {
    let target = target_gate(spec.target);
    let base = setup.plan(r, 0.0, spec.dt, spec.shape)?;
    let [rise, _, fall] = base.segments();
    let lambda = |t: f64| base.lambda_at(t);
    let mut up = packed_qubits(setup);
    prop.evolve_segment(&mut up, &rise, &lambda, false)?;
    let mut down = packed_qubits(setup);
    prop.evolve_segment(&mut down, &fall, &lambda, true)?;
    let b: Vec<DVector<Complex64>> = up.iter().map(|p| hold.project(p)).collect();
    let a: Vec<DVector<Complex64>> = down.iter().map(|p| hold.project(p)).collect();
    let mut cells = Vec::with_capacity(spec.hold_values.len());
    for &h in &spec.hold_values {
        let f = hold.factors(spec.hold_steps(h));
        let mut m = Matrix4::zeros();
        for j in 0..4 {
            let fb = f.component_mul(&b[j]);
            for i in 0..4 {
                m[(i, j)] = a[i].dotc(&fb);
            }
        }
        let (gate, outcome) = report(GateMatrix(m), &target);
        cells.push(Cell { t_ramp: r, t_hold: h, outcome, gate });
    }
    Ok(cells)
}

/// Runs the sweep with rows spread over the current rayon pool. Cell
/// failures are recorded, not raised.
pub fn grid_search(setup: &GateSetup, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if spec.voltage_fn != setup.voltage_fn {
        return Err(Error::invalid("sweep voltage function differs from the setup's"));
    }
    let clock = Instant::now();
    let proto = setup.propagator()?;
    let hold = match spec.strategy {
        Strategy::Adjoint => {
            let mut p = proto.clone();
            let lmax = spec.voltage_fn.lambda_max;
            let tau = p.ns_to_time(spec.dt);
            Some(HoldPropagator::new(p.cache_at(lmax)?, tau))
        }
        _ => None,
    };
    let rows: Vec<RowOutput> = spec
        .ramp_values
        .par_iter()
        .map(|&r| {
            let mut prop = proto.clone();
            let cells = match spec.strategy {
                Strategy::Cold => Ok(row_cold(setup, spec, &mut prop, r)),
                Strategy::Forward => row_forward(setup, spec, &mut prop, r),
                Strategy::Adjoint => row_adjoint(setup, spec, &mut prop, hold.as_ref().expect("built for adjoint"), r),
            };
            let dense = match spec.strategy {
                Strategy::Adjoint => spec.hold_values.iter().map(|&h| spec.hold_steps(h)).sum(),
                _ => 0,
            };
            RowOutput {
                cells: cells.unwrap_or_else(|e| failed_row(spec, r, &e)),
                stats: prop.stats,
                dense,
            }
        })
        .collect();
    let mut stats = SweepStats::default();
    let mut cells = Vec::with_capacity(spec.ramp_values.len() * spec.hold_values.len());
    for row in rows {
        stats.solver.merge(&row.stats);
        stats.dense_hold_steps += row.dense;
        cells.extend(row.cells);
    }
    stats.cn_steps = stats.solver.steps;
    stats.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(SweepResult {
        optimum: find_optimum(&cells),
        spec: spec.clone(),
        cells,
        stats,
        grid_points: setup.basis.shape(),
    })
}

/// Dense map over center ± window with the given resolution, plus the two
/// axis cross-sections through the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub center: (f64, f64),
    pub sweep: SweepResult,
    /// Fixed t_ramp = center, all holds.
    pub hold_section: Vec<Cell>,
    /// Fixed t_hold = center, all ramps.
    pub ramp_section: Vec<Cell>,
}

pub fn sensitivity_sweep(setup: &GateSetup, center: (f64, f64), window: f64, resolution: f64, base: &SweepSpec) -> Result<SensitivityResult> {
    if !(window >= 0.0 && window.is_finite()) {
        return Err(Error::invalid("window must be non-negative"));
    }
    let k = if window == 0.0 {
        0
    } else {
        if !(resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        let k = (window / resolution).round();
        if (k * resolution - window).abs() > 1e-9 * window.max(1.0) {
            return Err(Error::invalid(format!("resolution {resolution} does not divide window {window}")));
        }
        k as i64
    };
    // snap to 1e-12 ns so 0.11 prints as 0.11
    let axis = |c: f64| -> Vec<f64> { (-k..=k).map(|i| ((c + i as f64 * resolution) * 1e12).round() / 1e12).collect() };
    let (ramps, holds) = (axis(center.0), axis(center.1));
    if ramps[0] <= 0.0 || holds[0] < 0.0 {
        return Err(Error::invalid("sensitivity window extends outside t_ramp > 0, t_hold ≥ 0"));
    }
    let spec = SweepSpec {
        ramp_values: ramps,
        hold_values: holds,
        ..base.clone()
    };
    let sweep = grid_search(setup, &spec)?;
    let n = spec.hold_values.len();
    let mid = k as usize;
    let hold_section = sweep.cells[mid * n..(mid + 1) * n].to_vec();
    let ramp_section = (0..spec.ramp_values.len()).map(|i| sweep.cells[i * n + mid].clone()).collect();
    Ok(SensitivityResult { center, sweep, hold_section, ramp_section })
}

#[cfg(test)]
mod tests;
