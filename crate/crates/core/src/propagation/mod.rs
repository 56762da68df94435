//! Crank–Nicolson time evolution under the λ(t)-driven Hamiltonian.
//!
//! Evolution is generated by H − E_ref, where E_ref is the operator cache's
//! energy offset (normally the idle ground energy). The shift only changes
//! a global phase, but keeps the Cayley phase error of the qubit states small.

mod hold;
mod io;
mod linalg;

pub use hold::HoldPropagator;
pub use io::{overlaps_csv, parse_overlaps_csv};
pub use linalg::{crank_nicolson_step, GmresOptions, GmresOutcome, Packed, SeparablePreconditioner};

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::device::Device;
use crate::dvr::{inner, potential_diagonals, OperatorCache, TwoBodyBasis, TwoBodyState};
use crate::electrostatics::{RampSchedule, RampShape, VoltageFunction};
use crate::error::{Error, Result};
use linalg::{cn_step, Scratch};

/// Default step, ns.
pub const DEFAULT_DT_NS: f64 = 0.001;

/// Operators along V(λ). The potentials are affine in λ, so they are
/// interpolated from the two endpoint evaluations.
#[derive(Debug, Clone)]
pub struct DrivenOperators {
    cache: OperatorCache,
    start: (DVector<f64>, DVector<f64>),
    end: (DVector<f64>, DVector<f64>),
    lambda_max: f64,
    lambda: f64,
}

impl DrivenOperators {
    pub fn new(
        device: &Device,
        basis: Arc<TwoBodyBasis>,
        vf: &VoltageFunction,
        energy_offset: f64,
    ) -> Result<Self> {
        vf.validate()?;
        let mut cache = device.operators(basis.clone(), &vf.start)?;
        cache.set_energy_offset(energy_offset);
        let start = potential_diagonals(&basis, &device.profile, &vf.start, &device.units)?;
        let end = potential_diagonals(&basis, &device.profile, &vf.end, &device.units)?;
        Ok(DrivenOperators {
            cache,
            start,
            end,
            lambda_max: vf.lambda_max,
            lambda: 0.0,
        })
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0 && lambda <= self.lambda_max + 1e-12) {
            return Err(Error::invalid(format!("lambda = {lambda} outside [0, {}]", self.lambda_max)));
        }
        if lambda == self.lambda {
            return Ok(());
        }
        let mix = |a: &DVector<f64>, b: &DVector<f64>| a.zip_map(b, |x, y| (1.0 - lambda) * x + lambda * y);
        let l = mix(&self.start.0, &self.end.0);
        let r = mix(&self.start.1, &self.end.1);
        self.cache.set_potentials(l, r)?;
        self.lambda = lambda;
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cache(&self) -> &OperatorCache {
        &self.cache
    }

    pub fn basis(&self) -> &Arc<TwoBodyBasis> {
        &self.cache.basis
    }
}

/// A run of equal steps covering [start, end].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Segment {
    /// Boundary time k ∈ [0, steps]; the last boundary is `end` exactly.
    pub fn boundary(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.end
        } else {
            self.start + k as f64 * (self.end - self.start) / self.steps as f64
        }
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        let (a, b) = (self.boundary(k), self.boundary(k + 1));
        a + 0.5 * (b - a)
    }

    pub fn width(&self, k: usize) -> f64 {
        self.boundary(k + 1) - self.boundary(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationPlan {
    pub schedule: RampSchedule,
    pub voltage_fn: VoltageFunction,
    /// ns
    pub dt: f64,
    /// ns; each is mapped to the nearest step boundary.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub shape: RampShape,
}

impl PropagationPlan {
    pub fn new(schedule: RampSchedule, voltage_fn: VoltageFunction, dt: f64) -> Result<Self> {
        let plan = PropagationPlan {
            schedule,
            voltage_fn,
            dt,
            snapshot_times: Vec::new(),
            shape: RampShape::Staged,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_shape(mut self, shape: RampShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Result<Self> {
        self.snapshot_times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        self.voltage_fn.validate()?;
        let tg = self.schedule.t_gate;
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= tg)) {
            return Err(Error::invalid(format!("snapshot time {t} outside [0, {tg}]")));
        }
        Ok(())
    }

    /// Rise, hold and fall segments. Ramps take at least one step; an empty
    /// hold takes none.
    pub fn segments(&self) -> [Segment; 3] {
        let [a, b, c, d] = self.schedule.stage_bounds();
        let count = |len: f64, min: usize| ((len / self.dt).round() as usize).max(min);
        let hold_min = usize::from(self.schedule.t_hold > 0.0);
        [
            Segment { start: a, end: b, steps: count(b - a, 1) },
            Segment { start: b, end: c, steps: count(self.schedule.t_hold, hold_min) },
            Segment { start: c, end: d, steps: count(d - c, 1) },
        ]
    }

    pub fn total_steps(&self) -> usize {
        self.segments().iter().map(|s| s.steps).sum()
    }

    /// All step boundaries, t = 0 first.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for s in self.segments() {
            out.extend((1..=s.steps).map(|k| s.boundary(k)));
        }
        out
    }

    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        let t = t.clamp(0.0, self.schedule.t_gate);
        self.schedule.lambda(self.shape, self.voltage_fn.lambda_max, t)
    }

    /// Index of the step boundary within half a step of `t`.
    pub fn boundary_index(&self, t: f64) -> Result<usize> {
        let b = self.boundaries();
        let (i, d) = b
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x - t).abs()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("boundaries are never empty");
        if d > 0.5 * self.dt + 1e-12 {
            return Err(Error::invalid(format!("time {t} ns is not within half a step of a step boundary")));
        }
        Ok(i)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub gmres_iterations: usize,
    pub matvecs: usize,
    pub max_residual: f64,
    pub preconditioner_builds: usize,
}

impl SolverStats {
    pub fn merge(&mut self, o: &SolverStats) {
        self.steps += o.steps;
        self.gmres_iterations += o.gmres_iterations;
        self.matvecs += o.matvecs;
        self.max_residual = self.max_residual.max(o.max_residual);
        self.preconditioner_builds += o.preconditioner_builds;
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub state: TwoBodyState,
}

/// |⟨Φ_k|Ψ(t)⟩|² against up to six reference states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OverlapSeries {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OverlapTracking {
    pub reference: Vec<TwoBodyState>,
    /// Record every this many steps (plus t = 0 and the final time).
    pub every: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: TwoBodyState,
    pub snapshots: Vec<Snapshot>,
    /// |1 − ‖ψ(t_end)‖/‖ψ(t_start)‖|
    pub norm_drift: f64,
    pub overlaps: Option<OverlapSeries>,
    /// Time of `final_state`, ns. Less than t_gate for a partial trajectory.
    pub t_end: f64,
}

/// A failed step, with everything propagated up to the last good boundary.
#[derive(Debug)]
pub struct PropagationFailure {
    pub error: Error,
    pub partial: Vec<Trajectory>,
}

impl std::fmt::Display for PropagationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.partial.first().map_or(0.0, |p| p.t_end);
        write!(f, "{} (propagated to t = {t} ns)", self.error)
    }
}

impl From<Box<PropagationFailure>> for Error {
    fn from(f: Box<PropagationFailure>) -> Self {
        f.error
    }
}

pub type PropagationResult<T> = std::result::Result<T, Box<PropagationFailure>>;

/// Steps states through a driven Hamiltonian. Owns its mutable operator
/// cache; clone one per worker.
#[derive(Debug, Clone)]
pub struct Propagator {
    ops: DrivenOperators,
    pre: Option<(f64, SeparablePreconditioner)>,
    time_unit_ns: f64,
    pub gmres: GmresOptions,
    pub stats: SolverStats,
    scratch: Scratch,
}

impl Propagator {
    pub fn new(
        device: &Device,
        basis: Arc<TwoBodyBasis>,
        vf: &VoltageFunction,
        energy_offset: f64,
    ) -> Result<Self> {
        let (n, m) = basis.shape();
        Ok(Propagator {
            ops: DrivenOperators::new(device, basis, vf, energy_offset)?,
            pre: None,
            time_unit_ns: device.units.time_unit_ns(),
            gmres: GmresOptions::default(),
            stats: SolverStats::default(),
            scratch: Scratch::new(n, m),
        })
    }

    pub fn basis(&self) -> &Arc<TwoBodyBasis> {
        self.ops.basis()
    }

    pub fn operators(&self) -> &DrivenOperators {
        &self.ops
    }

    /// Operator cache refreshed at `lambda`.
    pub fn cache_at(&mut self, lambda: f64) -> Result<&OperatorCache> {
        self.ops.set_lambda(lambda)?;
        Ok(self.ops.cache())
    }

    pub fn ns_to_time(&self, ns: f64) -> f64 {
        ns / self.time_unit_ns
    }

    /// One step of `dt_ns` (negative: the exact inverse step) at `lambda`
    /// for every state.
    pub fn step(&mut self, states: &mut [Packed], lambda: f64, dt_ns: f64, t: f64) -> Result<()> {
        self.ops.set_lambda(lambda)?;
        if self.pre.as_ref().map_or(true, |(l, _)| *l != lambda) {
            self.pre = Some((lambda, SeparablePreconditioner::new(self.ops.cache())));
            self.stats.preconditioner_builds += 1;
        }
        let pre = &self.pre.as_ref().expect("built above").1;
        let tau = dt_ns / self.time_unit_ns;
        // commit only when every state stepped, so a failure leaves all of
        // them at the same boundary
        let mut next = states.to_vec();
        for psi in next.iter_mut() {
            let o = cn_step(self.ops.cache(), pre, tau, psi, &self.gmres, &mut self.scratch).map_err(|e| match e {
                Error::LinearSolveFailed { residual, iterations, .. } => Error::LinearSolveFailed { t, residual, iterations },
                other => other,
            })?;
            if !psi.is_finite() {
                return Err(Error::NonFinite(format!("state at t = {t} ns")));
            }
            self.stats.gmres_iterations += o.iterations;
            self.stats.matvecs += o.matvecs;
            self.stats.max_residual = self.stats.max_residual.max(o.residual);
        }
        states.clone_from_slice(&next);
        self.stats.steps += 1;
        Ok(())
    }

    /// Evolves over one segment with λ from `lambda`. `backward` applies the
    /// inverse steps in reverse order, taking states at `seg.end` to
    /// `seg.start`.
    pub fn evolve_segment(
        &mut self,
        states: &mut [Packed],
        seg: &Segment,
        lambda: &dyn Fn(f64) -> Result<f64>,
        backward: bool,
    ) -> Result<()> {
        for i in 0..seg.steps {
            let k = if backward { seg.steps - 1 - i } else { i };
            let dt = seg.width(k);
            let mid = seg.midpoint(k);
            let l = lambda(mid)?;
            let t = if backward { seg.boundary(k) } else { seg.boundary(k + 1) };
            self.step(states, l, if backward { -dt } else { dt }, t)?;
        }
        Ok(())
    }

    pub fn propagate(&mut self, plan: &PropagationPlan, initial: &TwoBodyState) -> PropagationResult<Trajectory> {
        let mut v = self.propagate_many(plan, std::slice::from_ref(initial), None)?;
        Ok(v.remove(0))
    }

    /// Propagates several states through the same plan from t = 0.
    pub fn propagate_many(
        &mut self,
        plan: &PropagationPlan,
        initials: &[TwoBodyState],
        tracking: Option<&OverlapTracking>,
    ) -> PropagationResult<Vec<Trajectory>> {
        let fail = |error: Error| Box::new(PropagationFailure { error, partial: Vec::new() });
        plan.validate().map_err(fail)?;
        for s in initials {
            if s.coeffs.shape() != self.basis().shape() || *s.basis != **self.basis() {
                return Err(fail(Error::BasisMismatch("initial state basis differs from the propagator's".into())));
            }
        }
        self.run(plan, initials, 0, tracking)
    }

    /// Continues a hold-stage snapshot to the end of `plan`, whose hold may
    /// be longer than the donor's. Needs the staged ramp shape, where λ is
    /// constant through the hold.
    pub fn resume_from(&mut self, snapshot: &Snapshot, plan: &PropagationPlan) -> PropagationResult<Trajectory> {
        let fail = |error: Error| Box::new(PropagationFailure { error, partial: Vec::new() });
        plan.validate().map_err(fail)?;
        if plan.shape != RampShape::Staged {
            return Err(fail(Error::invalid("resuming needs the staged ramp shape (constant hold)")));
        }
        let sched = &plan.schedule;
        let t = snapshot.time;
        let tol = 1e-6 * plan.dt;
        if t < sched.t_ramp - tol || t > sched.t_ramp + sched.t_hold + tol {
            return Err(fail(Error::invalid(format!(
                "snapshot at t = {t} ns lies outside the hold window [{}, {}]",
                sched.t_ramp,
                sched.t_ramp + sched.t_hold
            ))));
        }
        let idx = plan.boundary_index(t).map_err(fail)?;
        if (plan.boundaries()[idx] - t).abs() > tol {
            return Err(fail(Error::invalid(format!("snapshot at t = {t} ns is not on a step boundary of the plan"))));
        }
        if *snapshot.state.basis != **self.basis() {
            return Err(fail(Error::BasisMismatch("snapshot basis differs from the propagator's".into())));
        }
        let mut v = self.run(plan, std::slice::from_ref(&snapshot.state), idx, None)?;
        Ok(v.remove(0))
    }

    fn run(
        &mut self,
        plan: &PropagationPlan,
        initials: &[TwoBodyState],
        start_boundary: usize,
        tracking: Option<&OverlapTracking>,
    ) -> PropagationResult<Vec<Trajectory>> {
        let basis = self.basis().clone();
        let bounds = plan.boundaries();
        let mut snap_at: Vec<(usize, f64)> = Vec::new();
        for &t in &plan.snapshot_times {
            let i = plan
                .boundary_index(t)
                .map_err(|error| Box::new(PropagationFailure { error, partial: Vec::new() }))?;
            if i >= start_boundary {
                snap_at.push((i, bounds[i]));
            }
        }
        snap_at.sort_by(|a, b| a.0.cmp(&b.0));
        snap_at.dedup_by_key(|s| s.0);

        let mut states: Vec<Packed> = initials.iter().map(Packed::from_state).collect();
        let norms0: Vec<f64> = states.iter().map(Packed::norm).collect();
        let mut snaps: Vec<Vec<Snapshot>> = vec![Vec::new(); states.len()];
        let mut series: Vec<OverlapSeries> = vec![OverlapSeries::default(); states.len()];
        let every = tracking.map_or(1, |t| t.every.max(1));

        let record = |b: usize, states: &[Packed], snaps: &mut Vec<Vec<Snapshot>>, series: &mut Vec<OverlapSeries>, last: bool| -> Result<()> {
            let need_snap = snap_at.iter().any(|s| s.0 == b);
            let need_overlap = tracking.is_some() && ((b - start_boundary) % every == 0 || last);
            if !(need_snap || need_overlap) {
                return Ok(());
            }
            for (i, p) in states.iter().enumerate() {
                let st = p.to_state(basis.clone())?;
                if let Some(tr) = tracking.filter(|_| need_overlap) {
                    if series[i].times.last() != Some(&bounds[b]) {
                        let row = tr
                            .reference
                            .iter()
                            .map(|r| inner(r, &st).map(|c| c.norm_sqr()))
                            .collect::<Result<Vec<_>>>()?;
                        series[i].times.push(bounds[b]);
                        series[i].rows.push(row);
                    }
                }
                if need_snap {
                    snaps[i].push(Snapshot { time: bounds[b], state: st });
                }
            }
            Ok(())
        };

        let finish = |states: &[Packed], snaps: Vec<Vec<Snapshot>>, series: Vec<OverlapSeries>, t_end: f64| -> Result<Vec<Trajectory>> {
            states
                .iter()
                .zip(snaps)
                .zip(series)
                .zip(&norms0)
                .map(|(((p, sn), se), n0)| {
                    Ok(Trajectory {
                        final_state: p.to_state(basis.clone())?,
                        snapshots: sn,
                        norm_drift: if *n0 > 0.0 { (1.0 - p.norm() / n0).abs() } else { 0.0 },
                        overlaps: tracking.map(|_| se),
                        t_end,
                    })
                })
                .collect()
        };

        let segs = plan.segments();
        let mut b = 0usize;
        let outcome: Result<()> = (|| {
            record(start_boundary, &states, &mut snaps, &mut series, false)?;
            for seg in &segs {
                for k in 0..seg.steps {
                    b += 1;
                    if b <= start_boundary {
                        continue;
                    }
                    let l = plan.lambda_at(seg.midpoint(k))?;
                    self.step(&mut states, l, seg.width(k), seg.boundary(k + 1))?;
                    record(b, &states, &mut snaps, &mut series, b + 1 == bounds.len())?;
                }
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => finish(&states, snaps, series, plan.schedule.t_gate)
                .map_err(|error| Box::new(PropagationFailure { error, partial: Vec::new() })),
            Err(error) => {
                let t_end = bounds[b.saturating_sub(1).max(start_boundary)];
                let partial = finish(&states, snaps, series, t_end).unwrap_or_default();
                Err(Box::new(PropagationFailure { error, partial }))
            }
        }
    }
}

#[cfg(test)]
mod tests;
