use super::*;
use crate::device::{Device, GridOptions};
use crate::electrostatics::{TargetConfig, TABLE_I_IDLE, TABLE_I_SWAP};
use crate::gate::RotationAngles;
use crate::pipeline::QubitIndexing;

fn setup() -> GateSetup {
    let vf = VoltageFunction::zeta(TABLE_I_IDLE, TABLE_I_SWAP, TargetConfig::II);
    GateSetup::new(Device::default(), vf, &GridOptions::square(10), QubitIndexing::Positional).unwrap()
}

fn small_spec(s: &GateSetup, strategy: Strategy) -> SweepSpec {
    SweepSpec {
        ramp_values: vec![0.1, 0.15],
        hold_values: vec![0.0, 0.05, 0.1, 0.15],
        voltage_fn: s.voltage_fn.clone(),
        target: GateKind::SqrtIswap,
        dt: 0.002,
        shape: RampShape::Staged,
        strategy,
    }
}

fn fid(c: &Cell) -> f64 {
    c.outcome.as_ref().unwrap().fidelity
}

#[test]
fn strategies_agree_and_cost_as_expected() {
    let s = setup();
    let cold = grid_search(&s, &small_spec(&s, Strategy::Cold)).unwrap();
    let fwd = grid_search(&s, &small_spec(&s, Strategy::Forward)).unwrap();
    let adj = grid_search(&s, &small_spec(&s, Strategy::Adjoint)).unwrap();
    for ((c, f), a) in cold.cells.iter().zip(&fwd.cells).zip(&adj.cells) {
        assert!((fid(c) - fid(f)).abs() < 1e-8);
        assert!((fid(c) - fid(a)).abs() < 1e-8);
        let (gc, ga) = (c.gate.unwrap(), a.gate.unwrap());
        assert!(gc.max_abs_diff(&ga) < 1e-8);
    }
    // ramps of 50 and 75 steps, holds of 0, 25, 50, 75 steps
    let ramps = [50usize, 75];
    let holds = [0usize, 25, 50, 75];
    let cold_steps: usize = ramps.iter().map(|r| holds.iter().map(|h| 2 * r + h).sum::<usize>()).sum();
    let fwd_steps: usize = ramps.iter().map(|r| r + 75 + holds.len() * r).sum();
    let adj_steps: usize = ramps.iter().map(|r| 2 * r).sum();
    assert_eq!(cold.stats.cn_steps, cold_steps);
    assert_eq!(fwd.stats.cn_steps, fwd_steps);
    assert_eq!(adj.stats.cn_steps, adj_steps);
    assert_eq!(adj.stats.dense_hold_steps, 2 * 150);
    assert!(adj_steps < fwd_steps && fwd_steps < cold_steps);
}

#[test]
fn single_cell_equals_direct_pipeline() {
    let s = setup();
    let mut spec = small_spec(&s, Strategy::Cold);
    spec.ramp_values = vec![0.12];
    spec.hold_values = vec![0.07];
    let r = grid_search(&s, &spec).unwrap();
    let plan = s.plan(0.12, 0.07, 0.002, RampShape::Staged).unwrap();
    let (u, rep) = s.evaluate(&mut s.propagator().unwrap(), &plan, GateKind::SqrtIswap).unwrap();
    assert_eq!(r.cells[0].gate.unwrap(), u);
    assert_eq!(r.cells[0].outcome.as_ref().unwrap(), &rep);
    let o = r.optimum.unwrap();
    assert_eq!((o.t_ramp, o.t_hold, o.fidelity), (0.12, 0.07, rep.fidelity));
}

#[test]
fn sweeps_are_deterministic() {
    let s = setup();
    let spec = small_spec(&s, Strategy::Adjoint);
    let a = sweep_csv(&grid_search(&s, &spec).unwrap());
    let b = sweep_csv(&grid_search(&s, &spec).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 9);
    assert!(a.starts_with("t_ramp_ns,t_hold_ns,fidelity,swap_error,leak_error,theta_L,theta_R\n"));
}

#[test]
fn sensitivity_window() {
    let s = setup();
    let base = small_spec(&s, Strategy::Adjoint);
    let sens = sensitivity_sweep(&s, (0.12, 0.08), 0.02, 0.01, &base).unwrap();
    assert_eq!(sens.sweep.spec.ramp_values.len(), 5);
    assert_eq!(sens.sweep.spec.hold_values.len(), 5);
    assert_eq!(sens.hold_section.len(), 5);
    assert_eq!(&sens.hold_section[..], &sens.sweep.cells[10..15]);
    for (i, c) in sens.ramp_section.iter().enumerate() {
        assert_eq!(c, sens.sweep.cell(i, 2));
    }
    let centre = sens.sweep.cell(2, 2);
    assert_eq!((centre.t_ramp, centre.t_hold), (0.12, 0.08));
    let single = sensitivity_sweep(&s, (0.12, 0.08), 0.0, 0.01, &base).unwrap();
    assert_eq!(single.sweep.cells.len(), 1);
    assert_eq!(fid(&single.sweep.cells[0]), fid(centre));
    assert!(sensitivity_sweep(&s, (0.12, 0.08), 0.025, 0.01, &base).is_err());
    assert!(sensitivity_sweep(&s, (0.12, 0.0), 0.02, 0.01, &base).is_err());
}

#[test]
fn preset_ranges() {
    let vf = VoltageFunction::zeta(TABLE_I_IDLE, TABLE_I_SWAP, TargetConfig::II);
    let s = SweepSpec::sqrt_iswap(vf.clone(), 0.001);
    assert_eq!((s.ramp_values.len(), s.hold_values.len()), (46, 51));
    assert!((s.ramp_values[0] - 0.05 * RAMP_UNIT).abs() < 1e-15);
    assert!((s.ramp_values[45] - 0.5 * RAMP_UNIT).abs() < 1e-14);
    assert_eq!(s.hold_values[50], 5.0);
    s.validate().unwrap();
    let c = SweepSpec::cz(vf, 0.001);
    assert_eq!((c.ramp_values.len(), c.hold_values.len()), (66, 101));
    assert!((c.ramp_values[65] - 0.7 * RAMP_UNIT).abs() < 1e-14);
    assert_eq!(c.hold_values[100], 10.0);
}

#[test]
fn validation() {
    let vf = VoltageFunction::zeta(TABLE_I_IDLE, TABLE_I_SWAP, TargetConfig::II);
    let mut s = SweepSpec::sqrt_iswap(vf, 0.001);
    s.hold_values.clear();
    assert!(s.validate().is_err());
    s.hold_values = vec![0.0, 0.1, 0.3];
    s.strategy = Strategy::Forward;
    assert!(s.validate().is_err());
    s.strategy = Strategy::Adjoint;
    s.validate().unwrap();
    s.shape = RampShape::Exact;
    assert!(s.validate().is_err());
    s.strategy = Strategy::Cold;
    s.validate().unwrap();
    s.ramp_values = vec![0.2, 0.1];
    assert!(s.validate().is_err());
}

fn cell(r: f64, h: f64, f: Option<f64>) -> Cell {
    let rep = FidelityReport {
        fidelity: f.unwrap_or(0.0),
        angles: RotationAngles::default(),
        swap_error: 0.0,
        leakage_error: 0.0,
        gate: Default::default(),
        flat: false,
    };
    Cell {
        t_ramp: r,
        t_hold: h,
        outcome: f.map(|_| rep).ok_or_else(|| "boom".to_string()),
        gate: None,
    }
}

#[test]
fn optimum_tie_break_and_error_markers() {
    let cells = vec![
        cell(0.2, 0.5, Some(0.9)),
        cell(0.1, 0.6, Some(0.9)),
        cell(0.1, 0.2, None),
        cell(0.3, 0.0, Some(0.8)),
    ];
    let o = find_optimum(&cells).unwrap();
    assert_eq!((o.t_ramp, o.t_hold), (0.1, 0.6));
    let csv = cross_section_csv(&cells);
    assert!(csv.contains("\n0.1,0.2,ERR,ERR,ERR,ERR,ERR\n"));
    assert!(find_optimum(&[cell(0.1, 0.1, None)]).is_none());
}
