use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::{Cli, CliError, Command};
use crate::config::RunConfig;
use crate::device::{Device, GridOptions};
use crate::electrostatics::{VoltageFunction, VoltageTable};
use crate::error::{Error, Result};
use crate::gate::{elementwise_report, optimize_rotations, target_gate, GateJson};
use crate::manifest::{OutputDir, RunManifest};
use crate::pipeline::GateSetup;
use crate::propagation::{overlaps_csv, parse_overlaps_csv, SolverStats};
use crate::search::{cross_section_csv, grid_search, sensitivity_sweep, sweep_csv, SweepManifest};
use crate::spectrum::{label_states, solve_spectrum, zz_coupling, DavidsonOptions};
use crate::voltage_opt::{optimize_voltages, DeviceSpectrum};

pub const SPECTRUM_HEADER: &str = "lambda,E0,E1,E2,E3,E4,E5,zeta";

const QUBIT_LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// One λ of a spectrum scan; energies and ζ in GHz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub lambda: f64,
    pub energies_ghz: [f64; 6],
    pub zeta_ghz: f64,
    /// False when ζ fell back to the ascending-order formula.
    pub labeled: bool,
}

/// Six lowest eigenenergies along `vf` on one grid covering both ends. ζ
/// comes from the node-count labels where they resolve, else from the
/// ascending energies.
pub fn spectrum_rows(device: &Device, vf: &VoltageFunction, grid: &GridOptions, lambdas: &[f64]) -> Result<Vec<SpectrumRow>> {
    if lambdas.is_empty() {
        return Err(Error::invalid("no lambda values"));
    }
    let far = vf.voltage_at(vf.lambda_max)?;
    let basis = Arc::new(device.build_basis(&vf.start, &[far], grid)?);
    let opts = DavidsonOptions { tol: 1e-9, ..Default::default() };
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cache = device.operators(basis.clone(), &vf.voltage_at(lambda)?)?;
        let sol = solve_spectrum(&cache, 6, &opts)?;
        let (zeta, labeled) = match label_states(&sol, &cache) {
            Ok(l) => (sol.labeled_zz(&l.labels), true),
            Err(_) => (zz_coupling(&sol.energies)?, false),
        };
        let mut energies_ghz = [0.0; 6];
        for (o, e) in energies_ghz.iter_mut().zip(&sol.energies) {
            *o = device.units.energy_to_ghz(*e);
        }
        rows.push(SpectrumRow {
            lambda,
            energies_ghz,
            zeta_ghz: device.units.energy_to_ghz(zeta),
            labeled,
        });
    }
    Ok(rows)
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:?}", r.lambda));
        for e in &r.energies_ghz {
            out.push_str(&format!(",{e:?}"));
        }
        out.push_str(&format!(",{:?}\n", r.zeta_ghz));
    }
    out
}

struct Run {
    cfg: RunConfig,
    hash: String,
    out: OutputDir,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    fn start(command: &str, cfg: RunConfig, out: &Path, config_path: Option<&Path>) -> Result<Self> {
        let hash = cfg.hash();
        let mut manifest = RunManifest::new(command, &hash);
        if let Some(p) = config_path {
            manifest.add_input(p)?;
        }
        for p in cfg.input_files() {
            manifest.add_input(&p)?;
        }
        Ok(Run {
            cfg,
            hash,
            out: OutputDir::new(out)?,
            manifest,
            clock: Instant::now(),
        })
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    fn finish(mut self, solver: impl Serialize) -> Result<RunManifest> {
        self.manifest.wall_seconds = self.clock.elapsed().as_secs_f64();
        self.manifest.solver = serde_json::to_value(solver).expect("stats serialize");
        self.out.finish(self.manifest)
    }

    fn setup(&self, vf: VoltageFunction) -> Result<GateSetup> {
        GateSetup::new(self.cfg.device()?, vf, &self.cfg.grid, self.cfg.numerics.indexing)
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub(super) fn dispatch(cli: &Cli, cfg: RunConfig) -> std::result::Result<(), CliError> {
    let name = match &cli.command {
        Command::Spectrum { .. } => "spectrum",
        Command::Propagate { .. } => "propagate",
        Command::GateSearch => "gate-search",
        Command::Sensitivity { .. } => "sensitivity",
        Command::VoltOpt { .. } => "volt-opt",
        Command::Analyze { .. } => "analyze",
    };
    let mut run = Run::start(name, cfg, &cli.global.out, cli.global.config.as_deref())?;
    match &cli.command {
        Command::Spectrum { lambda, kappa_zero } => {
            let mut device = run.cfg.device()?;
            if *kappa_zero || run.cfg.spectrum.kappa_zero {
                device.kappa = 0.0;
            }
            let lambdas = match lambda {
                Some(l) => l.clone(),
                None => run.cfg.spectrum.lambdas.values()?,
            };
            let vf = run.cfg.voltage_function()?;
            let rows = spectrum_rows(&device, &vf, &run.cfg.grid, &lambdas)?;
            let unlabeled = rows.iter().filter(|r| !r.labeled).count();
            if unlabeled > 0 {
                run.warn(format!("{unlabeled} rows use the ascending-order zeta (labels did not resolve)"));
            }
            run.out.write("spectrum.csv", spectrum_csv(&rows).as_bytes())?;
            run.finish(serde_json::json!({ "rows": rows.len(), "unlabeled_rows": unlabeled }))?;
        }
        Command::Propagate { t_ramp, t_hold, target } => {
            let p = &run.cfg.propagate;
            let (r, h, target) = (t_ramp.unwrap_or(p.t_ramp_ns), t_hold.unwrap_or(p.t_hold_ns), target.unwrap_or(p.target));
            let setup = run.setup(run.cfg.voltage_function()?)?;
            let mut prop = setup.propagator()?;
            let plan = setup.plan(r, h, run.cfg.numerics.dt_ns, run.cfg.numerics.shape)?;
            let trajs = setup.propagate_qubits(&mut prop, &plan, true)?;
            let mut drift: f64 = 0.0;
            for (label, t) in QUBIT_LABELS.iter().zip(&trajs) {
                drift = drift.max(t.norm_drift);
                if let Some(series) = &t.overlaps {
                    run.out.write(&format!("overlaps_{label}.csv"), overlaps_csv(series).as_bytes())?;
                }
            }
            let finals: Vec<_> = trajs.into_iter().map(|t| t.final_state).collect();
            let u = setup.gate_matrix(&finals)?;
            let report = optimize_rotations(&u, &target_gate(target));
            run.out.write("gate_raw.json", GateJson::from_gate(&u).to_json().as_bytes())?;
            run.out.write("gate.json", GateJson::from_report(&report, target).to_json().as_bytes())?;
            println!(
                "F={:.6}, swap_error={:.3e}, leak_error={:.3e}, t_ramp={r} ns, t_hold={h} ns",
                report.fidelity, report.swap_error, report.leakage_error
            );
            run.finish(PropagateStats { solver: prop.stats, max_norm_drift: drift })?;
        }
        Command::GateSearch => {
            let spec = run.cfg.sweep_spec()?;
            let setup = run.setup(spec.voltage_fn.clone())?;
            let result = grid_search(&setup, &spec)?;
            run.out.write("sweep.csv", sweep_csv(&result).as_bytes())?;
            let sm = SweepManifest::new(&result, setup.device.units, run.hash.clone());
            run.out.write("sweep.json", &json(&sm))?;
            let failed = sm.failures.len();
            if failed > 0 {
                run.warn(format!("{failed} of {} cells failed (marked ERR)", result.cells.len()));
            }
            let opt = result.optimum;
            run.finish(&result.stats)?;
            match opt {
                Some(o) => println!("F={:.3}, t_ramp={} ns, t_hold={} ns", o.fidelity, round_ns(o.t_ramp), round_ns(o.t_hold)),
                None => return Err(Error::NonFinite("every sweep cell failed".into()).into()),
            }
        }
        Command::Sensitivity { center } => {
            let base = run.cfg.sweep_spec()?;
            let s = &run.cfg.sensitivity;
            let c = match center {
                Some(v) if v.len() == 2 => (v[0], v[1]),
                Some(_) => return Err(CliError::Usage("--center takes t_ramp,t_hold".into())),
                None => {
                    let [r, h] = s
                        .center_ns
                        .ok_or_else(|| CliError::Usage("no center: pass --center or set sensitivity.center_ns".into()))?;
                    (r, h)
                }
            };
            let (window, resolution) = (s.window_ns, s.resolution_ns);
            let setup = run.setup(base.voltage_fn.clone())?;
            let res = sensitivity_sweep(&setup, c, window, resolution, &base)?;
            run.out.write("sensitivity.csv", sweep_csv(&res.sweep).as_bytes())?;
            run.out.write("hold_section.csv", cross_section_csv(&res.hold_section).as_bytes())?;
            run.out.write("ramp_section.csv", cross_section_csv(&res.ramp_section).as_bytes())?;
            let sm = SweepManifest::new(&res.sweep, setup.device.units, run.hash.clone());
            run.out.write("sensitivity.json", &json(&sm))?;
            if let Some(o) = res.sweep.optimum {
                println!("F={:.3}, t_ramp={} ns, t_hold={} ns", o.fidelity, round_ns(o.t_ramp), round_ns(o.t_hold));
            }
            run.finish(&res.sweep.stats)?;
        }
        Command::VoltOpt { kind, budget } => {
            let mut spec = run.cfg.loss_spec();
            if let Some(k) = kind {
                spec.config = *k;
            }
            let budget = budget.unwrap_or(run.cfg.volt_opt.budget);
            let initial_name = run.cfg.initial_vector_name(spec.config);
            let initial = run.cfg.vector(&initial_name)?;
            let mut model = DeviceSpectrum::new(run.cfg.device()?, run.cfg.grid);
            model.indexing = run.cfg.numerics.indexing;
            let trace = optimize_voltages(&model, &initial, &spec, budget, &run.cfg.search_options())?;
            let table = VoltageTable {
                names: vec![initial_name, format!("{:?}_opt", spec.config)],
                vectors: vec![initial, trace.best],
            };
            run.out.write("voltages.csv", table.to_csv().as_bytes())?;
            run.out.write("trace.json", &json(&trace))?;
            if trace.budget_exhausted {
                run.warn(format!("evaluation budget {budget} exhausted before the simplex converged"));
            }
            println!("loss {:.6e} -> {:.6e} after {} evaluations", loss_at_start(&trace), trace.breakdown.total, trace.evaluations);
            run.finish(serde_json::json!({
                "evaluations": trace.evaluations,
                "budget": trace.budget,
                "budget_exhausted": trace.budget_exhausted,
                "failed_evaluations": trace.failed_evaluations,
            }))?;
        }
        Command::Analyze { gate, target, overlaps } => {
            if gate.is_none() && overlaps.is_empty() {
                return Err(CliError::Usage("analyze needs --gate and/or --overlaps".into()));
            }
            let mut summary = serde_json::Map::new();
            if let Some(path) = gate {
                run.manifest.add_input(path)?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let gj = GateJson::parse(&text).map_err(|msg| Error::Parse { path: path.clone(), msg })?;
                let kind = target
                    .or(gj.target)
                    .ok_or_else(|| CliError::Usage("gate JSON records no target; pass --target".into()))?;
                let u = gj.gate()?;
                let rep = elementwise_report(&u, kind)?;
                let fid = optimize_rotations(&u, &target_gate(kind));
                run.out.write("elementwise.csv", elementwise_csv(&rep).as_bytes())?;
                run.out.write("elementwise.json", &json(&rep))?;
                summary.insert("fidelity".into(), fid.fidelity.into());
                summary.insert("swap_error".into(), fid.swap_error.into());
                summary.insert("leakage_error".into(), fid.leakage_error.into());
                println!("F={:.6}, swap_error={:.3e}, leak_error={:.3e}", fid.fidelity, fid.swap_error, fid.leakage_error);
            }
            for (k, path) in overlaps.iter().enumerate() {
                run.manifest.add_input(path)?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let series = parse_overlaps_csv(&text).map_err(|msg| Error::Parse { path: path.clone(), msg })?;
                let name = path.file_name().map_or_else(|| format!("overlaps_{k}.csv"), |n| n.to_string_lossy().into_owned());
                run.out.write(&name, overlaps_csv(&series).as_bytes())?;
                summary.insert(name, serde_json::json!({ "rows": series.times.len() }));
            }
            run.out.write("analysis.json", &json(&summary))?;
            run.finish(serde_json::Value::Null)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PropagateStats {
    solver: SolverStats,
    max_norm_drift: f64,
}

fn loss_at_start(trace: &crate::voltage_opt::OptimizationTrace) -> f64 {
    trace.iterates.first().map_or(trace.breakdown.total, |i| i.loss)
}

/// Grid values are k·step; print them without the binary noise.
fn round_ns(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// `row,col,amplitude,ideal_amplitude,phase_deviation_pi`, rows and columns
/// labeled 00..11.
pub fn elementwise_csv(rep: &crate::gate::ElementwiseReport) -> String {
    let mut out = String::from("row,col,amplitude,ideal_amplitude,phase_deviation_pi\n");
    for i in 0..4 {
        for j in 0..4 {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?}\n",
                QUBIT_LABELS[i],
                QUBIT_LABELS[j],
                rep.amplitude[i][j],
                rep.ideal_amplitude[i][j],
                rep.phase_deviation[i][j] / std::f64::consts::PI
            ));
        }
    }
    out
}
