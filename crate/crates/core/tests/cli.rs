use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heligate::electrostatics::{VoltageTable, TABLE_I_IDLE};
use heligate::manifest::RunManifest;
use heligate::propagation::parse_overlaps_csv;

const SMALL: &str = r#"schema_version = 1
[grid]
points_left = 12
points_right = 12
harmonic_lengths = 5.0
[search]
ramp_ns = [0.4, 0.6]
hold_ns = { start = 0.0, stop = 0.2, step = 0.1 }
[propagate]
t_ramp_ns = 0.3
t_hold_ns = 0.1
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_heligate"));
    c.env_remove("HELIGATE_OUT");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    (tmp, cfg)
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "status {:?}\nstdout: {}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn spectrum_single_lambda_and_kappa_zero() {
    let (tmp, _) = workspace(SMALL);
    ok(&run(tmp.path(), &["spectrum", "--config", "run.toml", "--out", "a", "--lambda", "0"]));
    let rows = csv_rows(&tmp.path().join("a/spectrum.csv"));
    assert_eq!(rows[0].join(","), "lambda,E0,E1,E2,E3,E4,E5,zeta");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].len(), 8);
    let zeta: f64 = rows[1][7].parse().unwrap();
    assert!(zeta.abs() > 1e-3);

    ok(&run(tmp.path(), &["spectrum", "--config", "run.toml", "--out", "b", "--lambda", "0,0.5,1", "--kappa-zero"]));
    let rows = csv_rows(&tmp.path().join("b/spectrum.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let z: f64 = r[7].parse().unwrap();
        assert!(z.abs() < 1e-6, "zeta {z}");
    }
}

#[test]
fn spectrum_sweep_is_continuous() {
    let (tmp, _) = workspace(&format!("{SMALL}[spectrum]\nlambdas = {{ start = 0.0, stop = 1.0, step = 0.01 }}\n"));
    ok(&run(tmp.path(), &["spectrum", "--config", "run.toml", "--out", "s"]));
    let rows = csv_rows(&tmp.path().join("s/spectrum.csv"));
    assert_eq!(rows.len(), 102);
    let e: Vec<Vec<f64>> = rows[1..].iter().map(|r| r[1..7].iter().map(|x| x.parse().unwrap()).collect()).collect();
    for w in e.windows(2) {
        for k in 0..6 {
            assert!((w[1][k] - w[0][k]).abs() < 0.2, "jump in E{k}: {} -> {}", w[0][k], w[1][k]);
        }
    }
}

#[test]
fn gate_search_is_byte_reproducible_and_echoes_optimum() {
    let (tmp, _) = workspace(SMALL);
    let out1 = ok(&run(tmp.path(), &["gate-search", "--config", "run.toml", "--out", "g1", "--dt", "0.004"]));
    let out2 = ok(&run(tmp.path(), &["gate-search", "--config", "run.toml", "--out", "g2", "--dt", "0.004", "--workers", "2"]));
    assert_eq!(out1, out2);
    let line = out1.trim();
    assert!(line.starts_with("F=") && line.contains(", t_ramp=") && line.ends_with(" ns"), "{line}");
    let a = std::fs::read(tmp.path().join("g1/sweep.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("g2/sweep.csv")).unwrap();
    assert_eq!(a, b);
    let rows = csv_rows(&tmp.path().join("g1/sweep.csv"));
    assert_eq!(rows[0].join(","), "t_ramp_ns,t_hold_ns,fidelity,swap_error,leak_error,theta_L,theta_R");
    assert_eq!(rows.len(), 1 + 2 * 3);

    let m1 = RunManifest::read(&tmp.path().join("g1")).unwrap();
    let m2 = RunManifest::read(&tmp.path().join("g2")).unwrap();
    assert_eq!(m1.config_hash, m2.config_hash);
    let names: Vec<_> = m1.outputs.iter().map(|o| o.path.to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["sweep.csv", "sweep.json"]);
    assert!(m1.verify(&tmp.path().join("g1")).unwrap().is_empty());
    assert_eq!(m1.inputs.len(), 1);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let (tmp, _) = workspace(SMALL);
    let cases: [(&str, &[&str]); 4] = [
        ("schema_version = 1\n[search]\nhold_ns = []\n", &["gate-search"]),
        ("schema_version = 1\nunknown = 3\n", &["spectrum"]),
        ("schema_version = 7\n", &["spectrum"]),
        ("schema_version = 1\n", &["sensitivity"]),
    ];
    for (text, args) in cases {
        std::fs::write(tmp.path().join("bad.toml"), text).unwrap();
        let mut a = args.to_vec();
        a.extend(["--config", "bad.toml", "--out", "x"]);
        let o = run(tmp.path(), &a);
        assert_eq!(o.status.code(), Some(1), "{text}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["spectrum", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn output_dir_falls_back_to_env() {
    let (tmp, _) = workspace(SMALL);
    let o = bin()
        .current_dir(tmp.path())
        .env("HELIGATE_OUT", tmp.path().join("from-env"))
        .args(["spectrum", "--config", "run.toml"])
        .output()
        .unwrap();
    ok(&o);
    assert!(tmp.path().join("from-env/spectrum.csv").exists());
    assert!(tmp.path().join("from-env/manifest.json").exists());
}

#[test]
fn propagate_then_analyze() {
    let (tmp, _) = workspace(SMALL);
    ok(&run(tmp.path(), &["propagate", "--config", "run.toml", "--out", "p", "--dt", "0.004"]));
    for label in ["00", "01", "10", "11"] {
        let text = std::fs::read_to_string(tmp.path().join(format!("p/overlaps_{label}.csv"))).unwrap();
        let s = parse_overlaps_csv(&text).unwrap();
        assert_eq!(s.times[0], 0.0);
        // at t = 0 the row is an indicator of the state's own eigen-index
        let row = &s.rows[0];
        let hot: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.5).collect();
        assert_eq!(hot.len(), 1);
        assert!((row[hot[0]] - 1.0).abs() < 1e-9);
    }
    let out = ok(&run(tmp.path(), &["analyze", "--gate", "p/gate.json", "--overlaps", "p/overlaps_00.csv", "--out", "a"]));
    assert!(out.starts_with("F="));
    assert!(tmp.path().join("a/elementwise.csv").exists());
    assert!(tmp.path().join("a/overlaps_00.csv").exists());
    // no --config: the gate file and one overlap file
    let m = RunManifest::read(&tmp.path().join("a")).unwrap();
    assert_eq!(m.inputs.len(), 2);
}

#[test]
fn analyze_ideal_gates() {
    let (tmp, _) = workspace(SMALL);
    let cz = heligate::gate::GateJson::from_gate(&heligate::gate::target_gate(heligate::gate::GateKind::Cz));
    std::fs::write(tmp.path().join("cz.json"), cz.to_json()).unwrap();
    ok(&run(tmp.path(), &["analyze", "--gate", "cz.json", "--target", "cz", "--out", "c"]));
    for r in &csv_rows(&tmp.path().join("c/elementwise.csv"))[1..] {
        let dev: f64 = r[4].parse().unwrap();
        assert_eq!(dev, 0.0, "{r:?}");
        assert_eq!(r[2], r[3]);
    }
    let sq = heligate::gate::GateJson::from_gate(&heligate::gate::target_gate(heligate::gate::GateKind::SqrtIswap));
    std::fs::write(tmp.path().join("sq.json"), sq.to_json()).unwrap();
    ok(&run(tmp.path(), &["analyze", "--gate", "sq.json", "--target", "sqrt_iswap", "--out", "s"]));
    let rows = csv_rows(&tmp.path().join("s/elementwise.csv"));
    let centre = rows.iter().find(|r| r[0] == "01" && r[1] == "10").unwrap();
    let ideal: f64 = centre[3].parse().unwrap();
    assert!((ideal - 0.5).abs() < 1e-15);

    std::fs::write(tmp.path().join("broken.json"), "{\n  \"basis\": [\"00\",\n").unwrap();
    let o = run(tmp.path(), &["analyze", "--gate", "broken.json", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line "));
    let o = run(tmp.path(), &["analyze", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn volt_opt_zero_budget_keeps_the_initial_vector() {
    let (tmp, _) = workspace(SMALL);
    ok(&run(tmp.path(), &["volt-opt", "--config", "run.toml", "--kind", "I", "--budget", "0", "--out", "v"]));
    let text = std::fs::read_to_string(tmp.path().join("v/voltages.csv")).unwrap();
    assert!(text.starts_with("electrode,I,I_opt\n"));
    let t = VoltageTable::parse_csv(&text).unwrap();
    assert_eq!(t.vectors[0], TABLE_I_IDLE);
    assert_eq!(t.vectors[1], TABLE_I_IDLE);
    let m = RunManifest::read(&tmp.path().join("v")).unwrap();
    assert_eq!(m.solver["budget_exhausted"], true);
}

#[test]
fn volt_opt_trace_is_nonincreasing_and_flags_budget() {
    let (tmp, _) = workspace(SMALL);
    let o = run(tmp.path(), &["volt-opt", "--config", "run.toml", "--kind", "II", "--budget", "12", "--out", "v"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
    let trace: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("v/trace.json")).unwrap()).unwrap();
    let losses: Vec<f64> = trace["iterates"].as_array().unwrap().iter().map(|i| i["loss"].as_f64().unwrap()).collect();
    assert!(!losses.is_empty());
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    let m = RunManifest::read(&tmp.path().join("v")).unwrap();
    assert_eq!(m.warnings.len(), 1);
    assert_eq!(m.solver["budget_exhausted"], true);
}

#[test]
fn sensitivity_cross_sections_match_the_map() {
    let (tmp, _) = workspace(&format!("{SMALL}[sensitivity]\ncenter_ns = [0.5, 0.1]\nwindow_ns = 0.02\nresolution_ns = 0.01\n"));
    ok(&run(tmp.path(), &["sensitivity", "--config", "run.toml", "--out", "s", "--dt", "0.005"]));
    let map = csv_rows(&tmp.path().join("s/sensitivity.csv"));
    let hold = csv_rows(&tmp.path().join("s/hold_section.csv"));
    let ramp = csv_rows(&tmp.path().join("s/ramp_section.csv"));
    assert_eq!(map.len(), 1 + 25);
    for r in &hold[1..] {
        assert!(map.contains(r));
        assert_eq!(r[0], "0.5");
    }
    for r in &ramp[1..] {
        assert!(map.contains(r));
        assert_eq!(r[1], "0.1");
    }
    // zero window: one cell
    ok(&run(tmp.path(), &["sensitivity", "--config", "run.toml", "--out", "z", "--dt", "0.005", "--center", "0.5,0.1"]));
    std::fs::write(
        tmp.path().join("zero.toml"),
        format!("{SMALL}[sensitivity]\ncenter_ns = [0.5, 0.1]\nwindow_ns = 0.0\n"),
    )
    .unwrap();
    ok(&run(tmp.path(), &["sensitivity", "--config", "zero.toml", "--out", "z0", "--dt", "0.005"]));
    assert_eq!(csv_rows(&tmp.path().join("z0/sensitivity.csv")).len(), 2);
}

#[test]
fn numerical_failure_exits_two() {
    // a deep left plunger pulls a non-computational state into the qubit
    // manifold, so labeling the idle spectrum fails
    let (tmp, _) = workspace(&format!(
        "{SMALL}[voltages.vectors]\nX = [389.5, 600.0, 400.36, -290.61, 398.59, 200.15, 381.4]\n[voltages.function]\nstart = \"X\"\n"
    ));
    let o = run(tmp.path(), &["propagate", "--config", "run.toml", "--out", "f", "--t-ramp", "0.1", "--t-hold", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("labeling"));
}
