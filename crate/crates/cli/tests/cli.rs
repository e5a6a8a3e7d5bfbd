use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fermibrick"));
    c.env_remove("FERMIBRICK_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

#[test]
fn theta_critical_prints_value() {
    let o = run(&["theta-critical", "--alpha", "1", "--gamma", "1"]);
    assert_eq!(code(&o), 0);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.700109).abs() < 1e-5, "{v}");
}

#[test]
fn theta_critical_without_mass_difference_is_a_validation_error() {
    let o = run(&["theta-critical", "--alpha", "1", "--gamma", "0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn dispersion_u_writes_monotone_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = run(&[
        "dispersion-u", "--alpha", "1", "--gamma", "1", "--theta", "0.3", "--points", "400", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(header, ["k", "eps1", "eps2", "eps3", "eps4"]);
    assert_eq!(rows.len(), 400);
    let ks: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[1] > w[0]));
    // 17 significant digits
    assert!(rows[0][1].split('e').next().unwrap().trim_start_matches('-').len() == 18);
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["dispersion-u", "--alpha", "1", "--bogus", "3"]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_subcommand_and_missing_command_are_usage_errors() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn invalid_parameters_exit_one() {
    assert_eq!(code(&run(&["gate-check", "--alpha", "-1", "--gamma", "0", "--theta", "0.2"])), 1);
    assert_eq!(code(&run(&["gate-check", "--alpha", "1", "--gamma", "0"])), 1);
    assert_eq!(code(&run(&["quench", "--alpha", "1", "--gamma", "0", "--theta", "0.2", "--L", "7", "--layers", "2"])), 1);
}

#[test]
fn gate_check_passes() {
    let o = run(&["gate-check", "--alpha", "0.7", "--gamma", "-0.8", "--theta", "1.3"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r[3] == "pass"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = [
        "phase-diagram", "--alpha", "1", "--gamma", "0", "--delta-n", "7", "--eps-n", "9", "--zone-grid", "256",
    ];
    let a = bin().args(args).args(["--threads", "1"]).output().unwrap();
    let b = bin().args(args).env("FERMIBRICK_THREADS", "4").output().unwrap();
    let c = bin().args(args).output().unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn phase_diagram_is_nan_free_and_quantized() {
    let o = run(&["phase-diagram", "--alpha", "1", "--gamma", "0", "--delta-n", "5", "--eps-n", "21"]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["delta", "eps1", "eps2", "W", "min_gap"]);
    for r in &rows {
        assert!(!r.iter().any(|c| c.contains("NaN")));
        assert!(["", "-1", "0", "1"].contains(&r[3].as_str()), "{r:?}");
        if r[3].is_empty() {
            assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
        }
    }
    // δ = 0, ε = −0.5 lies in the Kitaev-like phase; ε = +0.5 is trivial
    let w_at = |e: f64| {
        rows.iter()
            .find(|r| r[0].parse::<f64>().unwrap() == 0.0 && (r[1].parse::<f64>().unwrap() - e).abs() < 1e-12)
            .map(|r| r[3].clone())
            .unwrap()
    };
    assert_eq!(w_at(-0.5).trim_start_matches('-'), "1");
    assert_eq!(w_at(0.5), "0");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("h.csv");
    std::fs::write(
        &cfg,
        format!(
            "command = \"dispersion-h\"\n\n[params]\nalpha = 1.0\ngamma = 2.0\n\n[grid]\npoints = 50\n\n[output]\npath = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(header, ["k", "eps1", "eps2"]);
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[0][1].parse::<f64>().unwrap().abs() < 1e-12, true);

    let o = run(&["dispersion-h", "--config", cfg.to_str().unwrap(), "--points", "7"]);
    assert_eq!(code(&o), 0);
    assert_eq!(csv_rows(&std::fs::read_to_string(&out).unwrap()).1.len(), 7);

    std::fs::write(&cfg, "[params]\nalpah = 1.0\n").unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn quench_json_carries_metadata_and_drift() {
    let o = run(&[
        "quench", "--alpha", "1", "--gamma", "10", "--theta", "1", "--L", "160", "--layers", "40", "--seed-site", "81",
        "--format", "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["meta"]["L"], 160);
    assert_eq!(doc["meta"]["seed_site"], 81);
    assert_eq!(doc["meta"]["boundary"], "Pbc");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 41);
    assert_eq!(doc["columns"].as_array().unwrap().len(), 161);
    let v = doc["meta"]["drift"]["v_d"].as_f64().unwrap();
    assert!((v.abs() - 2.0).abs() < 0.1, "{v}");
    assert!(doc["meta"]["light_cone_violation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn quench_trace_methods_agree() {
    let common = ["quench", "--alpha", "1", "--gamma", "1", "--theta", "0.5", "--L", "14", "--layers", "12", "--kind", "trace"];
    let a = bin().args(common).output().unwrap();
    let b = bin().args(common).args(["--method", "momentum"]).output().unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    let (_, ra) = csv_rows(&stdout(&a));
    let (_, rb) = csv_rows(&stdout(&b));
    for (x, y) in ra.iter().zip(&rb) {
        for c in 1..3 {
            let (u, v): (f64, f64) = (x[c].parse().unwrap(), y[c].parse().unwrap());
            assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn gge_matches_time_average() {
    let o = run(&["gge", "--alpha", "1", "--gamma", "1", "--theta", "0.5", "--L", "102"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["L", "layers", "window_start", "gge_even", "gge_odd", "avg_even", "avg_odd"]);
    let f = |i: usize| rows[0][i].parse::<f64>().unwrap();
    assert!((f(3) - f(5)).abs() < 1e-2 && (f(4) - f(6)).abs() < 1e-2);
    assert!((f(3) - f(4)).abs() > 1e-2);
}

#[test]
fn verify_full_passes() {
    let o = run(&["verify", "--level", "full", "--L", "8"]);
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.len() >= 12);
    assert!(rows.iter().all(|r| r[3] == "pass"));
    let again = run(&["verify", "--level", "full", "--L", "8"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn verify_rejects_oversized_dense_runs() {
    assert_eq!(code(&run(&["verify", "--L", "30"])), 1);
}

/// Each shipped figure config runs, on a reduced grid.
#[test]
fn example_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(examples_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let command = text
            .lines()
            .find_map(|l| l.strip_prefix("command = "))
            .map(|c| c.trim_matches('"').to_string())
            .expect("config names its command");
        let reduce: &[&str] = match command.as_str() {
            "dispersion-h" | "dispersion-u" => &["--points", "5"],
            "phase-diagram" => &["--delta-n", "3", "--eps-n", "3", "--zone-grid", "256"],
            "quench" => &["--layers", "3"],
            "gge" => &["--layers", "0"],
            other => panic!("unexpected command {other}"),
        };
        let out = dir.path().join(path.file_stem().unwrap()).with_extension("csv");
        let o = bin()
            .arg(&command)
            .arg("--config")
            .arg(&path)
            .args(reduce)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        assert!(out.exists());
        seen += 1;
    }
    assert!(seen >= 20);
}
