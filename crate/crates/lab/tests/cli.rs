use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dskg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dskg"))
        .args(args)
        .env_remove("DSKG_THREADS")
        .output()
        .expect("spawn dskg")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn identity_cases() {
    let o = dskg(&[
        "identity", "--case", "i", "--mass", "0.25", "--b", "0.2", "--t", "2.2", "--tol", "1e-8",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));

    let o = dskg(&["identity", "--case", "corollary_i", "--b", "0", "--t", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["report"]["numeric"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let o = dskg(&[
        "identity", "--case", "ii", "--n", "4", "--b", "0", "--t", "1", "--mass", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("odd"));

    let o = dskg(&["identity", "--case", "iv", "--b", "0", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kernel_moment_and_value() {
    let o = dskg(&["kernel", "--mass", "0.5", "--b", "0", "--t", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["moment"].as_f64().unwrap() - 1.0f64.sinh() / 0.5).abs() < 1e-9);
    let o = dskg(&["kernel", "--mass", "0", "--b", "0", "--t", "1", "--r", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let o = dskg(&["kernel", "--mass", "0", "--b", "2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ode_global_and_blowup() {
    // F = e^t solves F'' = e^{-t} F^2.
    let o = dskg(&[
        "ode",
        "--gamma",
        "pure_exp:-1",
        "--f0",
        "1",
        "--fdot0",
        "1",
        "--t-max",
        "10",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["classification"]["kind"], "alive_at");
    assert!((v["exp_rate"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let o = dskg(&[
        "ode", "--gamma", "const:1", "--f0", "9", "--fdot0", "30", "--t-max", "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("blowup") && text.contains("T_est") && text.contains("T_upper"),
        "{text}"
    );

    let o = dskg(&["ode", "--p", "2", "--beta", "-0.6", "--f0", "1", "--fdot0", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("β > 1/p - 1"), "{}", stderr(&o));
}

#[test]
fn ode_writes_trajectory() {
    let dir = scratch("ode_csv");
    let path = dir.join("traj.csv");
    let o = dskg(&[
        "ode",
        "--f0",
        "1",
        "--fdot0",
        "0",
        "--t-max",
        "0.5",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("t,F,Fdot,stepsize\n"));
}

#[test]
fn certify_exit_codes() {
    let args = [
        "certify",
        "--lemma",
        "large_data",
        "--mass",
        "0.4",
        "--gamma",
        "pure_exp:-1",
        "--delta0",
        "0.25",
    ];
    let ok = dskg(&[&args[..], &["--f-a", "15", "--fdot-a", "30"]].concat());
    assert_eq!(ok.status.code(), Some(0), "{}{}", stdout(&ok), stderr(&ok));
    let small = dskg(&[&args[..], &["--f-a", "0.015", "--fdot-a", "0.03"]].concat());
    assert_eq!(small.status.code(), Some(1));
    let o = dskg(&[
        "certify",
        "--lemma",
        "small_energy",
        "--mass",
        "0",
        "--gamma",
        "const:1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = dskg(&["certify", "--lemma", "kato_power", "--gamma", "kato:1,2", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
}

fn pde_config(dir: &Path, gamma: &str, c: f64, dx: f64, dt: f64, t_max: f64) -> PathBuf {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{"schema_version": 1, "params": {{"n": 1, "m": 0.3, "p": 2.0, "beta": 0.0}},
            "gamma": {gamma}, "data": {{"r0": 1.0, "c0": {c}, "c1": {c}}},
            "dx": {dx}, "dt": {dt}, "t_max": {t_max}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn pde_runs() {
    let dir = scratch("pde_zero");
    let cfg = pde_config(&dir, r#"{"kind": "pure_exp", "gamma": -1.0}"#, 0.0, 0.02, 0.01, 1.0);
    let out = dir.join("out");
    let o = dskg(&["pde", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("alive_at"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["classification"]["kind"], "alive_at");
    assert!(std::fs::read_to_string(out.join("records.csv"))
        .unwrap()
        .starts_with("t,F,Fdot_est,Pp,R,max_abs_u\n"));

    let dir = scratch("pde_theorem");
    let cfg = pde_config(
        &dir,
        r#"{"kind": "power_exp", "c": 1.0, "d0": -0.4, "d1": 3.0}"#,
        0.01,
        0.02,
        0.01,
        30.0,
    );
    let o = dskg(&["pde", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("blowup"), "{}", stdout(&o));

    // Flag overrides take precedence over the file.
    let o = dskg(&["pde", "--config", cfg.to_str().unwrap(), "--dt", "0.015"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CFL"), "{}", stderr(&o));
}

#[test]
fn pde_picard_backend() {
    let dir = scratch("pde_picard");
    let cfg = pde_config(&dir, r#"{"kind": "pure_exp", "gamma": -1.0}"#, 0.2, 0.05, 0.025, 1.0);
    let o = dskg(&["pde", "--config", cfg.to_str().unwrap(), "--backend", "picard"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("alive_at"));
}

const SMOKE_SPEC: &str = r#"{
    "schema_version": 1,
    "m": [0.0, 0.2, 0.4],
    "p": [2.0],
    "d0": [-0.5, 0.0, -0.5, 0.5],
    "d1": [0.0, 1.0, 3.0],
    "amplitude": [0.01],
    "t_max": 3.0,
    "dx": 0.02
}"#;

#[test]
fn scan_smoke_is_deterministic() {
    let dir = scratch("scan_smoke");
    let spec = dir.join("spec.json");
    std::fs::write(&spec, SMOKE_SPEC).unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.join(name);
        let o = dskg(&[
            "scan",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("duplicate grid point"));
        (out, stdout(&o))
    };
    let (a, text) = run("a", "1");
    let (b, _) = run("b", "2");
    assert!(text.starts_with("27 points"), "{text}");
    let table = std::fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(table, std::fs::read_to_string(b.join("records.csv")).unwrap());
    assert_eq!(table.lines().count(), 28);
    for line in table.lines().skip(1) {
        assert!(
            ["blowup", "alive_at", "inconclusive"].iter().any(|l| line.contains(l)),
            "{line}"
        );
    }
    assert_eq!(
        std::fs::read_to_string(a.join("phase_grid.csv")).unwrap(),
        std::fs::read_to_string(b.join("phase_grid.csv")).unwrap()
    );

    // plotdata regenerates the same files from the JSON records.
    let c = dir.join("c");
    let o = dskg(&[
        "plotdata",
        "--input",
        a.join("records.json").to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(c.join("records.csv")).unwrap(), table);
}

#[test]
fn scan_rejects_bad_input() {
    let dir = scratch("scan_bad");
    let spec = dir.join("spec.json");
    std::fs::write(
        &spec,
        SMOKE_SPEC.replace("\"schema_version\": 1", "\"schema_version\": 9"),
    )
    .unwrap();
    let o = dskg(&["scan", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&spec, SMOKE_SPEC).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dskg"))
        .args(["scan", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .env("DSKG_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = dskg(&["scan", "--spec", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
