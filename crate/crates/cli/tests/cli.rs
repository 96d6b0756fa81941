use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dotsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dotsim"))
        .current_dir(dir)
        .env_remove("DOTSIM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = dotsim(dir, args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn manifest(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn atom_rows_are_steps_times_levels() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "atom",
            "--sites",
            "25",
            "--t",
            "20",
            "--v0-min",
            "10",
            "--v0-max",
            "300",
            "--v0-steps",
            "7",
            "--levels",
            "3",
            "--out",
            "atom.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("atom.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("v0_ueV,eta,ry_ueV,level,e_ueV,eb_per_ry")
    );
    assert_eq!(lines.count(), 21);
    let m = manifest(dir.path(), "atom.manifest.json");
    assert_eq!(m["config"]["spacing_nm"], 160.0);
    assert_eq!(m["config"]["levels"], 3);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn molecule_grid_is_monotone_and_scales_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "molecule",
            "--sites",
            "10",
            "--t",
            "40",
            "--v0",
            "200",
            "--r-min",
            "1",
            "--r-max",
            "6",
            "--r-steps",
            "6",
            "--out",
            "mol.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("mol.csv")).unwrap();
    let rs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rs.len(), 6);
    assert!(rs.windows(2).all(|w| w[1] > w[0]));
    let m = manifest(dir.path(), "mol.manifest.json");
    let ry = m["header"]["scales"]["rydberg_uev"].as_f64().unwrap();
    assert!((ry - 1000.0).abs() < 1e-9);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |out: &str, seed: &str| {
        ok(
            dir.path(),
            &[
                "stability",
                "simulate",
                "--v",
                "40",
                "--t",
                "12",
                "--noise-sigma",
                "0.1",
                "--points",
                "61",
                "--seed",
                seed,
                "--out",
                out,
            ],
        )
    };
    sim("a.csv", "7");
    sim("b.csv", "7");
    sim("c.csv", "8");
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));

    ok(
        dir.path(),
        &["stability", "fit", "--input", "a.csv", "--out", "fa.json"],
    );
    ok(
        dir.path(),
        &["stability", "fit", "--input", "a.csv", "--out", "fb.json"],
    );
    assert_eq!(read("fa.json"), read("fb.json"));
    let report: Value = serde_json::from_slice(&read("fa.json")).unwrap();
    let v = report["model"]["v_ij"].as_f64().unwrap();
    assert!((v - 40.0).abs() < 4.0, "{v}");
    assert_eq!(report["covariance"].as_array().unwrap().len(), 8);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, out) in [("1", "one.csv"), ("4", "four.csv")] {
        ok(
            dir.path(),
            &[
                "occupation",
                "--sites",
                "8",
                "--t",
                "40",
                "--v0",
                "200",
                "--r-min",
                "1",
                "--r-max",
                "5",
                "--r-steps",
                "5",
                "--bias-slope",
                "10",
                "--threads",
                threads,
                "--out",
                out,
            ],
        );
    }
    let a = std::fs::read(dir.path().join("one.csv")).unwrap();
    let b = std::fs::read(dir.path().join("four.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(manifest(dir.path(), "one.manifest.json")["threads"], 1);
}

#[test]
fn invalid_values_name_the_field_and_leave_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dotsim(
        dir.path(),
        &[
            "atom",
            "--sites",
            "25",
            "--t",
            "-1",
            "--v0-min",
            "10",
            "--v0-max",
            "20",
            "--v0-steps",
            "2",
            "--out",
            "atom.csv",
        ],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("t_ueV"), "{}", stderr(&out));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"experiment":"atom","sites":25,"t_ueV":20,"v0_min_ueV":10,"v0_max_ueV":20,"v0_steps":2,"levles":3,"out":"a.csv"}"#,
    )
    .unwrap();
    let out = dotsim(dir.path(), &["run", "--config", "c.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("`levles`"), "{}", stderr(&out));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"experiment":"atom","sites":6,"v0_min_ueV":10,"v0_max_ueV":20,"v0_steps":2,"out":"a.csv"}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "atom",
            "--config",
            "c.json",
            "--v0-steps",
            "3",
            "--out",
            "b.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3);
    assert!(!dir.path().join("a.csv").exists());

    let out = dotsim(dir.path(), &["molecule", "--config", "c.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("`atom`"), "{}", stderr(&out));
}

#[test]
fn threads_fall_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: &str| {
        Command::new(env!("CARGO_BIN_EXE_dotsim"))
            .current_dir(dir.path())
            .env("DOTSIM_THREADS", env)
            .args([
                "atom",
                "--sites",
                "6",
                "--v0-min",
                "10",
                "--v0-max",
                "20",
                "--v0-steps",
                "2",
                "--out",
                "a.csv",
            ])
            .output()
            .unwrap()
    };
    assert!(run("3").status.success());
    assert_eq!(manifest(dir.path(), "a.manifest.json")["threads"], 3);
    let bad = run("many");
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("DOTSIM_THREADS"));
}

#[test]
fn failed_second_artifact_removes_the_first() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("taken")).unwrap();
    let out = dotsim(
        dir.path(),
        &[
            "molecule",
            "--sites",
            "4",
            "--t",
            "40",
            "--v0",
            "200",
            "--r-min",
            "1",
            "--r-max",
            "2",
            "--r-steps",
            "2",
            "--ee-model",
            "bare",
            "--dump-hamiltonian",
            "taken",
            "--out",
            "mol.csv",
        ],
    );
    assert!(!out.status.success());
    assert!(!dir.path().join("mol.csv").exists());
    let left: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(left, vec![std::ffi::OsString::from("taken")]);
}

#[test]
fn hamiltonian_dump_is_coordinate_text() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "molecule",
            "--sites",
            "4",
            "--t",
            "40",
            "--v0",
            "200",
            "--r-min",
            "1",
            "--r-max",
            "2",
            "--r-steps",
            "2",
            "--ee-model",
            "bare",
            "--dump-hamiltonian",
            "h.txt",
            "--out",
            "mol.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("h.txt")).unwrap();
    assert!(text.starts_with("# 16 16 "), "{}", &text[..20]);
}

#[test]
fn screen_and_params_write_their_headers() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "screen",
            "--rho-steps",
            "5",
            "--tile-nm",
            "40",
            "--out",
            "vee.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("vee.csv")).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("rho_nm,v_bare_ueV,v_image_ueV,v_tiled_ueV")
    );
    assert_eq!(text.lines().count(), 6);

    ok(
        dir.path(),
        &[
            "params",
            "--sites",
            "3",
            "--models",
            "bare,image",
            "--out",
            "p.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("site_i,site_j,distance_nm,v_ueV,model")
    );
    assert_eq!(text.lines().count(), 1 + 2 * 6);
    assert!(text.lines().last().unwrap().ends_with(",image"));
}
