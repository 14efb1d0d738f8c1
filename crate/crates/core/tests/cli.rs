use std::path::Path;
use std::process::{Command, Output};

use lorentz_lab::gallery::ImmersionSpec;
use lorentz_lab::mesh::build_mesh;
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const SMALL: [&str; 10] = [
    "run",
    "--case",
    "counterexample",
    "--n",
    "1",
    "--level",
    "4",
    "--mc-samples",
    "20000",
    "--samples",
];

#[test]
fn reports_are_byte_identical_across_runs() {
    let args: Vec<&str> = SMALL.iter().copied().chain(["3"]).collect();
    let first = lab(&args);
    let second = lab(&args);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["config"]["case"], "counterexample");
    assert_eq!(v["directions"].as_array().unwrap().len(), 4);
    assert!(v.get("timings").is_none());
}

#[test]
fn unknown_case_is_a_usage_error() {
    assert_eq!(code(&lab(&["run", "--case", "torus"])), 2);
    assert_eq!(code(&lab(&["run", "--level", "99"])), 2);
    assert_eq!(
        code(&lab(&["run", "--case", "counterexample", "--m", "6"])),
        2
    );
    assert_eq!(
        code(&lab(&[
            "suite",
            "--levels",
            "3",
            "--cases",
            "custom-spec-file"
        ])),
        2
    );
    assert_eq!(code(&lab(&["bogus"])), 2);
    assert_eq!(code(&lab(&["--help"])), 0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"case": "counterexample", "n": 1, "level": 3, "seed": 5, "samples": 2, "mc_samples": 1000}"#,
    )
    .unwrap();
    let out = lab(&["run", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    let v = json(&out);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["level"], 3);
    assert_eq!(v["config"]["samples"], 2);

    std::fs::write(&cfg, r#"{"levle": 3}"#).unwrap();
    assert_eq!(code(&lab(&["run", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn csv_output_has_one_row_per_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.csv");
    let args: Vec<&str> = SMALL
        .iter()
        .copied()
        .chain(["2", "--format", "csv", "--out", path.to_str().unwrap()])
        .collect();
    let out = lab(&args);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "case");
    assert_eq!(header.len(), 17);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // Reilly, eight bounds for each of three directions, the infimum.
    assert_eq!(rows.len(), 1 + 8 * 3 + 1);
    assert!(rows.iter().all(|r| &r[0] == "counterexample"));
}

#[test]
fn external_mesh_and_immersion_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("imm.json");
    std::fs::write(
        &spec_path,
        r#"{"item": "round-sphere", "n": 2, "radius": 1.5}"#,
    )
    .unwrap();
    let spec = ImmersionSpec::from_file(&spec_path).unwrap();
    let mesh_path = dir.path().join("sphere.mesh");
    build_mesh(spec.build().unwrap().domain(), 3)
        .unwrap()
        .write_ascii(&mesh_path)
        .unwrap();

    let out = lab(&[
        "run",
        "--case",
        "custom-spec-file",
        "--spec",
        spec_path.to_str().unwrap(),
        "--mesh",
        mesh_path.to_str().unwrap(),
        "--samples",
        "2",
        "--mc-samples",
        "5000",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let lambda1 = v["spectrum"]["lambda1"].as_f64().unwrap();
    assert!(
        (lambda1 - 2.0 / 2.25).abs() < 0.05 * 2.0 / 2.25,
        "{lambda1}"
    );

    assert_eq!(code(&lab(&["run", "--mesh", "/nonexistent/mesh.txt"])), 2);
    let garbage = dir.path().join("garbage.mesh");
    std::fs::write(&garbage, "not a mesh\n").unwrap();
    assert_ne!(code(&lab(&["run", "--mesh", garbage.to_str().unwrap()])), 0);
}

#[test]
fn suite_and_section_average_commands() {
    let out = lab(&[
        "suite",
        "--levels",
        "3,4",
        "--cases",
        "counterexample",
        "--n",
        "1",
        "--samples",
        "1",
        "--mc-samples",
        "1000",
    ]);
    let v = json(&out);
    assert_eq!(v["convergence"].as_array().unwrap().len(), 2);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("counterexample"));

    let out = lab(&[
        "section-avg",
        "--m",
        "3",
        "--samples",
        "20000",
        "--forms",
        "1",
        "--boosts",
        "1",
    ]);
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(code(&lab(&["section-avg", "--m", "2"])), 2);
}

#[test]
fn output_file_is_written_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let args: Vec<&str> = SMALL
        .iter()
        .copied()
        .chain(["1", "--out", path.to_str().unwrap()])
        .collect();
    assert_eq!(code(&lab(&args)), 0);
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    assert!(text.ends_with("}\n"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["out"], path.to_str().unwrap());
}
