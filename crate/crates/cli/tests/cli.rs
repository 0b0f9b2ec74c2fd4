use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL_GRID: &[&str] = &["--nx", "81", "--nt", "11", "--x_min", "-8", "--x_max", "8"];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_madelung-bvp"));
    c.env_remove("MADELUNG_BVP_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn param<'a>(m: &'a Value, key: &str) -> (&'a str, &'a str) {
    let e = &m["params"][key];
    (e["value"].as_str().unwrap(), e["source"].as_str().unwrap())
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[test]
fn verify_passes_and_lists_checksummed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = run(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "verify");
    assert!(m["timestamp"].is_string());
    assert!(m["seeds"]["verify"].is_u64());
    for f in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn solve_bvp_spreading_preset_writes_history_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(&["solve-bvp", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["manifest.json", "density.csv", "current.csv", "phase.csv", "report.json", "action.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("density.csv")).unwrap();
    assert!(csv.starts_with("t,x,value\n0.0,-12.0,"));
    let report: Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solve"]["converged"], true);
    assert!(report["oracle"]["max_l1"].as_f64().unwrap() < 1e-2);
    assert!(report["restart"]["relative_action_difference"].as_f64().unwrap() < 1e-3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let mut args = vec!["solve-bvp", "--out", out.to_str().unwrap()];
        args.extend_from_slice(SMALL_GRID);
        let o = run(&args);
        assert!(o.status.code().is_some_and(|c| c == 0 || c == 2), "{}", stderr(&o));
        outputs.push(out);
    }
    for f in ["density.csv", "current.csv", "phase.csv", "action.json"] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    let reports: Vec<Value> = outputs
        .iter()
        .map(|o| {
            let mut v: Value = serde_json::from_slice(&fs::read(o.join("report.json")).unwrap()).unwrap();
            strip_wall_time(&mut v);
            v
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
    let m: Vec<Value> = outputs.iter().map(|o| manifest(o)).collect();
    let sums = |m: &Value| {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["file"] != "report.json")
            .map(|f| f["sha256"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(sums(&m[0]), sums(&m[1]));
}

#[test]
fn flag_overrides_config_file_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# precedence\nhbar = 0.5\nmass = 2\n").unwrap();
    let out = dir.path().join("p");
    let mut args = vec![
        "propagate",
        "--config",
        cfg.to_str().unwrap(),
        "--hbar",
        "0.25",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL_GRID);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("overrides `hbar = 0.5`"), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(param(&m, "hbar"), ("0.25", "flag"));
    assert_eq!(param(&m, "mass"), ("2", "file"));
    assert_eq!(param(&m, "omega"), ("1", "default"));
    let order: Vec<&str> = m["resolution_order"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(order[0], "defaults");
    assert!(order[1].starts_with("file:"));
    assert_eq!(order[2], "flags");
}

#[test]
fn empty_config_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "").unwrap();
    let out = dir.path().join("e");
    let o = run(&["propagate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(param(&m, "hbar"), ("1", "default"));
    assert_eq!(param(&m, "mass"), ("1", "default"));
    assert_eq!(param(&m, "potential"), ("free", "default"));
    assert!(m["params"]
        .as_object()
        .unwrap()
        .values()
        .all(|e| e["source"] == "default"));
}

#[test]
fn negative_mass_in_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mass = -1\n").unwrap();
    let out = dir.path().join("m");
    let o = run(&["propagate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`mass`"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn single_time_slice_names_nt() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n");
    let o = run(&["propagate", "--nt", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`nt`"), "{}", stderr(&o));
}

#[test]
fn config_errors_report_line_and_valid_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "hbar = 1\n\nspeed = 3\n").unwrap();
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("c.cfg:3"), "{e}");
    assert!(e.contains("unknown key `speed`") && e.contains("sigma0"), "{e}");

    fs::write(&cfg, "hbar 1\n").unwrap();
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("c.cfg:1"));
}

#[test]
fn unknown_flag_suggests_the_nearest() {
    let o = run(&["propagate", "--hbr", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--hbar"), "{}", stderr(&o));
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let o = run(&["propagate", "--nx", "many"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`nx`"), "{}", stderr(&o));
}

#[test]
fn environment_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let mut args = vec!["propagate"];
    args.extend_from_slice(SMALL_GRID);
    let o = bin()
        .args(&args)
        .env("MADELUNG_BVP_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env_out.join("manifest.json").is_file());

    let flag_out = dir.path().join("from-flag");
    args.extend_from_slice(&["--out", flag_out.to_str().unwrap()]);
    let o = bin()
        .args(&args)
        .env("MADELUNG_BVP_OUT", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("manifest.json").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn unconverged_solve_exits_2_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u");
    let mut args = vec![
        "solve-bvp",
        "--max_outer_iterations",
        "1",
        "--check_every",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL_GRID);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
    let report: Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solve"]["converged"], false);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn gaussian_demo_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = run(&["gaussian-demo", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&fs::read(out.join("residuals.json")).unwrap()).unwrap();
    assert!(r["continuity_rms"].as_f64().unwrap() < 1e-4);
    assert!(r["guidance_rms"].as_f64().unwrap() < 1e-6);
    assert!(r["qhj_rms"].as_f64().unwrap() < 1e-3);
    let rep: Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!((rep["sigma_final"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-6);
    assert!(rep["trajectory_scaling_max_error"].as_f64().unwrap() < 1e-3);
    let traj = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("trajectory_id,t,x\n"));
}

#[test]
fn caliber_and_node_demo_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&["caliber", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d: Value = serde_json::from_slice(&fs::read(out.join("distribution.json")).unwrap()).unwrap();
    let outcomes = d["distribution"]["outcomes"].as_array().unwrap();
    assert_eq!(outcomes.len(), 3);
    let total: f64 = outcomes.iter().map(|o| o["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let out = dir.path().join("n");
    let o = run(&["node-demo", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("pattern.csv").is_file());
    let m = manifest(&out);
    assert_eq!(m["grid"]["x_min"], -20.0);
    assert_eq!(m["grid"]["x_max"], 20.0);
}
