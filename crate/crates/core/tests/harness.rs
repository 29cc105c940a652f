use std::path::Path;
use std::process::Command;

use plume_inversion::harness::commands::{cmd_simulate, main_effects_configs};
use plume_inversion::harness::config::ModelChoice;
use plume_inversion::harness::ScenarioConfig;
use plume_inversion::plume::DraxlerParams;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plume-inv"))
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, format!("[sampler]\nn_iter = 60\nburn_in = 30\n{extra}")).unwrap();
    p
}

#[test]
fn level_tables() {
    let c = ScenarioConfig::default();
    assert_eq!(c.levels.ser, [0.000195, 0.00039, 0.00078]);
    assert_eq!(
        c.levels.dpv[0],
        DraxlerParams { a_h: 1.4, b_h: 0.9, a_v: 1.2, b_v: 0.95 }
    );
    assert_eq!(c.levels.wdc, [60.0, 140.0, 360.0]);
}

#[test]
fn sweep_has_thirteen_distinct_configs() {
    let runs = main_effects_configs(&ScenarioConfig::default());
    assert_eq!(runs.len(), 13);
    let mut texts: Vec<String> = runs.iter().map(|r| r.3.to_toml_string()).collect();
    texts.sort();
    texts.dedup();
    assert_eq!(texts.len(), 13);
}

#[test]
fn comparison_set_has_fourteen_models() {
    let m = ModelChoice::comparison_set();
    assert_eq!(m.len(), 14);
    let names: Vec<String> = m.iter().map(|c| c.to_string()).collect();
    assert!(names.contains(&"est-draxler".to_string()) && names.contains(&"est-smith:B".to_string()));
    for n in &names {
        assert_eq!(&n.parse::<ModelChoice>().unwrap(), &m[names.iter().position(|x| x == n).unwrap()]);
    }
}

#[test]
fn simulate_writes_level_m_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::default();
    cmd_simulate(&cfg, &dir.path().join("a")).unwrap();
    cmd_simulate(&cfg, &dir.path().join("b")).unwrap();
    let obs = std::fs::read_to_string(dir.path().join("a/observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 3601);
    assert_eq!(obs.lines().next().unwrap(), "obs_id,sensor_id,t,ppm");
    for f in ["observations.csv", "wind.csv", "sensors.json", "truth.json", "manifest.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let s = bin().args(["simulate", "--scale", "huge", "--out"]).arg(&out).status().unwrap();
    assert_eq!(s.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[sampler]\nn_iters = 5\n").unwrap();
    let s = bin().args(["simulate", "--config"]).arg(&bad).arg("--out").arg(&out).status().unwrap();
    assert_eq!(s.code(), Some(1));
    let s = bin().args(["invert", "--bogus-flag"]).status().unwrap();
    assert_eq!(s.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = bin()
        .args(["invert", "--data"])
        .arg(dir.path().join("missing"))
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(2));
}

#[test]
fn cli_resume_continues_the_same_chain() {
    let dir = tempfile::tempdir().unwrap();
    let short = small_config(dir.path(), "");
    let long = dir.path().join("long.toml");
    std::fs::write(&long, "[sampler]\nn_iter = 120\nburn_in = 30\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bin().arg("invert").arg("--config").arg(&short).arg("--out").arg(&a).status().unwrap().success());
    assert!(bin().arg("invert").arg("--config").arg(&long).arg("--out").arg(&a).arg("--resume").status().unwrap().success());
    assert!(bin().arg("invert").arg("--config").arg(&long).arg("--out").arg(&b).status().unwrap().success());
    let ta = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(ta.lines().count(), 121);
    assert_eq!(ta, std::fs::read_to_string(b.join("trace.csv")).unwrap());
}

#[test]
fn fixed_class_run_reports_three_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    std::fs::write(&cfg, format!("model = \"briggs:D\"\n{}", std::fs::read_to_string(&cfg).unwrap())).unwrap();
    let out = dir.path().join("o");
    assert!(bin().arg("invert").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,rate,x,y,sigma2,beta_s01"));
    let fit = std::fs::read_to_string(out.join("fit.csv")).unwrap();
    assert!(fit.starts_with("model,bic,rmse"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|e| e["file"].as_str().unwrap()).collect();
    for f in ["trace.csv", "summary.csv", "fit.csv", "boxwhisker.csv", "coverage.csv", "data/observations.csv"] {
        assert!(files.contains(&f), "{f} missing from manifest");
    }
}
