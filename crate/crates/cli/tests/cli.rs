use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ickan::fem::{generate_dataset, plate_with_hole, NoiseOptions, SolverOptions, Specimen};
use ickan::hyperelasticity::MaterialModel;

fn ickan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ickan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ickan(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_dataset(dir: &Path) {
    ok(dir, &["mesh", "--n-ang", "4", "--n-rad", "4", "--out", "plate.txt"]);
    ok(dir, &["generate", "--model", "NH", "--mesh", "plate.txt", "--out", "ds.txt"]);
}

#[test]
fn noiseless_generation_equals_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--model", "NH", "--noise", "0", "--steps", "3", "--out", "ds.txt"]);
    let spec = Specimen::biaxial(plate_with_hole(10, 18, 0.2).unwrap()).unwrap();
    let ds = generate_dataset(
        &spec,
        &MaterialModel::NeoHookean,
        &[0.1, 0.2, 0.30000000000000004],
        &NoiseOptions::none(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("ds.txt")).unwrap(), ds.to_text());
}

#[test]
fn arruda_boyce_uses_finer_load_steps() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["mesh", "--n-ang", "4", "--n-rad", "4", "--out", "plate.txt"]);
    let out = ok(dir.path(), &["generate", "--model", "AB", "--steps", "2", "--mesh", "plate.txt", "--out", "ds.txt"]);
    assert!(out.contains("delta 0.050") && out.contains("delta 0.100"), "{out}");
}

#[test]
fn training_is_reproducible_and_config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d);
    fs::write(d.join("cfg.txt"), "# short run\nepochs=30\nensemble = 2\n").unwrap();
    for out in ["a", "b"] {
        ok(d, &["train", "--dataset", "ds.txt", "--epochs", "5", "--config", "cfg.txt", "--out", out]);
    }
    for f in ["checkpoint.txt", "final_losses.csv", "log_seed0.csv", "log_seed1.csv"] {
        let a = fs::read(d.join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(d.join("b").join(f)).unwrap(), "{f} differs");
    }
    let log = fs::read_to_string(d.join("a/log_seed0.csv")).unwrap();
    assert_eq!(log.lines().count(), 31);
    assert!(log.starts_with("epoch,lr,loss\n0,0.001,"));
    let table = fs::read_to_string(d.join("a/final_losses.csv")).unwrap();
    assert_eq!(table.matches(",true,").count(), 1);
}

#[test]
fn evaluate_distill_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d);
    ok(d, &["train", "--dataset", "ds.txt", "--epochs", "40", "--ensemble", "1", "--out", "run"]);
    let out = ok(d, &["distill", "--checkpoint", "run/checkpoint.txt", "--out", "expr.txt"]);
    assert!(out.contains("parity R2"));
    ok(d, &["evaluate", "--checkpoint", "run/checkpoint.txt", "--symbolic", "expr.txt", "--out", "eval.csv"]);
    let csv = fs::read_to_string(d.join("eval.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6 * 41);
    for r in rows.iter().step_by(41) {
        assert!(r.iter().all(|v| v.abs() < 1e-10), "{r:?}");
    }
    // Row 10 of the uniaxial tension block sits at gamma = 0.5.
    assert_eq!(rows[10][0], 0.5);
    assert!((rows[10][1] - 0.4966).abs() < 1e-4);

    ok(d, &["mesh", "--kind", "validation", "--n-ang", "4", "--n-rad", "3", "--out", "v.txt"]);
    let out = ok(d, &["simulate", "--checkpoint", "run/checkpoint.txt", "--mesh", "v.txt", "--steps", "5", "--out", "sim"]);
    assert!(out.contains("parity R2"));
    let par = fs::read_to_string(d.join("sim/parity.csv")).unwrap();
    assert_eq!(par.lines().count(), 1 + 4 * 4 * 3 * 2);
}

#[test]
fn simulate_with_the_reference_energy_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("nh.txt"), "ickan-expression v1\n(sum 0 0.5 0 1.5)\n").unwrap();
    ok(d, &["mesh", "--kind", "validation", "--n-ang", "4", "--n-rad", "3", "--out", "v.txt"]);
    ok(d, &["simulate", "--symbolic", "nh.txt", "--mesh", "v.txt", "--steps", "10", "--out", "sim"]);
    let par = fs::read_to_string(d.join("sim/parity.csv")).unwrap();
    for l in par.lines().skip(1) {
        let v: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-10 && (v[2] - v[3]).abs() < 1e-10, "{l}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ickan(d, &["generate", "--model", "XX", "--out", "x.txt"]).status.code(), Some(2));
    assert_eq!(ickan(d, &["train", "--dataset", "missing.txt", "--out", "r"]).status.code(), Some(2));
    assert_eq!(ickan(d, &["frobnicate"]).status.code(), Some(2));
    fs::write(d.join("bad.txt"), "ickan-dataset v1\nnoise x\n").unwrap();
    assert_eq!(ickan(d, &["train", "--dataset", "bad.txt", "--out", "r"]).status.code(), Some(2));
    fs::write(d.join("cfg.txt"), "no-such-flag=1\n").unwrap();
    assert_eq!(
        ickan(d, &["mesh", "--out", "m.txt", "--config", "cfg.txt"]).status.code(),
        Some(2)
    );

    // A random network saturates nothing, but the chain-limit model does at
    // extreme uniaxial stretch.
    small_dataset(d);
    ok(d, &["train", "--dataset", "ds.txt", "--epochs", "2", "--ensemble", "1", "--out", "run"]);
    let out = ickan(
        d,
        &["evaluate", "--checkpoint", "run/checkpoint.txt", "--model", "AB", "--gamma-max", "60", "--out", "e.csv"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
