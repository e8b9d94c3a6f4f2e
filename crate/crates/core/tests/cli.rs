use std::path::Path;
use std::process::{Command, Output};

use mcsimclr::eval::{save_report, EvalReport};

fn mcsimclr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsimclr")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(name: &str, acc: f64, err: f64, hours: f64, init: &str) -> EvalReport {
    EvalReport {
        name: name.into(),
        protocol: "linear-probe".into(),
        encoder_init: init.into(),
        accuracy_percent: acc,
        azimuth_error_deg: err,
        error_statistic: "mean".into(),
        labeled_hours: hours,
        n_test: 200,
        seed: 1,
    }
}

#[test]
fn simulate_twice_gives_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = mcsimclr(&["simulate", "--split", "train", "--n", "10", "--seed", "7", "--set", "dataset.clip_seconds=1.0", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a/train.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b/train.jsonl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn report_renders_accuracy_and_error_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    save_report(&report("Random", 23.61, 83.14, 0.33, "random"), &p1).unwrap();
    save_report(&report("Pretrained", 51.5, 10.06, 0.33, "pretrained"), &p2).unwrap();
    let out = dir.path().join("tables");
    let o = mcsimclr(&["report", p1.to_str().unwrap(), p2.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.lines().next().unwrap().contains("Accuracy%") && md.contains("Error°"));
    assert!(md.contains("| Random | linear-probe | 23.6 | 83.1 |"), "{md}");
    assert!(md.contains("| Pretrained | linear-probe | 51.5 | 10.1 |"), "{md}");
    assert_eq!(std::fs::read_to_string(out.join("table.md")).unwrap(), md);
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(Path::new(&out.join("curve.csv")).exists());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = mcsimclr(&["simulate", "-c", missing.to_str().unwrap(), "--out", "x", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(missing.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    // stochastic commands need --seed
    assert_eq!(mcsimclr(&["simulate", "--out", "x"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["pretrain", "--data", "d.jsonl", "--out", "x"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["simulate", "--out", "x", "--seed", "1", "--bogus"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["simulate", "--out", "x", "--seed", "1", "--set", "pretrain.nope=1"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["probe", "--train", "a", "--test", "b", "--out", "c", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mcsimclr(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    std::fs::write(&m, "{not json}\n").unwrap();
    let o = mcsimclr(&["pretrain", "--data", m.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = mcsimclr(&["report", dir.path().join("none.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
