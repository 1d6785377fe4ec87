use std::path::Path;
use std::process::Command;

fn calderon(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_calderon")).args(args).env("RAYON_NUM_THREADS", threads).output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = calderon(&["demo", "--noise", "1e-9", "--seed", "7", "--out", out.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["spectrum.csv", "born.csv", "potential.csv", "field/field.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
}

#[test]
fn demo_manifest_records_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = calderon(&["demo", "--out", dir.path().to_str().unwrap()], "2");
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    assert_eq!(m["status"], "ok");
    assert!(m["metrics"]["reconstruction_sup_error"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(calderon(&["forward", "--potential", "bargmann:mu=1", "--out", out], "1").status.code(), Some(2));
    assert_eq!(calderon(&["nonsense"], "1").status.code(), Some(2));
    let o = calderon(&["forward", "--potential", "zero", "--d", "2", "--K", "3", "--out", out], "1");
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(4).unwrap().starts_with("2,3,3.0000000000000000e0"));
}

#[test]
fn reconstruct_from_saved_born_profile() {
    let dir = tempfile::tempdir().unwrap();
    let born_dir = dir.path().join("born");
    let o = calderon(&["born", "--potential", "bargmann:mu=1,nu=2", "--K", "40", "--out", born_dir.to_str().unwrap()], "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = dir.path().join("rec");
    let born_csv = born_dir.join("born.csv");
    let o = calderon(
        &["reconstruct", "--born", born_csv.to_str().unwrap(), "--potential", "bargmann:mu=1,nu=2", "--out", rec.to_str().unwrap()],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&read(&rec, "run.json")).unwrap();
    assert!(m["metrics"]["reconstruction_sup_error"].as_f64().unwrap() <= 1e-2);
}
