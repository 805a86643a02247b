//! The command-line binary, end to end.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_gossip-bandits");

fn run(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn smoke_preset_is_fast_and_writes_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = run(&["run", "--preset", "smoke", "--plot", "--dump-topology"], tmp.path());
    let elapsed = started.elapsed();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elapsed.as_secs_f64() < 1.0, "smoke took {elapsed:?}");
    for f in [
        "summary.csv",
        "rounds.csv",
        "decay.csv",
        "manifest.toml",
        "fig2.svg",
        "decay.svg",
        "topology.txt",
        "weights.txt",
    ] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("label,seed,"));
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn manifest_reproduces_summary_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(run(&["run", "--preset", "smoke", "--seed", "42", "--replicas", "3"], &a).status.success());
    assert!(run(&["run", "--preset", "smoke", "--seed", "42", "--replicas", "3"], &b).status.success());
    let manifest = a.join("manifest.toml");
    let out = run(&["run", "--config", manifest.to_str().unwrap()], &c);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let read = |d: &Path| fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
    assert!(a.join("cells").is_dir());
    assert_eq!(String::from_utf8(read(&a)).unwrap().lines().count(), 4);
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&["run", "--preset", "smoke", "--seed", "1"], &a);
    run(&["run", "--preset", "smoke", "--seed", "2"], &b);
    assert_ne!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["run", "--preset", "no-such-preset"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\n[sim]\nmeans = [0.5, 0.5]\nhorizon = 100\nseed = 1\nbogus = 3\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn strict_mode_reports_failed_audits() {
    // The smoke run is too short to meet the balance tolerance.
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["run", "--preset", "smoke", "--strict"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn presets_are_listed_and_printable() {
    let out = Command::new(BIN).arg("presets").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["table1", "fig2", "tau-sweep", "nash-audit", "truthful-baseline", "stress-B", "smoke"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
    let out = Command::new(BIN).args(["presets", "--show", "table1"]).output().unwrap();
    let toml = String::from_utf8(out.stdout).unwrap();
    assert!(toml.contains("name = \"table1\""));
    assert!(toml.contains("delta = 2778"));
}
