use std::path::Path;
use std::process::{Command, Output};

fn mom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mom")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command":"BreakVariance","n_grid":[200],"runs":1,"seed":5}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = mom(&["break-variance", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.config.json").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command":"BreakMean","n_grid":[200],"runs":2}"#,
    );
    let base = mom(&["break-mean", "--config", &cfg]);
    let same = mom(&["break-mean", "--config", &cfg, "--seed", "0"]);
    let other = mom(&["break-mean", "--config", &cfg, "--seed", "9"]);
    assert!(base.status.success());
    assert_eq!(base.stdout, same.stdout);
    assert_ne!(base.stdout, other.stdout);
    let text = String::from_utf8(base.stdout).unwrap();
    assert!(text.starts_with("n,estimator,mean_abs_error,std_err,k,epsilon,mapping,ln_delta,runs\n"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"command":"BreakMean","n_grid":[]}"#);
    assert_eq!(mom(&["break-mean", "--config", &bad]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        mom(&["break-mean", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let ok = write(dir.path(), "ok.json", r#"{"command":"BreakMean","n_grid":[100]}"#);
    assert_eq!(mom(&["coverage", "--config", &ok]).status.code(), Some(2));
    assert_eq!(mom(&["frobnicate", "--config", &ok]).status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // n = 4 with ⌈√4⌉ = 2 outliers is at the breakdown point
    let cfg = write(dir.path(), "c.json", r#"{"command":"BreakMean","n_grid":[4]}"#);
    let o = mom(&["break-mean", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("breakdown"));
}
