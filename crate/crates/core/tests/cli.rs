use std::process::{Command, Output};

fn endcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endcut")).args(args).env_remove("ENDCUT_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(endcut(&[]).status.code(), Some(2));
    assert_eq!(endcut(&["exp", "stump-rmse", "--bogus"]).status.code(), Some(2));
    assert_eq!(endcut(&["exp", "no-such-experiment"]).status.code(), Some(2));
    assert_eq!(endcut(&["exp", "stump-rmse", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(endcut(&["exp", "split-index", "--a", "0.9", "--b", "0.1"]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_with_zero() {
    let h = endcut(&["--help"]);
    assert_eq!(h.status.code(), Some(0));
    assert!(stdout(&h).contains("selftest"));
    assert_eq!(endcut(&["--version"]).status.code(), Some(0));
    assert_eq!(endcut(&["exp", "--help"]).status.code(), Some(0));
}

#[test]
fn split_index_reports_its_bound() {
    let o = endcut(&["exp", "split-index", "--n", "2000", "--reps", "50", "--seed", "3"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("freq_lo ")).expect("freq_lo row");
    assert!(line.contains("bound=0.294304"), "{line}");
}

#[test]
fn experiments_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = endcut(&["exp", "stump-rmse", "--reps", "5", "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["rows.csv", "summary.csv", "plot.svg", "meta.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\nreps = 4\nseed = 99\n").unwrap();
    let path = cfg.to_str().unwrap();
    let o = endcut(&["--config", path, "exp", "stump-rmse"]);
    let text = stdout(&o);
    assert!(text.contains("reps: 4,") && text.contains("seed: 99,"), "{text}");
    let o = endcut(&["--config", path, "exp", "stump-rmse", "--seed", "5"]);
    assert!(stdout(&o).contains("seed: 5,"));

    std::fs::write(&cfg, "reps 4\n").unwrap();
    assert_eq!(endcut(&["--config", path, "exp", "stump-rmse"]).status.code(), Some(2));
}

#[test]
fn seed_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_endcut"))
        .args(["exp", "stump-rmse", "--reps", "3"])
        .env("ENDCUT_SEED", "1234")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("seed: 1234,"));
}

#[test]
fn fit_reads_a_csv_and_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("x,y\n");
    for i in 0..40 {
        let x = f64::from(i) / 40.0;
        text.push_str(&format!("{x},{}\n", if x < 0.5 { 0.0 } else { 1.0 }));
    }
    std::fs::write(&data, text).unwrap();
    let o = endcut(&["fit", "--model", "cart", "--data", data.to_str().unwrap(), "--depth", "1", "--grid", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("x,prediction"));

    let missing = endcut(&["fit", "--model", "cart", "--data", dir.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let o = endcut(&["selftest", "--cases", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
