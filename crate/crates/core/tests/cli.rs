use std::process::Command;

fn logbench(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_logbench")).args(args).env_remove("STIEFEL_LOG_SEED").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: [&str; 7] = ["stiefel-log-bench", "--trials", "6", "--alpha", "0.5,1.0", "--dist", "0.5"];

#[test]
fn same_seed_same_table_regardless_of_threads() {
    let a = logbench(&[&SMALL[..], &["--seed", "3", "--threads", "1"]].concat());
    let b = logbench(&[&SMALL[..], &["--seed", "3", "--threads", "4"]].concat());
    assert_eq!(a, b);
    let c = logbench(&[&SMALL[..], &["--seed", "4"]].concat());
    assert_ne!(a, c);
}

#[test]
fn seed_from_environment() {
    let flag = logbench(&[&SMALL[..], &["--seed", "9"]].concat());
    let out = Command::new(env!("CARGO_BIN_EXE_logbench")).args(SMALL).env("STIEFEL_LOG_SEED", "9").output().unwrap();
    assert_eq!(flag, String::from_utf8(out.stdout).unwrap());
}

#[test]
fn json_output_parses() {
    let text = logbench(&["grassmann-check", "--trials", "5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v.is_array() || v.is_object(), "{v}");
}

#[test]
fn bad_band_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_logbench")).args(["karcher", "--band", "0.4"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--band"));
}
