use std::process::{Command, Output};

use serde_json::Value;

fn mockrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mockrad")).args(args).output().expect("binary runs")
}

fn mockrad_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mockrad")).args(args).env(key, val).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn last_field(text: &str) -> String {
    text.lines().next_back().unwrap().split('\t').next_back().unwrap().to_string()
}

#[test]
fn compute_reproduces_totals() {
    let o = mockrad(&["compute", "--mu", "0", "--n", "5", "--N", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(last_field(&out).starts_with("1512.0008"), "{out}");

    let o = mockrad(&["compute", "--mu", "1", "--n", "5", "--N", "1"]);
    assert!(last_field(&stdout(&o)).starts_with("40881.270"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["compute", "--mu", "0", "--n", "5", "--N", "0"][..],
        &["compute", "--mu", "2", "--n", "5", "--N", "1"],
        &["compute", "--mu", "0", "--n", "-1", "--N", "1"],
        &["verify", "nonsense"],
        &["oracle", "--mu", "0", "--n-max", "3", "--format", "xml"],
        &["compute", "--mu", "0", "--n", "5", "--N", "1", "--quad-interval-order", "0"],
    ] {
        let o = mockrad(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = mockrad_env(&["oracle", "--mu", "0", "--n-max", "1"], "MOCKRAD_THREADS", "zero");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_rows_and_horizon() {
    let o = mockrad(&["oracle", "--mu", "0", "--n-max", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let last: Vec<&str> = out.lines().last().unwrap().split('\t').collect();
    assert_eq!(last, ["5", "1512/1", "1512.000000"]);
    assert!(out.lines().nth(1).unwrap().starts_with("0\t1/9\t0.111111"));

    let o = mockrad(&["oracle", "--mu", "1", "--n-max", "5", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["coefficients"][5]["exact"], "40881/1");

    let o = mockrad(&["oracle", "--mu", "0", "--n-max", "30"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("horizon 10"), "{}", stderr(&o));
}

#[test]
fn json_and_tsv_agree() {
    let tsv = stdout(&mockrad(&["compute", "--mu", "-1", "--n", "4", "--N", "2"]));
    let json: Value = serde_json::from_str(&stdout(&mockrad(&["compute", "--mu", "-1", "--n", "4", "--N", "2", "--format", "json"]))).unwrap();
    let keys = ["a1", "a2", "a3", "a1_cum", "a2_cum", "a3_cum", "total"];
    for (line, row) in tsv.lines().skip(1).zip(json["rows"].as_array().unwrap()) {
        let cells: Vec<f64> = line.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
        for (c, key) in cells.iter().zip(keys) {
            assert_eq!(*c, row[key].as_f64().unwrap(), "{key}");
        }
    }
    assert_eq!(json["N"], 2);
}

#[test]
fn output_independent_of_threads() {
    let args = ["compute", "--mu", "1", "--n", "3", "--N", "4", "--format", "json"];
    let one = stdout(&mockrad_env(&args, "MOCKRAD_THREADS", "1"));
    let four = stdout(&mockrad_env(&args, "MOCKRAD_THREADS", "4"));
    assert_eq!(one, four);
}

#[test]
fn config_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "threads = 2\n[quad]\ninterval_order = 120\nradial_order = 90\n").unwrap();
    let base = ["compute", "--mu", "0", "--n", "5", "--N", "2"];
    let with_cfg = mockrad(&[&base[..], &["--config", cfg.to_str().unwrap()]].concat());
    assert!(with_cfg.status.success(), "{}", stderr(&with_cfg));
    let flags = mockrad(&[&base[..], &["--quad-interval-order", "120", "--quad-radial-order", "90"]].concat());
    assert_eq!(stdout(&with_cfg), stdout(&flags));
    assert!(last_field(&stdout(&flags)).starts_with("1512.003"));

    std::fs::write(&cfg, "[quad]\nbogus = 1\n").unwrap();
    let o = mockrad(&[&base[..], &["--config", cfg.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let p = path.to_str().unwrap();
    let args = ["compute", "--mu", "0", "--n", "5", "--N", "3", "--cache", p];
    let first = mockrad(&args);
    assert!(first.status.success());
    assert!(path.exists());
    let second = mockrad(&args);
    assert_eq!(stdout(&first), stdout(&second));

    std::fs::write(&path, "{").unwrap();
    assert_eq!(mockrad(&args).status.code(), Some(1));
}

#[test]
fn verify_reports() {
    let o = mockrad(&["verify", "multipliers", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["suite"], "multipliers");
    let records = v["records"].as_array().unwrap();
    assert!(records.len() >= 200);
    for r in records {
        for key in ["identity", "parameters", "lhs", "rhs", "residual", "tolerance", "pass"] {
            assert!(r.get(key).is_some(), "{key}");
        }
        assert_eq!(r["pass"], true);
    }

    let o = mockrad(&["verify", "mock-transform"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("mock-transformation\t")).count(), 2);
}

#[test]
fn tables_pass_and_fail() {
    let o = mockrad(&["tables"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 25);
    let cell = |table: &str, row: &str, n: &str| -> Vec<String> {
        out.lines()
            .map(|l| l.split('\t').map(String::from).collect::<Vec<_>>())
            .find(|c| c[0] == table && c[1] == row && c[2] == n)
            .unwrap()
    };
    let a2 = cell("mu=0, n=5", "A2", "2");
    assert_eq!(a2[3], "-32811.3140");
    let a3 = cell("mu=1, n=5", "A3", "3");
    assert_eq!(a3[3], "74519.440");
    assert!(a3[4].starts_with("74519.44"));

    let o = mockrad(&["tables", "--tol", "1e-9"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("A2 N=2"));
}

#[test]
fn bench_runs() {
    let o = mockrad(&["bench", "--mu", "0", "--n", "5", "--N", "1", "--repeat", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["repeat"], 1);
    assert!((v["total"].as_f64().unwrap() - 1511.9539).abs() < 1e-3);
}
