use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const T3: &str = r#"{"n":3,"costs":[[null,1,1],[1,null,1],[1,1,null]],"visits":[1,1,1]}"#;
const I2L: &str = r#"{"n":2,"costs":[[5,2],[3,4]],"visits":[2,1]}"#;
const ONE_WAY: &str = r#"{"n":2,"costs":[[null,1],[null,null]],"visits":[1,1]}"#;

fn mvtsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvtsp")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_triangle() {
    let dir = TempDir::new().unwrap();
    let t3 = write(&dir, "t3.json", T3);
    let out = mvtsp(&["solve", s(&t3), "--alg", "expspace"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["cost"], 3);
    assert_eq!(v["engine"], "expspace");
}

#[test]
fn brute_tour() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "i2l.json", I2L);
    let out = mvtsp(&["solve", s(&p), "--alg", "brute", "--tour"]);
    let v = json(&out);
    assert_eq!(v["cost"], 10);
    assert_eq!(v["tour"].as_array().unwrap().len(), 3);
}

#[test]
fn infeasible_exit_code() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "one_way.json", ONE_WAY);
    let out = mvtsp(&["solve", s(&p)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["cost"], "infeasible");
}

#[test]
fn input_errors() {
    let dir = TempDir::new().unwrap();
    let garbage = write(&dir, "bad.json", "{not json");
    assert_eq!(mvtsp(&["solve", s(&garbage)]).status.code(), Some(1));
    assert_eq!(mvtsp(&["solve", "/nonexistent/instance.json"]).status.code(), Some(1));
    let negative = write(&dir, "neg.json", r#"{"n":1,"costs":[[-1]],"visits":[1]}"#);
    assert_eq!(mvtsp(&["solve", s(&negative)]).status.code(), Some(2));
    let zero = write(&dir, "zero.json", r#"{"n":1,"costs":[[1]],"visits":[0]}"#);
    assert_eq!(mvtsp(&["solve", s(&zero)]).status.code(), Some(2));
}

#[test]
fn budget_exit_code() {
    let dir = TempDir::new().unwrap();
    let n = 8;
    let costs = vec![vec![Value::from(1); n]; n];
    let inst = serde_json::json!({"n": n, "costs": costs, "visits": vec![20; n]});
    let p = write(&dir, "big.json", &inst.to_string());
    assert_eq!(mvtsp(&["solve", s(&p), "--alg", "brute", "--no-kernel"]).status.code(), Some(4));
}

#[test]
fn verify_reports() {
    let dir = TempDir::new().unwrap();
    let t3 = write(&dir, "t3.json", T3);
    let good = mvtsp(&["solve", s(&t3)]);
    let sol = write(&dir, "sol.json", std::str::from_utf8(&good.stdout).unwrap());
    assert_eq!(mvtsp(&["verify", s(&t3), s(&sol)]).status.code(), Some(0));

    let mut v = json(&good);
    v["cost"] = Value::from(4);
    let tampered = write(&dir, "tampered.json", &v.to_string());
    let out = mvtsp(&["verify", s(&t3), s(&tampered)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cost-mismatch"));

    let four = r#"{"n":4,"costs":[[null,1,1,1],[1,null,1,1],[1,1,null,1],[1,1,1,null]],"visits":[1,1,1,1]}"#;
    let four = write(&dir, "four.json", four);
    let split = r#"{"cost":4,"multiplicity":[[0,1,0,0],[1,0,0,0],[0,0,0,1],[0,0,1,0]],"engine":"x","seed":0,"wall_ms":0}"#;
    let split = write(&dir, "split.json", split);
    let out = mvtsp(&["verify", s(&four), s(&split)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not-connected"));
}

#[test]
fn verify_infeasible_claims() {
    let dir = TempDir::new().unwrap();
    let one_way = write(&dir, "one_way.json", ONE_WAY);
    let t3 = write(&dir, "t3.json", T3);
    let claim = write(
        &dir,
        "claim.json",
        r#"{"cost":"infeasible","multiplicity":null,"engine":"x","seed":0,"wall_ms":0}"#,
    );
    assert_eq!(mvtsp(&["verify", s(&one_way), s(&claim)]).status.code(), Some(0));
    let out = mvtsp(&["verify", s(&t3), s(&claim)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stdout).contains("missed-solution"));
}

#[test]
fn kernelize_outputs() {
    let dir = TempDir::new().unwrap();
    let big = T3.replace("[1,1,1]}", "[1000000,1000000,1000000]}");
    let p = write(&dir, "big.json", &big);
    let out = mvtsp(&["kernelize", s(&p)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for side in ["in", "out"] {
        assert!(v["reduced"][side].as_array().unwrap().iter().all(|x| x.as_u64().unwrap() <= 9));
    }

    let small = write(&dir, "t3.json", T3);
    let v = json(&mvtsp(&["kernelize", s(&small)]));
    assert!(v["offset"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|x| x == 0));

    let inf = r#"{"n":2,"costs":[[null,1],[null,null]],"in":[0,1],"out":[1,1]}"#;
    let inf = write(&dir, "inf.json", inf);
    assert_eq!(mvtsp(&["kernelize", s(&inf)]).status.code(), Some(2));
    let stuck = write(&dir, "stuck.json", ONE_WAY);
    assert_eq!(mvtsp(&["kernelize", s(&stuck)]).status.code(), Some(3));
}

#[test]
fn gen_is_reproducible() {
    let a = mvtsp(&["gen", "5", "3", "9", "0.5", "--seed", "7"]);
    let b = mvtsp(&["gen", "5", "3", "9", "0.5", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let t = json(&mvtsp(&["gen", "3", "1", "1", "1.0", "--seed", "7"]));
    assert_eq!(t["visits"], serde_json::json!([1, 1, 1]));

    let dir = TempDir::new().unwrap();
    let empty = mvtsp(&["gen", "4", "2", "5", "0"]);
    let p = write(&dir, "empty.json", std::str::from_utf8(&empty.stdout).unwrap());
    assert_eq!(mvtsp(&["solve", s(&p)]).status.code(), Some(3));
}

#[test]
fn bench_csv() {
    let out = mvtsp(&["bench", "--seeds", "0"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "engine,n,seed,cost,wall_ms,memo_states\n");

    let out = mvtsp(&["bench", "--n-min", "2", "--n-max", "4", "--seeds", "4", "--engines", "brute,expspace,polyspace,algebraic"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 4 * 4);
    for group in rows.chunks(4) {
        assert!(group.iter().all(|r| r[1] == group[0][1] && r[2] == group[0][2] && r[3] == group[0][3]), "{group:?}");
    }
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    for seed in 0..6 {
        let gen = mvtsp(&["gen", "4", "3", "9", "0.7", "--seed", &seed.to_string()]);
        let inst = write(&dir, &format!("g{seed}.json"), std::str::from_utf8(&gen.stdout).unwrap());
        for alg in ["auto", "algebraic", "expspace", "polyspace", "approx", "brute"] {
            let out = mvtsp(&["solve", s(&inst), "--alg", alg, "--seed", "3", "--tour"]);
            let sol = write(&dir, "sol.json", std::str::from_utf8(&out.stdout).unwrap());
            let check = mvtsp(&["verify", s(&inst), s(&sol)]);
            assert_eq!(check.status.code(), Some(0), "{alg} seed {seed}: {}", String::from_utf8_lossy(&check.stdout));
        }
    }
}

#[test]
fn fixed_seed_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let gen = mvtsp(&["gen", "5", "2", "9", "0.8", "--seed", "1"]);
    let inst = write(&dir, "g.json", std::str::from_utf8(&gen.stdout).unwrap());
    let run = || {
        let mut v = json(&mvtsp(&["solve", s(&inst), "--alg", "algebraic", "--seed", "9"]));
        v["wall_ms"] = Value::from(0);
        v
    };
    assert_eq!(run(), run());
}
