use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn domp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, n: usize, p: usize, count: usize, seed: u64) {
    let o = domp(&[
        "generate",
        "-n",
        &n.to_string(),
        "-p",
        &p.to_string(),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
        "-o",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

#[test]
fn generate_writes_named_files_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(a.path(), 10, 3, 10, 1);
    generate(b.path(), 10, 3, 10, 1);
    let names = files(a.path());
    assert_eq!(names.len(), 10);
    assert!(names.contains(&"domp_n10_p3_s1.domp".to_string()));
    assert!(names.contains(&"domp_n10_p3_s10.domp".to_string()));
    for name in &names {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y);
        // λ line: every weight within [n/4, n]
        let text = String::from_utf8(x).unwrap();
        let nums: Vec<f64> = text.split_whitespace().map(|t| t.parse().unwrap()).collect();
        for &w in &nums[2..12] {
            assert!((2.5..=10.0).contains(&w), "{w}");
        }
    }
}

#[test]
fn solve_and_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 8, 3, 1, 5);
    let inst = dir.path().join("domp_n8_p3_s5.domp");
    let inst = inst.to_str().unwrap();
    let verify = domp(&["verify", inst]);
    assert_eq!(verify.status.code(), Some(0));
    let optimum = field(&stdout(&verify), "optimum");

    let json = dir.path().join("sol.json");
    let o = domp(&[
        "solve", inst, "--method", "rowgen", "--strategy", "callback", "--b", "1.0", "--mip-gap", "0", "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(field(&out, "status"), "Optimal");
    assert_eq!(field(&out, "value"), optimum);

    let o = domp(&["solve", inst, "--method", "bc", "--strategy", "pool", "--mip-gap", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "value"), optimum);

    let v = domp(&["verify", inst, "--solution", json.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("verdict: pass"));

    // tampered value
    let mut sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let value = sol["value"].as_f64().unwrap();
    sol["value"] = serde_json::json!(value + 1.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, sol.to_string()).unwrap();
    let v = domp(&["verify", inst, "--solution", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    assert!(stdout(&v).contains("verdict: mismatch"));

    // positions reversed
    sol["value"] = serde_json::json!(value);
    let pos = sol["positions"].as_array().unwrap().clone();
    sol["positions"] = serde_json::Value::Array(pos.into_iter().rev().collect());
    fs::write(&bad, sol.to_string()).unwrap();
    let v = domp(&["verify", inst, "--solution", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    assert!(stdout(&v).contains("verdict: infeasible"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 5, 2, 1, 0);
    let inst = dir.path().join("domp_n5_p2_s0.domp");
    let inst = inst.to_str().unwrap();
    assert_eq!(domp(&["solve", inst, "--b", "2.0"]).status.code(), Some(1));
    assert_eq!(domp(&["solve", inst, "--method", "nope"]).status.code(), Some(1));
    assert_eq!(domp(&["solve", "/nonexistent.domp"]).status.code(), Some(1));
    assert_eq!(domp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(domp(&["generate", "-n", "3", "-p", "5", "-o", dir.path().to_str().unwrap()]).status.code(), Some(1));
    let garbage = dir.path().join("garbage.domp");
    fs::write(&garbage, "3 1\n1 x 1\n").unwrap();
    assert_eq!(domp(&["solve", garbage.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(domp(&["--help"]).status.code(), Some(0));
}

#[test]
fn time_limit_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 12, 4, 1, 3);
    let inst = dir.path().join("domp_n12_p4_s3.domp");
    let o = domp(&["solve", inst.to_str().unwrap(), "--method", "woc", "--time-limit", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let status = field(&stdout(&o), "status");
    assert!(status == "TimeLimit" || status == "Optimal", "{status}");
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = tempfile::tempdir().unwrap();
    let o = domp(&["bench", empty.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "instance,n,p,method,strategy,b,status,time_s,value,best_bound,gap_root_pct,gap_pct,orig_cons,cuts,nodes\n"
    );

    generate(dir.path(), 6, 2, 2, 7);
    let csv = dir.path().join("out.csv");
    let o = domp(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--methods",
        "bc",
        "--strategies",
        "pool,callback",
        "--mip-gap",
        "0",
        "--jobs",
        "2",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // header, 2 instances x 2 strategies, 2 mean rows
    assert_eq!(lines.len(), 1 + 4 + 2);
    let value = |l: &str| l.split(',').nth(8).unwrap().to_string();
    assert_eq!(value(lines[1]), value(lines[2]));
    assert_eq!(value(lines[3]), value(lines[4]));
    assert!(lines[5].starts_with("MEAN,"));
}
