use std::process::Command;

fn qdlog(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qdlog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = qdlog(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const HEADER: &str = "schema_version,mode,n,P,g,y,d,Q,b,epsilon,gamma,C,trials,ustar_samples,estimate,std_err,baseline,zeta,condition_ok,seed,wall_ms";

fn without_wall_ms(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
        .collect()
}

#[test]
fn simulate_tiny_explicit_prime() {
    let text = stdout(&["simulate", "--prime", "5", "--epsilon", "0", "--trials", "1"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[1..4], ["simulate", "3", "5"]);
    let estimate: f64 = row[14].parse().unwrap();
    let baseline: f64 = row[16].parse().unwrap();
    assert_eq!(estimate, baseline);
    assert!(lines.next().is_none());
}

#[test]
fn sweep_to_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = qdlog(&[
            "sweep", "--n", "5..6", "--epsilon", "0,1", "--trials", "3", "--seed", "4",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read_to_string(a).unwrap();
    let b = std::fs::read_to_string(b).unwrap();
    assert_eq!(a.lines().count(), 5);
    assert_eq!(without_wall_ms(&a), without_wall_ms(&b));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": [9], "epsilon": [0.5], "trials": 2, "master_seed": 3}"#).unwrap();
    let text = stdout(&["sweep", "--config", cfg.to_str().unwrap(), "--n", "7", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["n"], 7);
    assert_eq!(rows[0]["trials"], 2);
    assert_eq!(rows[0]["seed"], 3);
}

#[test]
fn density_and_order_stats() {
    let text = stdout(&["density", "--x-max", "1000"]);
    assert!(text.starts_with("lo,hi,primes,fouvry,fraction\n"));
    let total: u64 = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 168);
    let text = stdout(&["order-stats", "--n", "10,12", "--samples", "300", "--c1", "2/3"]);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn goodset_writes_peak_file() {
    let dir = tempfile::tempdir().unwrap();
    let peaks = dir.path().join("peaks.txt");
    let text = stdout(&["goodset", "--prime", "5", "--peaks-out", peaks.to_str().unwrap()]);
    assert_eq!(text.lines().count(), 2);
    let body = std::fs::read_to_string(peaks).unwrap();
    assert!(body.ends_with("0: 0\n2: 2\n4: 4\n6: 6\n"));
}

#[test]
fn lemma_instance_only() {
    let text = stdout(&["lemma", "--n", "8", "--epsilon", "1", "--lemma-trials", "2000", "--no-synthetic"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].contains(",instance,8,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let out = qdlog(&["simulate", "--n", "5,6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("single"));
    let out = qdlog(&["sweep", "--gamma", "1/4"]);
    assert!(!out.status.success());
    let out = qdlog(&["sweep", "--epsilon", "abc"]);
    assert!(!out.status.success());
}
