use std::process::{Command, Output};

fn dhi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhi")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = dhi(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn exact_subgroup_of_eleven() {
    let out = stdout(&["exact", "--p", "11", "--subgroup"]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "prime,class,family,order,mode,n,replicates,statistic,p_value,proportion_lower,distance_to_center,relative_distance,sample_seed,null_seed"
    );
    assert_eq!(lines.next().unwrap(), "11,safe,subgroup,5,exact,0,,0.0687913265236688,,,,,,");
    assert!(lines.next().is_none());
}

#[test]
fn classify_json() {
    let out = stdout(&["classify", "--lo", "2000", "--hi", "2020", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let primes: Vec<u64> = v.as_array().unwrap().iter().map(|r| r["prime"].as_u64().unwrap()).collect();
    assert_eq!(primes, [2003, 2011, 2017]);
    assert!(v.as_array().unwrap().iter().all(|r| r["class"] == "other"));
}

#[test]
fn survey_rows_are_sorted_by_prime_then_family() {
    let out = stdout(&["survey", "--lo", "2020", "--hi", "2040", "--subgroup"]);
    let keys: Vec<(String, String)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].to_string())
        })
        .collect();
    let expected = [
        ("2027", "full"),
        ("2027", "subgroup"),
        ("2029", "full"),
        ("2039", "full"),
        ("2039", "subgroup"),
    ];
    assert_eq!(keys.len(), expected.len());
    for (k, e) in keys.iter().zip(expected) {
        assert_eq!((k.0.as_str(), k.1.as_str()), e);
    }
}

#[test]
fn table1_boundary_and_errors() {
    let out = stdout(&["table1", "--p", "11", "--schedule", "100", "--replicates", "20"]);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().starts_with("100,"));

    let over = dhi(&["table1", "--p", "11", "--schedule", "101", "--replicates", "20"]);
    assert_eq!(over.status.code(), Some(1));
    let unordered = dhi(&["table1", "--schedule", "118,59"]);
    assert_eq!(unordered.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(dhi(&["exact", "--p", "1194"]).status.code(), Some(1));
    assert_eq!(dhi(&["exact", "--p", "13", "--subgroup"]).status.code(), Some(1));
    assert_eq!(dhi(&["bogus"]).status.code(), Some(1));
    assert_eq!(dhi(&["--help"]).status.code(), Some(0));
    assert_eq!(dhi(&["dhi-test", "--p", "11", "--n", "101"]).status.code(), Some(1));
    assert_eq!(
        dhi(&["classify", "--lo", "2", "--hi", "9", "--out", "/nonexistent/dir/out.csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn cache_hit_reemits_stored_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache = cache.to_str().unwrap();
    let first = stdout(&["dhi-test", "--p", "1193", "--n", "500", "--replicates", "50", "--cache-dir", cache]);
    assert_eq!(std::fs::read_dir(cache).unwrap().count(), 1);
    let second = stdout(&[
        "dhi-test", "--p", "1193", "--n", "500", "--replicates", "50", "--cache-dir", cache, "--threads", "3",
    ]);
    assert_eq!(first, second);
    assert_eq!(std::fs::read_dir(cache).unwrap().count(), 1);
}

#[test]
fn hex_and_decimal_seeds_agree() {
    let a = stdout(&["dhi-test", "--p", "101", "--n", "300", "--replicates", "30", "--seed", "255"]);
    let b = stdout(&["dhi-test", "--p", "101", "--n", "300", "--replicates", "30", "--seed", "0xff"]);
    assert_eq!(a, b);
}
