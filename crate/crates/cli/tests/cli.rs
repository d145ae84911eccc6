use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permuton-lab"))
        .args(args)
        .env("PERMUTON_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn schnyder_of_size_one_is_a_single_centred_point() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "schnyder", "--n", "1", "--seed", "0", "--out", s(dir.path())]);
    assert_eq!(read(&dir.path().join("points.csv")), "i,x1,x2,x3\n1,0.5,0.5,0.5\n");
    let perm = json(&read(&dir.path().join("perm.json")));
    assert_eq!(perm, serde_json::json!({"d": 3, "n": 1, "cols": [[1], [1]]}));
    assert_eq!(read(&dir.path().join("string.txt")).trim(), "gbr");
    for tree in ["green.json", "red.json"] {
        let t = json(&read(&dir.path().join(tree)));
        assert_eq!(t["parent"]["1"], 0);
    }
}

#[test]
fn schnyder_export_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "schnyder", "--n", "200", "--seed", "9", "--out", s(dir.path())]);
    let perm = json(&read(&dir.path().join("perm.json")));
    let cols: Vec<Vec<u64>> = serde_json::from_value(perm["cols"].clone()).unwrap();
    let csv = read(&dir.path().join("points.csv"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 200);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1) as f64);
        assert_eq!(r[1], (2 * i + 1) as f64 / 400.0);
        for j in 0..2 {
            assert_eq!(r[2 + j], (2 * cols[j][i] - 1) as f64 / 400.0);
        }
    }
    let walk = json(&read(&dir.path().join("walk.json")));
    assert_eq!(walk["n"], 200);
    let string = read(&dir.path().join("string.txt"));
    assert_eq!(string.trim().len(), 600);
    assert!(!walk["steps"].as_array().unwrap().is_empty());
}

#[test]
fn outputs_are_deterministic_under_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (family, extra) in [
        ("schnyder", vec![]),
        ("separable", vec!["--d", "3"]),
        ("brownian", vec!["--p", "0.3,0.6"]),
    ] {
        for dir in [&a, &b] {
            let out = dir.path().join(family);
            let mut args = vec!["sample", family, "--n", "60", "--seed", "42", "--out", s(&out)];
            args.extend(&extra);
            ok(&args);
        }
        for file in ["perm.json", "points.csv"] {
            assert_eq!(
                read(&a.path().join(family).join(file)),
                read(&b.path().join(family).join(file)),
                "{family}/{file}"
            );
        }
    }
    let conv = |dir: &Path| {
        let out = dir.join("conv.json");
        ok(&["convergence", "separable", "--n", "20,40", "--reps", "10", "--seed", "3", "--out", s(&out)]);
        read(&out)
    };
    assert_eq!(conv(a.path()), conv(b.path()));
}

#[test]
fn separable_export_contains_both_trees() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "separable", "--n", "30", "--d", "2", "--seed", "1", "--method", "cycle-lemma", "--out", s(dir.path())]);
    assert_eq!(json(&read(&dir.path().join("sign_tree.json")))["kind"], "sign");
    assert_eq!(json(&read(&dir.path().join("swap_tree.json")))["kind"], "swap");
    let perm = json(&read(&dir.path().join("perm.json")));
    assert_eq!(perm["d"], 2);
    assert_eq!(perm["n"], 30);
}

#[test]
fn brownian_json_cloud_has_the_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "brownian", "--n", "10000", "--p", "0.5,0.5", "--seed", "2", "--format", "json", "--out", s(dir.path())]);
    let cloud = json(&read(&dir.path().join("points.json")));
    assert_eq!(cloud["d"], 3);
    assert_eq!(cloud["points"].as_array().unwrap().len(), 10000);
}

#[test]
fn pattern_against_itself_has_frequency_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    std::fs::write(&file, r#"{"d":3,"n":3,"cols":[[1,3,2],[2,1,3]]}"#).unwrap();
    let r = json(&ok(&["freq", "--input", s(&file), "--pattern", "1,3,2|2,1,3"]));
    assert_eq!(r["freq"], 1.0);
    assert_eq!(r["rational"], "1");
}

#[test]
fn monte_carlo_frequency_matches_exact() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "schnyder", "--n", "40", "--seed", "5", "--out", s(dir.path())]);
    let input = dir.path().join("perm.json");
    for pattern in ["2,1|1,2", "1,2|2,1", "2,1,3|3,1,2"] {
        let exact = json(&ok(&["freq", "--input", s(&input), "--pattern", pattern]));
        let mc = json(&ok(&[
            "freq", "--input", s(&input), "--pattern", pattern, "--method", "mc", "--trials", "200000", "--seed", "8",
        ]));
        let (e, m, se) = (
            exact["freq"].as_f64().unwrap(),
            mc["freq"].as_f64().unwrap(),
            mc["se"].as_f64().unwrap(),
        );
        assert!((e - m).abs() <= (4.0 * se).max(1e-12), "{pattern}: exact {e}, mc {m} ± {se}");
    }
}

#[test]
fn inversion_frequency_is_an_exact_rational() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    std::fs::write(&file, r#"{"d":2,"n":4,"cols":[[3,1,4,2]]}"#).unwrap();
    let r = json(&ok(&["freq", "--input", s(&file), "--pattern", "2,1"]));
    assert_eq!(r["rational"], "1/2");
}

#[test]
fn verify_passes_with_the_default_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("manifest.json");
    ok(&["verify", "--out", s(&out)]);
    let m = json(&read(&out));
    assert_eq!(m["all_passed"], true);
    let checks = m["checks"].as_array().unwrap();
    assert_eq!(checks.len(), permuton_lab::oracle::check_names().len());
    assert!(checks.iter().all(|c| c["status"] == "pass"));
}

#[test]
fn convergence_reports_every_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    ok(&[
        "convergence", "schnyder", "--n", "100,400,1600", "--reps", "4", "--pattern", "2,1|1,2", "--seed", "1", "--out",
        s(&out),
    ]);
    let r = json(&read(&out));
    let rows = r["entries"][0]["rows"].as_array().unwrap();
    let sizes: Vec<u64> = rows.iter().map(|x| x["n"].as_u64().unwrap()).collect();
    assert_eq!(sizes, [100, 400, 1600]);
    assert_eq!(r["laws"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(run(&["sample", "schnyder", "--n", "5", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["sample", "schnyder", "--n", "0", "--seed", "1", "--out", out]).status.code(), Some(2));
    assert_eq!(
        run(&["sample", "schnyder", "--n", "5", "--seed", "1", "--method", "nope", "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["sample", "brownian", "--n", "5", "--p", "1.5", "--seed", "1", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["sample", "separable", "--n", "6000", "--seed", "1", "--out", out]).status.code(), Some(3));

    let file = dir.path().join("p.json");
    std::fs::write(&file, r#"{"d":2,"n":6,"cols":[[1,2,3,4,5,6]]}"#).unwrap();
    assert_eq!(run(&["freq", "--input", s(&file), "--pattern", "1,2,3,4,5"]).status.code(), Some(3));
    assert_eq!(run(&["freq", "--input", s(&file), "--pattern", "2,1", "--method", "mc"]).status.code(), Some(2));
    assert_eq!(run(&["freq", "--input", s(&file), "--pattern", "2,2"]).status.code(), Some(2));
    std::fs::write(&file, r#"{"d":2,"n":2,"cols":[[1,1]]}"#).unwrap();
    assert_eq!(run(&["freq", "--input", s(&file), "--pattern", "2,1"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["freq", "--input", s(&missing), "--pattern", "2,1"]).status.code(), Some(1));
}
