use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gridclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridclust")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gridclust(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_fit_hierarchy_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("data.csv");
    let model = dir.path().join("model.json");
    let hierarchy = dir.path().join("hierarchy.json");
    let summary = dir.path().join("summary.json");

    ok(&["synth", "--m", "2000", "--seed", "3", "--output", s(&points)]);
    let truth = std::fs::read_to_string(dir.path().join("data.truth.csv")).unwrap();
    assert_eq!(truth.lines().next(), Some("curve_id,group"));
    assert_eq!(truth.lines().count(), 41);

    ok(&["fit", "--input", s(&points), "--output", s(&model), "--seed", "1", "--restarts", "2"]);
    let m = json(&model);
    assert_eq!(m["points"], 2000);
    assert_eq!(m["curves"], 40);
    let k_c = m["clusters"].as_array().unwrap().len();
    assert!(k_c >= 2);
    let fitted = m["criterion"]["total"].as_f64().unwrap();
    assert!(fitted <= m["initial_criterion"].as_f64().unwrap());
    let assigned: usize = m["clusters"].as_array().unwrap().iter().map(|c| c["curves"].as_array().unwrap().len()).sum();
    assert_eq!(assigned, 40);

    ok(&["hierarchy", "--input", s(&points), "--model", s(&model), "--output", s(&hierarchy)]);
    let h = json(&hierarchy);
    let events = h["events"].as_array().unwrap();
    let cluster_events = events.iter().filter(|e| e["dimension"] == "C").count();
    assert_eq!(cluster_events, k_c - 1);
    let mut previous = fitted;
    for e in events {
        let after = e["criterion_after"].as_f64().unwrap();
        assert!((after - previous - e["delta_c"].as_f64().unwrap()).abs() < 1e-6);
        previous = after;
    }
    let rows = h["pareto"]["rows"].as_array().unwrap();
    assert_eq!(rows.first().unwrap()["tau"], 1.0);
    assert_eq!(rows.last().unwrap()["tau"], 0.0);
    assert!(rows.windows(2).all(|w| w[0]["k"].as_u64() >= w[1]["k"].as_u64()));

    ok(&["summarize", "--input", s(&points), "--model", s(&model), "--output", s(&summary)]);
    assert_eq!(json(&summary).as_array().unwrap().len(), k_c);
    let tsv = std::fs::read_to_string(dir.path().join("summary.conditional.tsv")).unwrap();
    let mut sums = std::collections::HashMap::<(String, String), f64>::new();
    for line in tsv.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        *sums.entry((f[0].into(), f[1].into())).or_default() += f[4].parse::<f64>().unwrap();
    }
    assert!(!sums.is_empty());
    assert!(sums.values().all(|t| (t - 1.0).abs() < 1e-9));
    assert!(dir.path().join("summary.prototypes.tsv").exists());
}

#[test]
fn same_seed_gives_identical_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("p.csv");
    ok(&["synth", "--m", "1000", "--seed", "9", "--output", s(&points)]);
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["fit", "--input", s(&points), "--output", s(&out), "--seed", "4", "--restarts", "2"]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let missing = gridclust(&["fit", "--input", s(&dir.path().join("nope.csv")), "--output", s(&out)]);
    assert_eq!(missing.status.code(), Some(2));

    let malformed = dir.path().join("bad.csv");
    std::fs::write(&malformed, "curve_id,x,y\na,1,2\nb,x,3\n").unwrap();
    let res = gridclust(&["fit", "--input", s(&malformed), "--output", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));

    let points = dir.path().join("p.csv");
    std::fs::write(&points, "curve_id,x,y\na,1,2\nb,2,3\n").unwrap();
    std::fs::write(&out, "{\"not\": \"a model\"}").unwrap();
    let res = gridclust(&["summarize", "--input", s(&points), "--model", s(&out), "--output", s(&dir.path().join("s.json"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn model_from_other_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["synth", "--m", "400", "--seed", "1", "--output", s(&a)]);
    ok(&["synth", "--m", "500", "--seed", "1", "--output", s(&b)]);
    let model = dir.path().join("a.json");
    ok(&["fit", "--input", s(&a), "--output", s(&model), "--restarts", "1"]);
    let res = gridclust(&["hierarchy", "--input", s(&b), "--model", s(&model), "--output", s(&dir.path().join("h.json"))]);
    assert_eq!(res.status.code(), Some(2));
}
