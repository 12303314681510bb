use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn swlrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swlrt"))
        .args(args)
        .env_remove("SWLRT_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn km_two_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "two.csv", "time,event,arm\n1,1,0\n2,0,1\n");
    let o = swlrt(&["km", &f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let pooled: Vec<_> = text.lines().filter(|l| l.contains(",pooled,")).collect();
    assert_eq!(pooled, vec!["all,pooled,1,2,1,0.5"]);
}

#[test]
fn km_empty_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "empty.csv", "");
    assert_eq!(swlrt(&["km", &f]).status.code(), Some(2));
    let header_only = write(dir.path(), "header.csv", "time,event,arm\n");
    assert_eq!(swlrt(&["km", &header_only]).status.code(), Some(2));
}

#[test]
fn analyze_ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("time,event,arm\n1,1,0\n2,1,1\n3,1,0\n4,2,1\n", "line 5"),
        ("time,status,arm\n1,1,0\n", "missing column 'event'"),
        ("time,event,arm\n1,1,0\n2,1,7\n", "line 3"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let f = write(dir.path(), &format!("bad{i}.csv"), text);
        let o = swlrt(&["analyze", &f]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
    }
    let f = write(dir.path(), "s.csv", "time,event,arm,g\n1,1,0,a\n2,1,1,b\n3,1,0,c\n4,1,1,a\n");
    let o = swlrt(&["analyze", &f, "--stratum", "g", "--strata", "a,b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn analyze_all_censored_stratum_exits_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "cens.csv",
        "time\tevent\tarm\tecog\n1\t1\t0\tpoor\n2\t1\t1\tpoor\n3\t1\t0\tpoor\n4\t0\t1\tpoor\n\
         5\t0\t0\tgood\n6\t0\t1\tgood\n",
    );
    let out = dir.path().join("report");
    let o = swlrt(&["analyze", &f, "--stratum", "ecog", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("Zs_n") && err.contains("Zs_Wn"), "{err}");
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    for line in results.lines().skip(1) {
        let fields: Vec<_> = line.split(',').collect();
        let failed = fields[0] == "Zs_n" || fields[0] == "Zs_Wn";
        assert_eq!(fields[2].is_empty(), failed, "{line}");
    }
    for name in ["strata.csv", "km.csv", "metadata.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert!(stdout(&o).contains("poor"));
}

#[test]
fn analyze_single_stratum_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "one.csv",
        "time,event,arm\n1,1,0\n2,1,1\n3,0,0\n4,1,1\n5,1,0\n6,0,1\n",
    );
    let out = dir.path().join("r");
    let o = swlrt(&["analyze", &f, "--t-star", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("single stratum"));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let z: std::collections::HashMap<String, f64> = results
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<_> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect();
    for (a, b) in [("Z", "Zs"), ("Z", "Zs_n"), ("ZW", "Zs_Wu"), ("ZW", "Zs_Wz"), ("ZW", "Zs_Wn")] {
        assert!((z[a] - z[b]).abs() < 1e-12, "{a} {b}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "analyze");
    assert_eq!(meta["flags"]["t_star"], 3.0);
}

#[test]
fn design_output() {
    let o = swlrt(&["design", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["events"], 256);
    assert!(v["patients"].as_u64().unwrap().abs_diff(344) <= 4);
    let o = swlrt(&["design", "--power", "0.8", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["events"], 191);
    let o = swlrt(&["design", "--median-exp", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_flag_errors() {
    for args in [
        &["simulate", "--all", "--reps", "0"][..],
        &["simulate", "--all", "--effect", "3"],
        &["simulate", "--scenario", "none-1", "--prognostic", "none"],
        &["simulate"],
        &["simulate", "--scenario", "nope"],
        &["simulate", "--effect", "10"],
        &["simulate", "--scenario", "none-1", "--workers", "0"],
    ] {
        assert_eq!(swlrt(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn simulate_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "2", "8"] {
        let out = dir.path().join(format!("w{workers}.csv"));
        let o = swlrt(&[
            "simulate", "--prognostic", "strong", "--effect", "8", "--reps", "300", "--seed", "11",
            "--workers", workers, "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read(&out).unwrap());
        let meta = fs::read_to_string(dir.path().join(format!("w{workers}.csv.meta.json"))).unwrap();
        assert!(meta.contains("\"seed\": 11"));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 8);
}

#[test]
fn simulate_seed_from_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_swlrt"));
        c.args(["simulate", "--scenario", "none-7", "--reps", "100"]).args(extra);
        match env {
            Some(v) => c.env("SWLRT_SEED", v),
            None => c.env_remove("SWLRT_SEED"),
        };
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("5"), &[]), run(None, &["--seed", "5"]));
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.json");
    let o = swlrt(&["export-scenarios", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let from_file = swlrt(&[
        "simulate", "--scenario-file", path.to_str().unwrap(), "--scenario", "moderate-5",
        "--reps", "50",
    ]);
    let builtin = swlrt(&["simulate", "--scenario", "moderate-5", "--reps", "50"]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert_eq!(from_file.stdout, builtin.stdout);

    let bad = write(dir.path(), "bad.json", "{\"version\": 2, \"scenarios\": []}");
    let o = swlrt(&["simulate", "--scenario-file", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experimental_label_and_delimiter_flags() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "lab.txt",
        "t|d|trt\n1|1|ctl\n2|1|new\n3|0|ctl\n4|1|new\n5|1|ctl\n",
    );
    let o = swlrt(&[
        "km", &f, "--delimiter", "|", "--time", "t", "--event", "d", "--arm", "trt",
        "--experimental", "new",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("all,1,2,2,1,0.5"), "{}", stdout(&o));
}
