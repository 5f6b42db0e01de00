use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn twinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinsim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = twinsim(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

const SHORT: &str = "duration: 120\nwindows: [60, 60]\nseed: 7\n";

#[test]
fn generated_city_validates_and_plans() {
    let dir = tempfile::tempdir().unwrap();
    let city = dir.path().join("city.yaml");
    ok(&["generate-city", "-n", "2", "--out", city.to_str().unwrap()]);
    let c = city.to_str().unwrap();
    assert_eq!(ok(&["validate", c]).trim(), "1198 resources (12 interfaces, 1186 instances)");
    assert_eq!(ok(&["plan", c]).trim(), "exchanges=2 queues=13 bindings=45");
    let plan: serde_json::Value = serde_json::from_str(&ok(&["plan", c, "--json"])).unwrap();
    assert_eq!(plan["queues"].as_array().unwrap().len(), 13);
}

#[test]
fn dtdl_import_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("iface.json");
    fs::write(
        &src,
        r#"{"@id": "dtmi:example:Lamp;1", "@type": "Interface",
            "contents": [{"@type": "Property", "name": "lumens", "schema": "double"},
                         {"@type": "Command", "name": "switch"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("lamp.yaml");
    ok(&["import-dtdl", src.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(fs::read_to_string(&out).unwrap().contains("example-lamp"));
    assert_eq!(ok(&["validate", out.to_str().unwrap()]).trim(), "1 resources (1 interfaces, 0 instances)");
}

fn simulate(dir: &Path, name: &str, mode: &str) -> String {
    let scenario = dir.join("scenario.yaml");
    fs::write(&scenario, SHORT).unwrap();
    let out = dir.join(name);
    ok(&["simulate", "--scenario", scenario.to_str().unwrap(), "--provisioning", mode, "--out", out.to_str().unwrap(), "--store"]);
    out.to_str().unwrap().to_string()
}

#[test]
fn simulate_report_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let auto = simulate(dir.path(), "auto", "auto");
    let over = simulate(dir.path(), "over", "over");
    let again = simulate(dir.path(), "again", "auto");

    let summary = |d: &str| fs::read_to_string(Path::new(d).join("summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary(&auto)).unwrap();
    assert_eq!(parsed["seed"], 7);
    let again_parsed: serde_json::Value = serde_json::from_str(&summary(&again)).unwrap();
    assert_eq!(parsed["summary_hash"], again_parsed["summary_hash"]);

    let before = fs::read(Path::new(&auto).join("metrics/pods.csv")).unwrap();
    let listed = ok(&["report", &auto, "--csv"]);
    assert!(listed.lines().any(|l| l.ends_with("events_per_second.csv")));
    assert_eq!(before, fs::read(Path::new(&auto).join("metrics/pods.csv")).unwrap());
    let json: serde_json::Value = serde_json::from_str(&ok(&["report", &auto, "--json"])).unwrap();
    assert_eq!(json, parsed);

    let cmp = ok(&["compare", &auto, &over]);
    assert!(cmp.contains("cpu savings") && cmp.contains("memory savings"), "{cmp}");

    let history = ok(&["report", &auto, "--history", "ngsi-ld-city-airqualityobserved", "airquality-01-001"]);
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("sequence,time,payload"));
    assert!(lines.next().unwrap().starts_with("1,"));
}

#[test]
fn errors_use_distinct_exit_codes() {
    assert_eq!(twinsim(&["--bogus"]).status.code(), Some(2));
    assert_eq!(twinsim(&["validate", "/nonexistent/file.yaml"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.yaml");
    fs::write(&bad, "duration: 10\nwindows: [3]\n").unwrap();
    let o = twinsim(&["simulate", "--scenario", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window"));
    assert_eq!(twinsim(&["report", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn default_scenario_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["generate-scenario"]);
    let p = dir.path().join("s.yaml");
    fs::write(&p, &text).unwrap();
    let o = twinsim(&["simulate", "--scenario", p.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap(), "--neighborhoods", "0"]);
    assert_eq!(o.status.code(), Some(1));
    // The file parsed; only the override is rejected.
    assert!(String::from_utf8_lossy(&o.stderr).contains("neighborhoods must be at least 1"));
}
