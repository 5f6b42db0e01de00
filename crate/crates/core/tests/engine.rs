//! End-to-end runs of the smart city scenario.

use std::collections::BTreeMap;
use std::fs;
use twinsim_core::engine::config::INTERFACE_DEVICE;
use twinsim_core::engine::{run, Provisioning, RunResult, ScenarioConfig, STORE_SERVICE};
use twinsim_core::metrics::{median, read_run, summarize, write_run};
use twinsim_core::routing::DispatcherRole;

fn short(n: u32, seed: u64, provisioning: Provisioning, duration: f64) -> ScenarioConfig {
    ScenarioConfig { duration, windows: vec![duration / 2.0; 2], ..ScenarioConfig::city(n, seed, provisioning) }
}

fn check_conservation(r: &RunResult) {
    let b = &r.broker;
    assert_eq!(b.published, b.routed + b.unroutable + b.rejected);
    for (name, q) in &b.queues {
        assert_eq!(q.enqueued, q.dequeued, "queue {name} drained");
    }
    let mut failures = b.unroutable + b.rejected;
    for s in &r.services {
        assert_eq!(s.delivered, s.completed + s.failed + s.unfinished, "service {}", s.name);
        failures += s.failed;
    }
    for d in &r.dispatchers {
        assert_eq!(d.processed, b.queues[&d.queue].dequeued);
        failures += d.failed;
    }
    assert_eq!(r.dead_letter_count, failures);
    let store = r.service(STORE_SERVICE).unwrap();
    let forwarder = r.dispatchers.iter().find(|d| d.role == DispatcherRole::EventStore).unwrap();
    assert_eq!(b.queues[&forwarder.queue].enqueued, store.delivered + forwarder.failed);
    assert_eq!(r.store.appended, store.completed);
}

#[test]
fn empty_scenario_runs() {
    let config = ScenarioConfig { duration: 0.0, windows: vec![], ..Default::default() };
    let r = run(&config).unwrap();
    assert_eq!(r.generated.total, 0);
    assert_eq!(r.seconds, 0);
    assert_eq!(r.broker.published, 0);
    check_conservation(&r);
}

#[test]
fn runs_are_deterministic() {
    let a = run(&short(1, 9, Provisioning::Auto, 120.0)).unwrap();
    let b = run(&short(1, 9, Provisioning::Auto, 120.0)).unwrap();
    assert_eq!(a.summary_hash, b.summary_hash);
    assert_eq!(a, b);
    let c = run(&short(1, 10, Provisioning::Auto, 120.0)).unwrap();
    assert_ne!(a.summary_hash, c.summary_hash);
}

#[test]
fn every_envelope_is_accounted_for() {
    for p in [Provisioning::Auto, Provisioning::UNDER, Provisioning::OVER] {
        let r = run(&short(2, 3, p, 240.0)).unwrap();
        check_conservation(&r);
        assert_eq!(r.dead_letter_count, 0, "{}", p.label());
        assert!(r.store.appended > 0);
    }
}

#[test]
fn low_battery_notifications_match_samples() {
    let r = run(&short(1, 6, Provisioning::Auto, 480.0)).unwrap();
    assert!(r.generated.battery_low > 0);
    assert_eq!(r.virtual_delivered, r.generated.battery_low);
    assert_eq!(r.service(INTERFACE_DEVICE).unwrap().completed, r.generated.battery_samples);
    let ratio = r.virtual_delivered as f64 / r.service(INTERFACE_DEVICE).unwrap().completed as f64;
    // Levels start uniform on [5, 100] and drain by 2.25 per sample on average.
    assert!(ratio > 0.05 && ratio < 0.4, "{ratio}");
}

#[test]
fn idle_services_scale_to_zero() {
    let cutoff = 40.0;
    let config = ScenarioConfig { workload_cutoff: Some(cutoff), ..short(1, 2, Provisioning::Auto, 240.0) };
    let r = run(&config).unwrap();
    // Idle window plus one tick, with slack for in-flight command chains.
    let by = (cutoff + 30.0 + 2.0 + 2.0) as usize;
    for s in &r.services {
        let floor = if s.name == STORE_SERVICE { 1.0 } else { 0.0 };
        assert!(s.usage.replicas[0..by].iter().any(|&v| v > floor), "{} was active", s.name);
        assert!(s.usage.replicas[by..].iter().all(|&v| v == floor), "{} idles at {floor}", s.name);
        assert!(s.max_replicas_seen <= s.max_replicas);
    }
}

#[test]
fn fixed_modes_hold_constant_totals() {
    for (p, total) in [(Provisioning::UNDER, 13.0), (Provisioning::OVER, 160.0)] {
        let r = run(&short(1, 4, p, 240.0)).unwrap();
        let d = r.scenario_seconds();
        assert!(r.resources.pods[..d].iter().all(|&v| v == total), "{}", p.label());
        assert!(r.resources.requested_cpu[..d].iter().all(|&v| (v - total * 0.1).abs() < 1e-9));
    }
}

#[test]
fn generated_load_scales_with_neighborhoods() {
    let one = run(&short(1, 8, Provisioning::Auto, 240.0)).unwrap().generated.total as f64;
    let three = run(&short(3, 8, Provisioning::Auto, 240.0)).unwrap().generated.total as f64;
    assert!((three / one / 3.0 - 1.0).abs() < 0.05, "{one} vs {three}");
}

fn column(path: &std::path::Path, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn run_directory_round_trips_and_summaries_match_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&short(1, 5, Provisioning::Auto, 240.0)).unwrap();
    let summary = write_run(dir.path(), &r).unwrap();
    assert_eq!(summary, summarize(&r));
    let back = read_run(dir.path()).unwrap();
    assert_eq!(back.summary_hash, r.summary_hash);
    assert_eq!(back.latency, r.latency);

    let m = dir.path().join("metrics");
    let d = r.scenario_seconds();
    let ce = column(&m.join("events_per_second.csv"), "cloudevents");
    assert_eq!(ce.len(), r.seconds);
    assert_eq!(median(&ce[..d]).unwrap(), summary.cloudevents_per_second.median);
    let pods = column(&m.join("pods.csv"), "total");
    assert_eq!(median(&pods[..d]).unwrap(), summary.pods.median);
    let cpu = column(&m.join("cpu.csv"), "requested_cpu");
    let integral: f64 = cpu[..d].iter().sum();
    assert!((integral - summary.requested_cpu_integral).abs() < 1e-9);

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for svc in fs::read_to_string(m.join("latency_samples.csv")).unwrap().lines().skip(1) {
        *counts.entry(svc.split(',').next().unwrap().to_string()).or_default() += 1;
    }
    for (svc, p) in &summary.latency {
        assert_eq!(counts[svc], p.count);
    }

    let json = fs::read(dir.path().join("summary.json")).unwrap();
    twinsim_core::metrics::write_report(dir.path()).unwrap();
    assert_eq!(json, fs::read(dir.path().join("summary.json")).unwrap(), "report is reproducible");

    fs::write(m.join("latency_samples.csv"), "service,time,latency\nx,1,1\n").unwrap();
    assert!(read_run(dir.path()).is_err(), "tampering breaks the hash");
}
