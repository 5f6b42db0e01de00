//! Independent oracles for the numeric handlers and store queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use twinsim_core::engine::{run_with_store, Provisioning, ScenarioConfig};
use twinsim_core::engine::config::{INTERFACE_AIR_QUALITY, INTERFACE_NEIGHBORHOOD, INTERFACE_OFFSTREET};
use twinsim_core::runtime::aqi::{classify_aqi, AqiCategory, AqiReading, BreakpointTable};
use twinsim_core::runtime::weather::dew_point;
use twinsim_core::store::{EventStore, RangeQuery, StoredEvent};

mod common;
use common::{aqi_oracle, category_oracle, magnus_oracle};

#[test]
fn dew_point_matches_magnus_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let t = rng.random_range(-40.0..50.0);
        let rh = rng.random_range(1.0..=100.0);
        let got = dew_point(t, rh).unwrap();
        let want = magnus_oracle(t, rh);
        assert!((got - want).abs() <= 1e-9, "T={t} RH={rh}: {got} vs {want}");
    }
    assert_eq!(dew_point(20.0, 0.0), None);
}

#[test]
fn classify_aqi_matches_interpolation_oracle() {
    let table = BreakpointTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let check = |co2: i64, co: i64, so2: i64, frac: f64| {
        let reading = AqiReading { co2: co2 as f64 + frac, co: (co as f64 + frac) / 10.0, so2: so2 as f64 + frac };
        let got = classify_aqi(&reading, &table).unwrap();
        let want = aqi_oracle(co2, co, so2);
        assert_eq!(got.index as i64, want, "{reading:?}");
        assert_eq!(got.category.label(), category_oracle(want));
    };
    // Every integer unit of every table, the others at zero.
    for c in 0..=45000 {
        check(c, 0, 0, 0.0);
    }
    for c in 0..=600 {
        check(0, c, 0, 0.0);
        check(0, 0, c * 2, 0.0);
    }
    for _ in 0..20000 {
        let frac = rng.random_range(0.0..0.9);
        check(rng.random_range(0..6000), rng.random_range(0..520), rng.random_range(0..1100), frac);
    }
}

#[test]
fn classify_aqi_monotone_pairs() {
    let table = BreakpointTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let a = AqiReading { co2: rng.random_range(0.0..6000.0), co: rng.random_range(0.0..50.0), so2: rng.random_range(0.0..1000.0) };
        let b = AqiReading {
            co2: a.co2 + rng.random_range(0.0..500.0),
            co: a.co + rng.random_range(0.0..5.0),
            so2: a.so2 + rng.random_range(0.0..100.0),
        };
        let (ra, rb) = (classify_aqi(&a, &table).unwrap(), classify_aqi(&b, &table).unwrap());
        assert!(rb.index >= ra.index && rb.category >= ra.category, "{a:?} -> {b:?}");
    }
}

fn city_run(seed: u64) -> EventStore {
    let config = ScenarioConfig { duration: 240.0, windows: vec![240.0], retain_history: true, ..ScenarioConfig::city(1, seed, Provisioning::Auto) };
    run_with_store(&config, EventStore::in_memory()).unwrap().1
}

fn json(e: &StoredEvent) -> Value {
    serde_json::from_slice(&e.payload).unwrap()
}

fn history(store: &EventStore, iface: &str) -> Vec<StoredEvent> {
    store
        .range_all(RangeQuery { interface: iface.into(), instance: None, from: 0.0, to: f64::INFINITY, limit: 500, token: None })
        .unwrap()
}

#[test]
fn stored_city_state_agrees_with_oracles() {
    let store = city_run(4);

    let air = history(&store, INTERFACE_AIR_QUALITY);
    assert!(air.len() > 1000);
    for e in &air {
        let v = json(e);
        let f = |k: &str| v[k].as_f64().unwrap();
        // Densities are truncated to whole units (tenths for CO) before lookup.
        let want = aqi_oracle(f("co2").floor() as i64, (f("co") * 10.0 + 1e-9).floor() as i64, f("so2").floor() as i64);
        assert_eq!(v["airQualityIndex"].as_i64().unwrap(), want, "{v}");
        assert_eq!(v["airQualityLevel"], category_oracle(want));
    }

    let hoods = history(&store, INTERFACE_NEIGHBORHOOD);
    assert!(!hoods.is_empty());
    for e in &hoods {
        let v = json(e);
        let reports = v["reports"].as_object().unwrap();
        let max = reports.values().map(|r| r["index"].as_i64().unwrap()).max().unwrap_or(0);
        assert_eq!(v["airQualityIndex"].as_i64().unwrap(), max);
        let times: Vec<f64> = reports.values().map(|r| r["time"].as_f64().unwrap()).collect();
        let (lo, hi) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        assert!(hi - lo <= 60.0 + 1e-9, "reports span {lo}..{hi}");
        assert_eq!(v["warning"].as_bool().unwrap(), max > 150);
        assert_eq!(AqiCategory::from_label(v["airQualityLevel"].as_str().unwrap()).unwrap(), AqiCategory::from_index(max as u32));
    }

    let parking = history(&store, INTERFACE_OFFSTREET);
    assert!(!parking.is_empty());
    for e in &parking {
        let v = json(e);
        let spots = v["spots"].as_object().unwrap();
        let count = |s: &str| spots.values().filter(|x| *x == s).count() as i64;
        let total = v["totalSpotNumber"].as_i64().unwrap();
        assert_eq!(v["occupiedSpotNumber"].as_i64().unwrap(), count("occupied"));
        assert_eq!(v["closedSpotNumber"].as_i64().unwrap(), count("closed"));
        assert_eq!(v["availableSpotNumber"].as_i64().unwrap(), (total - count("occupied") - count("closed")).max(0));
        // Replicas read state concurrently, so updates may be lost but never invented.
        assert!(spots.len() as i64 <= total);
        assert!(spots.keys().all(|k| k.starts_with("parkingspot-")));
    }
}

#[test]
fn interface_queries_are_the_ordered_union_of_key_queries() {
    let store = city_run(5);
    let all = history(&store, INTERFACE_AIR_QUALITY);
    let mut union = Vec::new();
    for (iface, inst) in store.keys().filter(|(i, _)| *i == INTERFACE_AIR_QUALITY) {
        union.extend(store.range_all(RangeQuery::key(iface, inst, 0.0, f64::INFINITY, 7)).unwrap());
    }
    union.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.instance.cmp(&b.instance)).then(a.sequence.cmp(&b.sequence)));
    assert_eq!(all, union);
    for limit in [1, 13, 1000] {
        let q = RangeQuery { interface: INTERFACE_AIR_QUALITY.into(), instance: None, from: 30.0, to: 90.0, limit, token: None };
        let paged = store.range_all(q.clone()).unwrap();
        let want: Vec<_> = all.iter().filter(|e| (30.0..=90.0).contains(&e.time)).cloned().collect();
        assert_eq!(paged, want, "limit {limit}");
    }
}
