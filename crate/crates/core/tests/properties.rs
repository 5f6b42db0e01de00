//! Property tests over routing, ordering, storage and numeric kernels.

use proptest::prelude::*;
use std::collections::BTreeMap;
use twinsim_core::autoscaler::{ProvisioningMode, ScalerSettings, ScalerState};
use twinsim_core::definitions::AutoscalePolicy;
use twinsim_core::engine::{EventQueue, Ranked};
use twinsim_core::metrics::{percentiles, SecondIntegrator};
use twinsim_core::routing::{
    header_prefix_matches, EventCategory, EventType, PrefixTable, RoutingKey, TopicPattern, TopicTrie,
};
use twinsim_core::runtime::aqi::{classify_aqi, AqiReading, BreakpointTable};
use twinsim_core::store::{EventStore, RangeQuery};

fn category() -> impl Strategy<Value = EventCategory> {
    prop::sample::select(EventCategory::ALL.to_vec())
}

fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,6}"
}

fn key() -> impl Strategy<Value = RoutingKey> {
    (category(), word(), word(), word()).prop_map(|(c, i, n, cmd)| {
        let cmd = (c == EventCategory::Command).then_some(cmd);
        RoutingKey::new(c, i, n, cmd).unwrap()
    })
}

// Small vocabularies so random patterns actually hit random keys.
fn small_word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["ktwin", "real", "virtual", "a", "b", "c"]).prop_map(String::from)
}

fn pattern() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![3 => small_word(), 1 => Just("*".to_string()), 1 => Just("#".to_string())],
        1..6,
    )
    .prop_map(|v| v.join("."))
}

fn topic() -> impl Strategy<Value = String> {
    prop::collection::vec(small_word(), 1..7).prop_map(|v| v.join("."))
}

#[derive(Debug)]
struct Ev(u8);

impl Ranked for Ev {
    fn rank(&self) -> u8 {
        self.0
    }
}

proptest! {
    #[test]
    fn routing_key_round_trips(k in key()) {
        let text = k.encode();
        prop_assert_eq!(RoutingKey::decode(&text).unwrap(), k.clone());
        let t = k.event_type();
        prop_assert_eq!(EventType::decode(&t.encode()).unwrap(), t.clone());
        prop_assert_eq!(t.with_instance(&k.instance).unwrap(), k);
    }

    #[test]
    fn topic_trie_matches_brute_force(patterns in prop::collection::vec(pattern(), 1..12), keys in prop::collection::vec(topic(), 1..30)) {
        let parsed: Vec<TopicPattern> = patterns.iter().map(|p| TopicPattern::parse(p).unwrap()).collect();
        let mut trie = TopicTrie::new();
        for (i, p) in parsed.iter().enumerate() {
            trie.insert(p, i);
        }
        for k in &keys {
            let brute: Vec<usize> = parsed.iter().enumerate().filter(|(_, p)| p.matches(k)).map(|(i, _)| i).collect();
            prop_assert_eq!(trie.lookup(k), brute, "key {}", k);
        }
    }

    #[test]
    fn prefix_table_matches_brute_force(prefixes in prop::collection::vec(topic(), 1..12), types in prop::collection::vec(topic(), 1..30)) {
        let mut table = PrefixTable::new();
        for (i, p) in prefixes.iter().enumerate() {
            table.insert(p, i);
        }
        for t in &types {
            let brute: Vec<usize> =
                prefixes.iter().enumerate().filter(|(_, p)| header_prefix_matches(p, t)).map(|(i, _)| i).collect();
            prop_assert_eq!(table.lookup(t), brute, "type {}", t);
        }
    }

    #[test]
    fn event_queue_pops_in_time_rank_order(items in prop::collection::vec((0u32..50, 0u8..5), 1..200)) {
        let mut q = EventQueue::new();
        for (t, r) in &items {
            q.schedule(*t as f64 / 4.0, Ev(*r));
        }
        let mut last = (f64::NEG_INFINITY, 0u8);
        let mut n = 0;
        while let Some((t, e)) = q.pop() {
            prop_assert!(t > last.0 || (t == last.0 && e.0 >= last.1));
            prop_assert_eq!(q.now(), t);
            last = (t, e.0);
            n += 1;
        }
        prop_assert_eq!(n, items.len());
    }

    #[test]
    fn store_latest_and_counts_match_brute_force(ops in prop::collection::vec((0usize..3, 0usize..4, 0u32..100), 1..80)) {
        let mut s = EventStore::in_memory();
        let mut brute: BTreeMap<(usize, usize), Vec<(f64, u8)>> = BTreeMap::new();
        for (k, (i, n, t)) in ops.iter().enumerate() {
            let seq = s.append(&format!("if{i}"), &format!("in{n}"), *t as f64, vec![k as u8]).unwrap();
            let log = brute.entry((*i, *n)).or_default();
            let time = log.last().map_or(*t as f64, |(last, _)| last.max(*t as f64));
            log.push((time, k as u8));
            prop_assert_eq!(seq, log.len() as u64);
        }
        for ((i, n), log) in &brute {
            let (iface, inst) = (format!("if{i}"), format!("in{n}"));
            let latest = s.latest(&iface, &inst).unwrap();
            prop_assert_eq!((latest.time, latest.payload[0]), *log.last().unwrap());
            prop_assert_eq!(s.count(&iface, &inst), log.len() as u64);
            let times: Vec<f64> = s
                .range_all(RangeQuery::key(&iface, &inst, 0.0, 100.0, 3))
                .unwrap()
                .iter()
                .map(|e| e.time)
                .collect();
            prop_assert_eq!(times, log.iter().map(|(t, _)| *t).collect::<Vec<_>>());
        }
        prop_assert_eq!(s.stats().appended, ops.len() as u64);
    }

    #[test]
    fn aqi_is_monotone(co2 in 0.0..8000.0f64, co in 0.0..60.0f64, so2 in 0.0..1200.0f64,
                       d in (0.0..500.0f64, 0.0..5.0f64, 0.0..100.0f64)) {
        let t = BreakpointTable::default();
        let lo = classify_aqi(&AqiReading { co2, co, so2 }, &t).unwrap();
        let hi = classify_aqi(&AqiReading { co2: co2 + d.0, co: co + d.1, so2: so2 + d.2 }, &t).unwrap();
        prop_assert!(hi.index >= lo.index);
        prop_assert!(hi.category >= lo.category);
    }

    #[test]
    fn percentiles_are_ordered(v in prop::collection::vec(0.0..10.0f64, 1..300)) {
        let p = percentiles(&v).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= p.p50 && p.p50 <= p.p90 && p.p90 <= p.p95 && p.p95 <= p.p99 && p.p99 <= hi);
        prop_assert_eq!(p.count, v.len());
    }

    #[test]
    fn integrator_preserves_area(steps in prop::collection::vec((0u32..400, 0u32..20), 0..30)) {
        let mut steps = steps;
        steps.sort();
        let mut s = SecondIntegrator::new(0.0);
        let (mut area, mut t0, mut v0) = (0.0, 0.0, 0.0);
        for (t, v) in &steps {
            let t = *t as f64 / 8.0;
            area += v0 * (t - t0);
            s.set(t, *v as f64);
            t0 = t;
            v0 = *v as f64;
        }
        area += v0 * (60.0 - t0);
        let buckets = s.finish(60);
        prop_assert_eq!(buckets.len(), 60);
        let sum: f64 = buckets.iter().sum();
        prop_assert!((sum - area).abs() < 1e-6, "{} vs {}", sum, area);
    }

    #[test]
    fn scaler_never_exceeds_max(arrivals in prop::collection::vec((0u32..600, 1u32..30), 1..60), max in 1u32..8) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let policy = AutoscalePolicy { target: 2, min_replicas: 0, max_replicas: max };
        let mut s: ScalerState<u32> = ScalerState::new("svc", policy, ProvisioningMode::Auto, ScalerSettings::default(), 0.1, 1, 0.0);
        let mut arrivals = arrivals;
        arrivals.sort();
        let mut next_tick = 0.0;
        for (t, burst) in arrivals {
            let t = t as f64 / 4.0;
            while next_tick <= t {
                s.tick(next_tick, &mut rng);
                prop_assert!(s.replicas().len() as u32 <= max);
                next_tick += 2.0;
            }
            for w in 0..burst {
                s.admit(w, t, &mut rng);
                prop_assert!(s.replicas().len() as u32 <= max);
            }
        }
        prop_assert!(s.max_replicas_seen() <= max);
    }
}
