//! Smart city device workload: publish schedules and synthetic payloads.

use super::config::*;
use crate::definitions::TwinGraph;
use crate::routing::{EventCategory, RoutingKey};
use crate::runtime::SpotStatus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Independent RNG stream for `label` under `seed`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    AirQuality,
    Noise,
    Weather,
    Crowd,
    Traffic,
    Streetlight,
    EvCharger,
    ParkingSpot,
    Battery,
}

impl DeviceKind {
    pub fn of(interface: &str) -> Option<Self> {
        Some(match interface {
            INTERFACE_AIR_QUALITY => DeviceKind::AirQuality,
            INTERFACE_NOISE => DeviceKind::Noise,
            INTERFACE_WEATHER => DeviceKind::Weather,
            INTERFACE_CROWD => DeviceKind::Crowd,
            INTERFACE_TRAFFIC => DeviceKind::Traffic,
            INTERFACE_STREETLIGHT => DeviceKind::Streetlight,
            INTERFACE_EV => DeviceKind::EvCharger,
            INTERFACE_PARKING_SPOT => DeviceKind::ParkingSpot,
            INTERFACE_DEVICE => DeviceKind::Battery,
            _ => return None,
        })
    }
}

/// Which part of a ranged interval a window draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPhase {
    /// Night: slow end.
    Slow,
    /// Morning and evening peaks: fast end.
    Fast,
    /// In between: around the harmonic midpoint.
    Middle,
}

/// Phase of window `w` out of `count`, mapped onto a six-window day.
pub fn window_phase(w: usize, count: usize) -> WindowPhase {
    let six = (w * 6).checked_div(count).unwrap_or(0);
    match six {
        0 | 5 => WindowPhase::Slow,
        2 | 4 => WindowPhase::Fast,
        _ => WindowPhase::Middle,
    }
}

/// Sub-range a ranged interval draws from in a given phase.
pub fn phase_range(min: f64, max: f64, phase: WindowPhase) -> (f64, f64) {
    match phase {
        WindowPhase::Slow => ((0.9 * max).max(min), max),
        WindowPhase::Fast => (min, (1.1 * min).min(max)),
        WindowPhase::Middle => {
            let m = 2.0 / (1.0 / min + 1.0 / max);
            ((0.9 * m).max(min), (1.1 * m).min(max))
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Fixed intervals are jittered by ±10 %; default ranges use the window's
/// sub-range, explicit per-window ranges their full extent.
pub fn sample_interval<R: Rng + ?Sized>(spec: IntervalSpec, phase: Option<WindowPhase>, rng: &mut R) -> f64 {
    match spec {
        IntervalSpec::Fixed(v) => uniform(rng, 0.9 * v, 1.1 * v),
        IntervalSpec::Range { min, max } => {
            let (lo, hi) = match phase {
                Some(p) => phase_range(min, max, p),
                None => (min, max),
            };
            uniform(rng, lo, hi)
        }
    }
}

/// One publishing twin instance.
#[derive(Debug, Clone)]
pub struct Publisher {
    pub instance: String,
    pub interface: String,
    pub topic: String,
    pub kind: DeviceKind,
    rng: ChaCha8Rng,
    battery: f64,
    phase: f64,
    spot: SpotStatus,
}

/// Counts of generated publishes.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneratedStats {
    pub total: u64,
    pub by_interface: BTreeMap<String, u64>,
    pub battery_samples: u64,
    /// Battery samples below the low-battery threshold.
    pub battery_low: u64,
}

/// All publishers of a city and their schedules.
#[derive(Debug, Clone)]
pub struct Workload {
    publishers: Vec<Publisher>,
    intervals: BTreeMap<String, IntervalSpec>,
    window_intervals: BTreeMap<String, BTreeMap<usize, IntervalSpec>>,
    config: ScenarioConfig,
    pub stats: GeneratedStats,
}

impl Workload {
    /// Publishers for every instance of an interface with a schedule.
    pub fn new(config: &ScenarioConfig, graph: &TwinGraph) -> Self {
        let mut publishers = Vec::new();
        for inst in graph.instances() {
            if !config.intervals.contains_key(&inst.interface) {
                continue;
            }
            let Some(kind) = DeviceKind::of(&inst.interface) else { continue };
            let Ok(key) = RoutingKey::new(EventCategory::Real, &inst.interface, &inst.name, None) else { continue };
            let mut rng = stream(config.seed, &inst.name);
            let battery = round2(uniform(&mut rng, 5.0, 100.0));
            let phase = uniform(&mut rng, 0.0, 2.0 * PI);
            publishers.push(Publisher {
                instance: inst.name.clone(),
                interface: inst.interface.clone(),
                topic: key.encode(),
                kind,
                rng,
                battery,
                phase,
                spot: SpotStatus::Free,
            });
        }
        Workload {
            publishers,
            intervals: config.intervals.clone(),
            window_intervals: config.window_intervals.clone(),
            config: config.clone(),
            stats: GeneratedStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.publishers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publishers.is_empty()
    }

    pub fn publisher(&self, i: usize) -> &Publisher {
        &self.publishers[i]
    }

    fn horizon(&self) -> f64 {
        match self.config.workload_cutoff {
            Some(c) => c.min(self.config.duration),
            None => self.config.duration,
        }
    }

    /// First publish time of every publisher (all at t = 0).
    pub fn first_publish(&self, _i: usize) -> Option<f64> {
        (0.0 < self.horizon()).then_some(0.0)
    }

    /// Next publish time after a publish at `now`, if before the horizon.
    pub fn next_publish(&mut self, i: usize, now: f64) -> Option<f64> {
        let w = self.config.window_at(now);
        let p = &mut self.publishers[i];
        let explicit = self.window_intervals.get(&p.interface).and_then(|m| m.get(&w)).copied();
        let interval = match explicit {
            Some(spec) => sample_interval(spec, None, &mut p.rng),
            None => {
                let spec = self.intervals[&p.interface];
                sample_interval(spec, Some(window_phase(w, self.config.windows.len())), &mut p.rng)
            }
        } / self.config.rate_multiplier;
        let next = now + interval;
        (next < self.horizon()).then_some(next)
    }

    /// Produces the payload of publisher `i` at `now` and counts it.
    pub fn emit(&mut self, i: usize, now: f64) -> (String, Vec<u8>) {
        let hours = now * self.config.compression / 3600.0;
        let threshold = self.config.runtime.battery_threshold;
        let p = &mut self.publishers[i];
        // The reported level is the one before this publish drains it.
        let low = p.battery < threshold;
        let payload = payload(p, hours);
        self.stats.total += 1;
        *self.stats.by_interface.entry(p.interface.clone()).or_default() += 1;
        if p.kind == DeviceKind::Battery {
            self.stats.battery_samples += 1;
            if low {
                self.stats.battery_low += 1;
            }
        }
        (p.topic.clone(), serde_json::to_vec(&payload).expect("json serializes"))
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Daylight factor in [0, 1], peaking mid-afternoon.
fn diurnal(hours: f64) -> f64 {
    0.5 + 0.5 * (2.0 * PI * (hours - 9.0) / 24.0).sin()
}

fn payload(p: &mut Publisher, hours: f64) -> serde_json::Value {
    let r = &mut p.rng;
    match p.kind {
        DeviceKind::AirQuality => {
            let spike = r.random_bool(0.03);
            let co2 = if spike { uniform(r, 1000.0, 2000.0) } else { uniform(r, 380.0, 900.0) };
            let co = if spike { uniform(r, 9.5, 14.0) } else { uniform(r, 0.1, 6.0) };
            let so2 = if r.random_bool(0.02) { uniform(r, 80.0, 200.0) } else { uniform(r, 0.0, 40.0) };
            json!({"co2": round2(co2), "co": round2(co), "so2": round2(so2)})
        }
        DeviceKind::Noise => json!({"LAeq": round2(45.0 + 25.0 * diurnal(hours) + uniform(r, -5.0, 5.0))}),
        DeviceKind::Weather => {
            let d = diurnal(hours);
            let temperature = 8.0 + 16.0 * d + 3.0 * p.phase.sin() + uniform(r, -0.5, 0.5);
            let humidity = (90.0 - 45.0 * d + uniform(r, -5.0, 5.0)).clamp(5.0, 100.0);
            let pressure = 1013.0 + 4.0 * (2.0 * PI * hours / 24.0 + p.phase).sin() + uniform(r, -0.2, 0.2);
            json!({
                "temperature": round2(temperature),
                "relativeHumidity": round2(humidity),
                "atmosphericPressure": round2(pressure),
                "precipitation": if humidity > 85.0 { round2(uniform(r, 0.0, 3.0)) } else { 0.0 },
                "snowHeight": 0.0,
                "windDirection": round2(uniform(r, 0.0, 360.0)),
                "windSpeed": round2(uniform(r, 0.0, 25.0)),
            })
        }
        DeviceKind::Crowd => {
            let people = (150.0 * diurnal(hours) * uniform(r, 0.5, 1.2)).round() as i64;
            json!({
                "peopleCount": people,
                "averageCrowdSpeed": round2(uniform(r, 0.5, 1.5)),
                "congested": people > 120,
            })
        }
        DeviceKind::Traffic => json!({
            "intensity": round2(100.0 * diurnal(hours) * uniform(r, 0.3, 1.0)),
            "averageVehicleSpeed": round2(uniform(r, 10.0, 70.0)),
            "averageHeadwayTime": round2(uniform(r, 1.0, 10.0)),
        }),
        DeviceKind::Streetlight => {
            let day = hours % 24.0;
            json!({"powerState": if !(7.0..19.0).contains(&day) { "on" } else { "off" }})
        }
        DeviceKind::EvCharger => {
            let u: f64 = r.random();
            let status = if u < 0.9 {
                "working"
            } else if u < 0.97 {
                "withIncidences"
            } else {
                "outOfService"
            };
            json!({"status": status})
        }
        DeviceKind::ParkingSpot => {
            let u: f64 = r.random();
            p.spot = match p.spot {
                _ if u < 0.02 => SpotStatus::Closed,
                SpotStatus::Free if u < 0.55 => SpotStatus::Occupied,
                SpotStatus::Occupied if u < 0.45 => SpotStatus::Free,
                SpotStatus::Closed if u < 0.5 => SpotStatus::Free,
                s => s,
            };
            json!({"status": p.spot})
        }
        DeviceKind::Battery => {
            let level = round2(p.battery);
            p.battery -= uniform(r, 0.5, 4.0);
            if p.battery < 2.0 {
                p.battery = 100.0;
            }
            p.battery = round2(p.battery);
            json!({"batteryLevel": level})
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn phases_follow_the_day() {
        let p: Vec<WindowPhase> = (0..6).map(|w| window_phase(w, 6)).collect();
        use WindowPhase::*;
        assert_eq!(p, vec![Slow, Middle, Fast, Middle, Fast, Slow]);
        assert_eq!(phase_range(5.0, 10.0, Slow), (9.0, 10.0));
        assert_eq!(phase_range(5.0, 10.0, Fast), (5.0, 5.5));
    }

    #[test]
    fn intervals_stay_in_bounds() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let f = sample_interval(IntervalSpec::Fixed(10.0), None, &mut r);
            assert!((9.0..=11.0).contains(&f));
            let g = sample_interval(IntervalSpec::Range { min: 5.0, max: 80.0 }, Some(WindowPhase::Middle), &mut r);
            assert!((5.0..=80.0).contains(&g));
        }
    }

    #[test]
    fn streams_differ_by_label() {
        let a: u64 = stream(1, "a").random();
        let b: u64 = stream(1, "b").random();
        assert_ne!(a, b);
        assert_eq!(a, stream(1, "a").random::<u64>());
    }
}
