//! Scenario configuration.

use crate::autoscaler::{ScalerSettings, UsageCurve};
use crate::runtime::RuntimeSettings;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
}

/// Publish interval: fixed seconds or a range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntervalSpec {
    Fixed(f64),
    Range { min: f64, max: f64 },
}

impl IntervalSpec {
    fn valid(&self) -> bool {
        match *self {
            IntervalSpec::Fixed(v) => v > 0.0 && v.is_finite(),
            IntervalSpec::Range { min, max } => min > 0.0 && max >= min && max.is_finite(),
        }
    }

    /// Mean publish rate implied by the spec, ignoring jitter (events/s).
    pub fn nominal_rate(&self) -> f64 {
        match *self {
            IntervalSpec::Fixed(v) => 1.0 / v,
            IntervalSpec::Range { min, max } => 0.5 * (1.0 / min + 1.0 / max),
        }
    }
}

/// Replica provisioning of all services. Written as `auto`, `under`,
/// `over` or `{fixed: {per_service: n, store: m}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProvisioningRepr", into = "ProvisioningRepr")]
pub enum Provisioning {
    /// Concurrency autoscaling with each service's policy.
    Auto,
    /// Fixed replicas per twin service and for the event store.
    Fixed { per_service: u32, store: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedRepr {
    per_service: u32,
    store: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ProvisioningRepr {
    Name(String),
    Fixed { fixed: FixedRepr },
}

impl TryFrom<ProvisioningRepr> for Provisioning {
    type Error = String;
    fn try_from(r: ProvisioningRepr) -> Result<Self, String> {
        match r {
            ProvisioningRepr::Fixed { fixed } => Ok(Provisioning::Fixed { per_service: fixed.per_service, store: fixed.store }),
            ProvisioningRepr::Name(n) => Provisioning::from_name(&n).ok_or_else(|| format!("unknown provisioning `{n}`")),
        }
    }
}

impl From<Provisioning> for ProvisioningRepr {
    fn from(p: Provisioning) -> Self {
        match p {
            Provisioning::Auto => ProvisioningRepr::Name("auto".into()),
            Provisioning::Fixed { per_service, store } => ProvisioningRepr::Fixed { fixed: FixedRepr { per_service, store } },
        }
    }
}

impl Provisioning {
    /// 1 per service + 3 store.
    pub const UNDER: Provisioning = Provisioning::Fixed { per_service: 1, store: 3 };
    /// 14 per service + 20 store.
    pub const OVER: Provisioning = Provisioning::Fixed { per_service: 14, store: 20 };

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "auto" => Some(Provisioning::Auto),
            "under" => Some(Provisioning::UNDER),
            "over" => Some(Provisioning::OVER),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Provisioning::Auto => "auto".into(),
            Provisioning::Fixed { per_service, store } => format!("fixed-{per_service}-{store}"),
        }
    }
}

/// Lognormal service time, parameterized by its median (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTime {
    pub median: f64,
    pub sigma: f64,
}

impl Default for ServiceTime {
    fn default() -> Self {
        ServiceTime { median: 0.005, sigma: 0.5 }
    }
}

/// How dispatcher capacity is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispatcherLanes {
    /// One lane of `dispatcher_rate` per interface bound to the dispatcher.
    #[default]
    PerInterface,
    /// A single lane of `dispatcher_rate` per dispatcher.
    Single,
}

/// Event store replica policy and pod size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoreServiceConfig {
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub target: u32,
    pub cpu: f64,
    pub memory: u64,
}

impl Default for StoreServiceConfig {
    fn default() -> Self {
        StoreServiceConfig {
            min_replicas: 1,
            max_replicas: 25,
            target: 5,
            cpu: crate::definitions::DEFAULT_POD_CPU,
            memory: crate::definitions::DEFAULT_POD_MEMORY,
        }
    }
}

/// Overrides applied to every twin service's autoscale policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoscaleOverrides {
    pub target: Option<u32>,
    pub min_replicas: Option<u32>,
    pub max_replicas: Option<u32>,
}

pub const INTERFACE_AIR_QUALITY: &str = "ngsi-ld-city-airqualityobserved";
pub const INTERFACE_NOISE: &str = "ngsi-ld-city-noiselevelobserved";
pub const INTERFACE_WEATHER: &str = "ngsi-ld-city-weatherobserved";
pub const INTERFACE_CROWD: &str = "ngsi-ld-city-crowdflowobserved";
pub const INTERFACE_TRAFFIC: &str = "ngsi-ld-city-trafficflowobserved";
pub const INTERFACE_STREETLIGHT: &str = "ngsi-ld-city-streetlight";
pub const INTERFACE_EV: &str = "ngsi-ld-city-evchargingstation";
pub const INTERFACE_PARKING_SPOT: &str = "ngsi-ld-city-parkingspot";
pub const INTERFACE_OFFSTREET: &str = "ngsi-ld-city-offstreetparking";
pub const INTERFACE_DEVICE: &str = "ngsi-ld-city-device";
pub const INTERFACE_POLE: &str = "city-pole";
pub const INTERFACE_NEIGHBORHOOD: &str = "s4city-city-neighborhood";

/// Default publish interval of each device-emitting interface.
pub fn default_intervals() -> BTreeMap<String, IntervalSpec> {
    use IntervalSpec::*;
    [
        (INTERFACE_AIR_QUALITY, Fixed(10.0)),
        (INTERFACE_NOISE, Fixed(10.0)),
        (INTERFACE_WEATHER, Fixed(10.0)),
        (INTERFACE_CROWD, Range { min: 5.0, max: 30.0 }),
        (INTERFACE_TRAFFIC, Range { min: 5.0, max: 10.0 }),
        (INTERFACE_STREETLIGHT, Fixed(720.0)),
        (INTERFACE_EV, Range { min: 10.0, max: 80.0 }),
        (INTERFACE_PARKING_SPOT, Range { min: 5.0, max: 80.0 }),
        (INTERFACE_DEVICE, Fixed(460.0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// A full simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub neighborhoods: u32,
    /// Simulated seconds.
    pub duration: f64,
    /// Window lengths; must sum to `duration`.
    pub windows: Vec<f64>,
    /// Simulated-to-real time factor; informational.
    pub compression: f64,
    pub seed: u64,
    pub provisioning: Provisioning,
    pub intervals: BTreeMap<String, IntervalSpec>,
    /// Explicit per-window intervals: interface -> window index -> spec.
    pub window_intervals: BTreeMap<String, BTreeMap<usize, IntervalSpec>>,
    /// Divides every publish interval.
    pub rate_multiplier: f64,
    /// Devices stop publishing at this time.
    pub workload_cutoff: Option<f64>,
    pub service_time: ServiceTime,
    pub store_service_time: ServiceTime,
    /// Envelopes per simulated second per dispatcher lane.
    pub dispatcher_rate: f64,
    pub dispatcher_lanes: DispatcherLanes,
    pub scaler: ScalerSettings,
    pub autoscale: AutoscaleOverrides,
    pub store_service: StoreServiceConfig,
    pub runtime: RuntimeSettings,
    pub cpu_usage: UsageCurve,
    pub memory_usage: UsageCurve,
    /// Keep full event history in memory (otherwise latest state only).
    pub retain_history: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            neighborhoods: 1,
            duration: 1440.0,
            windows: vec![240.0; 6],
            compression: 60.0,
            seed: 0,
            provisioning: Provisioning::Auto,
            intervals: default_intervals(),
            window_intervals: BTreeMap::new(),
            rate_multiplier: 1.0,
            workload_cutoff: None,
            service_time: ServiceTime::default(),
            store_service_time: ServiceTime::default(),
            dispatcher_rate: 350.0,
            dispatcher_lanes: DispatcherLanes::default(),
            scaler: ScalerSettings::default(),
            autoscale: AutoscaleOverrides::default(),
            store_service: StoreServiceConfig::default(),
            runtime: RuntimeSettings::default(),
            cpu_usage: UsageCurve::default(),
            memory_usage: UsageCurve::default(),
            retain_history: false,
        }
    }
}

impl ScenarioConfig {
    pub fn city(neighborhoods: u32, seed: u64, provisioning: Provisioning) -> Self {
        ScenarioConfig { neighborhoods, seed, provisioning, ..Default::default() }
    }

    /// Parses YAML (JSON is a subset).
    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        let c: ScenarioConfig = serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.neighborhoods < 1 {
            return bad("neighborhoods must be at least 1".into());
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be a finite non-negative number", self.duration));
        }
        if (self.windows.is_empty() || self.windows.iter().any(|w| !(*w > 0.0))) && self.duration > 0.0 {
            return bad("windows must be positive".into());
        }
        let total: f64 = self.windows.iter().sum();
        if self.duration > 0.0 && (total - self.duration).abs() > 1e-9 {
            return bad(format!("window lengths sum to {total}, duration is {}", self.duration));
        }
        for (k, v) in &self.intervals {
            if !v.valid() {
                return bad(format!("interval of `{k}` must be positive"));
            }
        }
        for (k, m) in &self.window_intervals {
            for (w, v) in m {
                if *w >= self.windows.len() {
                    return bad(format!("window {w} of `{k}` does not exist"));
                }
                if !v.valid() {
                    return bad(format!("interval of `{k}` in window {w} must be positive"));
                }
            }
        }
        if !(self.rate_multiplier > 0.0) {
            return bad("rate_multiplier must be positive".into());
        }
        if !(self.dispatcher_rate > 0.0) {
            return bad("dispatcher_rate must be positive".into());
        }
        for st in [self.service_time, self.store_service_time] {
            if !(st.median > 0.0) || !(st.sigma >= 0.0) {
                return bad("service time median must be positive and sigma non-negative".into());
            }
        }
        let s = &self.scaler;
        if !(s.tick > 0.0) || !(s.stable_window > 0.0) || s.idle_window < 0.0 {
            return bad("scaler tick and windows must be positive".into());
        }
        if !(s.cold_start_min >= 0.0) || s.cold_start_max < s.cold_start_min {
            return bad("cold start range is invalid".into());
        }
        let st = &self.store_service;
        if st.target == 0 || st.max_replicas == 0 || st.min_replicas > st.max_replicas {
            return bad("event store policy is invalid".into());
        }
        if let Some(0) = self.autoscale.target {
            return bad("autoscale target must be at least 1".into());
        }
        Ok(())
    }

    /// Window index containing time `t` (the last window for t >= duration).
    pub fn window_at(&self, t: f64) -> usize {
        let mut end = 0.0;
        for (i, w) in self.windows.iter().enumerate() {
            end += w;
            if t < end {
                return i;
            }
        }
        self.windows.len().saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.window_at(0.0), 0);
        assert_eq!(c.window_at(239.9), 0);
        assert_eq!(c.window_at(240.0), 1);
        assert_eq!(c.window_at(5000.0), 5);
    }

    #[test]
    fn yaml_round_trip_and_rejections() {
        let c = ScenarioConfig::city(5, 9, Provisioning::OVER);
        let text = serde_yaml::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::from_yaml(&text).unwrap(), c);
        assert!(ScenarioConfig::from_yaml("neighborhoods: 0").is_err());
        assert!(ScenarioConfig::from_yaml("duration: 100").is_err());
        assert!(ScenarioConfig::from_yaml("bogus: 1").is_err());
        let p = ScenarioConfig::from_yaml("provisioning: {fixed: {per_service: 1, store: 3}}").unwrap();
        assert_eq!(p.provisioning, Provisioning::UNDER);
        assert_eq!(ScenarioConfig::from_yaml("provisioning: over").unwrap().provisioning, Provisioning::OVER);
        assert!(ScenarioConfig::from_yaml("provisioning: sideways").is_err());
    }
}
