//! Built-in smart city handlers.

use super::aqi::{classify_aqi, AqiCategory, AqiReading, BreakpointTable};
use super::weather::{enrich_weather, FeelsLikeModel, WeatherReading};
use super::{HandlerContext, HandlerError, IncomingEvent, TwinHandler};
use crate::routing::EventCategory;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

pub const UPDATE_AQI: &str = "updateairqualityindex";
pub const UPDATE_VEHICLE_COUNT: &str = "updatevehiclecount";

/// Tunables of the built-in handlers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSettings {
    /// Seconds a pole report counts toward the neighborhood index.
    pub neighborhood_window: f64,
    /// Battery percentage below which devices are told to save power.
    pub battery_threshold: f64,
    /// Simulated seconds to real seconds (1 s simulated = 1 min).
    pub time_compression: f64,
    pub feels_like: FeelsLikeModel,
}

impl Default for RuntimeSettings {
    fn default() -> Self {
        RuntimeSettings { neighborhood_window: 60.0, battery_threshold: 20.0, time_compression: 60.0, feels_like: FeelsLikeModel::default() }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(payload: &[u8]) -> Result<T, HandlerError> {
    serde_json::from_slice(payload).map_err(|e| HandlerError::BadPayload(e.to_string()))
}

fn object(payload: &[u8]) -> Result<Map<String, Value>, HandlerError> {
    match serde_json::from_slice(payload) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(HandlerError::BadPayload("expected a JSON object".into())),
        Err(e) => Err(HandlerError::BadPayload(e.to_string())),
    }
}

fn bytes(v: Value) -> Vec<u8> {
    serde_json::to_vec(&v).expect("json serializes")
}

fn expect(event: &IncomingEvent<'_>, category: EventCategory, command: Option<&str>) -> Result<(), HandlerError> {
    if event.key.category == category && event.key.command.as_deref() == command {
        Ok(())
    } else {
        Err(HandlerError::Unexpected(event.key.to_string()))
    }
}

/// Classifies air quality, stores it and informs the related pole.
#[derive(Debug, Clone, Default)]
pub struct AirQualityHandler {
    pub breakpoints: BreakpointTable<f64>,
}

impl TwinHandler for AirQualityHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Real, None)?;
        let reading: AqiReading<f64> = parse(event.payload)?;
        let r = classify_aqi(&reading, &self.breakpoints).map_err(|e| HandlerError::OutOfRange(e.to_string()))?;
        let mut state = object(event.payload)?;
        state.insert("airQualityIndex".into(), json!(r.index));
        state.insert("airQualityLevel".into(), json!(r.category.label()));
        state.insert("clamped".into(), json!(r.clamped));
        ctx.emit_store(bytes(Value::Object(state)));
        let cmd = json!({"source": ctx.instance(), "airQualityIndex": r.index, "airQualityLevel": r.category.label()});
        ctx.emit_command("refPole", UPDATE_AQI, bytes(cmd))?;
        Ok(())
    }
}

/// Forwards a pole's AQI update to its neighborhood.
#[derive(Debug, Clone, Copy, Default)]
pub struct PoleRelayHandler;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct AqiUpdate {
    air_quality_index: u32,
}

impl TwinHandler for PoleRelayHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Command, Some(UPDATE_AQI))?;
        let u: AqiUpdate = parse(event.payload)?;
        let level = AqiCategory::from_index(u.air_quality_index);
        let cmd = json!({"pole": ctx.instance(), "airQualityIndex": u.air_quality_index, "airQualityLevel": level.label()});
        ctx.emit_command("refNeighborhood", UPDATE_AQI, bytes(cmd))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    pub index: u32,
    pub time: f64,
}

/// Maximum index among reports no older than `window` at `now`.
pub fn in_window_max(reports: &BTreeMap<String, PoleReport>, now: f64, window: f64) -> Option<u32> {
    reports.values().filter(|r| now - r.time <= window).map(|r| r.index).max()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NeighborhoodState {
    #[serde(default)]
    reports: BTreeMap<String, PoleReport>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PoleUpdate {
    pole: String,
    air_quality_index: u32,
}

/// Keeps the worst recent AQI reported by the neighborhood's poles.
#[derive(Debug, Clone, Copy)]
pub struct NeighborhoodHandler {
    pub window: f64,
}

impl TwinHandler for NeighborhoodHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Command, Some(UPDATE_AQI))?;
        let u: PoleUpdate = parse(event.payload)?;
        let mut state: NeighborhoodState = match ctx.latest_own() {
            Some(e) => serde_json::from_slice(&e.payload).unwrap_or_default(),
            None => NeighborhoodState::default(),
        };
        let now = event.time;
        state.reports.retain(|_, r| now - r.time <= self.window);
        let fresh = state.reports.get(&u.pole).is_none_or(|r| r.time <= now);
        if fresh {
            state.reports.insert(u.pole, PoleReport { index: u.air_quality_index, time: now });
        }
        let index = in_window_max(&state.reports, now, self.window).unwrap_or(0);
        let level = AqiCategory::from_index(index);
        let out = json!({
            "reports": state.reports,
            "airQualityIndex": index,
            "airQualityLevel": level.label(),
            "warning": level >= AqiCategory::Unhealthy,
        });
        ctx.emit_store(bytes(out));
        Ok(())
    }
}

/// Enriches weather observations; keeps recent pressure samples in state.
#[derive(Debug, Clone, Copy)]
pub struct WeatherHandler {
    pub compression: f64,
    pub feels_like: FeelsLikeModel,
}

impl TwinHandler for WeatherHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Real, None)?;
        let reading: WeatherReading<f64> = parse(event.payload)?;
        if !(0.0..=100.0).contains(&reading.relative_humidity) {
            return Err(HandlerError::OutOfRange(format!("humidity {}", reading.relative_humidity)));
        }
        if !(reading.atmospheric_pressure > 0.0) {
            return Err(HandlerError::OutOfRange(format!("pressure {}", reading.atmospheric_pressure)));
        }
        let now_hours = event.time * self.compression / 3600.0;
        let mut samples: Vec<(f64, f64)> = ctx
            .latest_own()
            .and_then(|e| serde_json::from_slice::<Value>(&e.payload).ok())
            .and_then(|v| serde_json::from_value(v.get("pressureSamples")?.clone()).ok())
            .unwrap_or_default();
        samples.retain(|(t, _)| *t >= now_hours - super::weather::TENDENCY_HOURS && *t <= now_hours);
        let e = enrich_weather(&reading, &samples, now_hours, self.feels_like);
        samples.push((now_hours, reading.atmospheric_pressure));
        let mut state = object(event.payload)?;
        state.insert("dewPoint".into(), json!(e.dew_point));
        state.insert("feelsLikeTemperature".into(), json!(e.feels_like_temperature));
        state.insert("pressureTendency".into(), json!(e.pressure_tendency));
        state.insert("pressureSamples".into(), json!(samples));
        ctx.emit_store(bytes(Value::Object(state)));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpotStatus {
    Free,
    Occupied,
    Closed,
}

#[derive(Deserialize)]
struct SpotEvent {
    status: SpotStatus,
}

/// Reports spot status changes to the off-street parking.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParkingSpotHandler;

impl TwinHandler for ParkingSpotHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Real, None)?;
        let s: SpotEvent = parse(event.payload)?;
        let cmd = json!({"spot": ctx.instance(), "status": s.status});
        ctx.emit_command("refOffStreetParking", UPDATE_VEHICLE_COUNT, bytes(cmd))?;
        Ok(())
    }
}

/// `total - occupied - closed`, floored at zero.
pub fn available_spots<'a>(total: u64, statuses: impl IntoIterator<Item = &'a SpotStatus>) -> u64 {
    let taken = statuses.into_iter().filter(|s| **s != SpotStatus::Free).count() as u64;
    total.saturating_sub(taken)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ParkingState {
    #[serde(default)]
    spots: BTreeMap<String, SpotStatus>,
}

#[derive(Deserialize)]
struct SpotUpdate {
    spot: String,
    status: SpotStatus,
}

/// Maintains the available spot count of an off-street parking.
#[derive(Debug, Clone, Copy, Default)]
pub struct OffStreetParkingHandler;

impl TwinHandler for OffStreetParkingHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Command, Some(UPDATE_VEHICLE_COUNT))?;
        let u: SpotUpdate = parse(event.payload)?;
        let mut state: ParkingState = match ctx.latest_own() {
            Some(e) => serde_json::from_slice(&e.payload).unwrap_or_default(),
            None => ParkingState::default(),
        };
        state.spots.insert(u.spot, u.status);
        let total = ctx
            .property("totalSpotNumber")
            .and_then(|v| v.as_f64())
            .map(|v| v.max(0.0) as u64)
            .unwrap_or(state.spots.len() as u64);
        let occupied = state.spots.values().filter(|s| **s == SpotStatus::Occupied).count();
        let closed = state.spots.values().filter(|s| **s == SpotStatus::Closed).count();
        let out = json!({
            "spots": state.spots,
            "totalSpotNumber": total,
            "occupiedSpotNumber": occupied,
            "closedSpotNumber": closed,
            "availableSpotNumber": available_spots(total, state.spots.values()),
        });
        ctx.emit_store(bytes(out));
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct BatteryEvent {
    battery_level: f64,
}

/// Stores device state; asks low-battery devices to save power.
#[derive(Debug, Clone, Copy)]
pub struct DeviceBatteryHandler {
    pub threshold: f64,
}

impl TwinHandler for DeviceBatteryHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        expect(event, EventCategory::Real, None)?;
        let b: BatteryEvent = parse(event.payload)?;
        if !(0.0..=100.0).contains(&b.battery_level) {
            return Err(HandlerError::OutOfRange(format!("battery level {}", b.battery_level)));
        }
        ctx.emit_store(event.payload.to_vec());
        if b.battery_level < self.threshold {
            ctx.emit_virtual(bytes(json!({"command": "lowPowerMode", "batteryLevel": b.battery_level})));
        }
        Ok(())
    }
}

/// Stores every event as received.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThroughHandler;

impl TwinHandler for PassThroughHandler {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError> {
        object(event.payload)?;
        ctx.emit_store(event.payload.to_vec());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parking_arithmetic() {
        let mut s = vec![SpotStatus::Free; 20];
        s[..5].fill(SpotStatus::Occupied);
        assert_eq!(available_spots(20, &s), 15);
        assert_eq!(available_spots(20, &vec![SpotStatus::Closed; 20]), 0);
    }

    #[test]
    fn window_max() {
        let mut r = BTreeMap::new();
        r.insert("a".to_string(), PoleReport { index: 42, time: 100.0 });
        r.insert("b".to_string(), PoleReport { index: 130, time: 90.0 });
        r.insert("c".to_string(), PoleReport { index: 300, time: 10.0 });
        assert_eq!(in_window_max(&r, 100.0, 60.0), Some(130));
    }
}
