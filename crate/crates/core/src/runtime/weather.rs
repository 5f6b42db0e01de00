//! Dew point, feels-like temperature and pressure tendency.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Magnus coefficients over water.
pub const MAGNUS_B: f64 = 17.62;
pub const MAGNUS_C: f64 = 243.12;

/// Weather observation; temperature in °C, humidity in %, pressure in hPa,
/// wind speed in km/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeatherReading<T> {
    pub temperature: T,
    pub relative_humidity: T,
    pub atmospheric_pressure: T,
    #[serde(default)]
    pub precipitation: T,
    #[serde(default)]
    pub snow_height: T,
    #[serde(default)]
    pub wind_direction: T,
    #[serde(default)]
    pub wind_speed: T,
}

/// Dew point by the Magnus formula; `None` when humidity is not positive.
pub fn dew_point<T: Scalar>(temperature: T, relative_humidity: T) -> Option<T> {
    if !(relative_humidity > T::zero()) {
        return None;
    }
    let b = T::lit(MAGNUS_B);
    let c = T::lit(MAGNUS_C);
    let gamma = (relative_humidity / T::lit(100.0)).ln() + b * temperature / (c + temperature);
    Some(c * gamma / (b - gamma))
}

/// Wind chill (°C) for air temperature in °C and wind in km/h.
pub fn wind_chill<T: Scalar>(t: T, wind_kmh: T) -> T {
    let v = wind_kmh.powf(T::lit(0.16));
    T::lit(13.12) + T::lit(0.6215) * t - T::lit(11.37) * v + T::lit(0.3965) * t * v
}

/// Rothfusz heat index, evaluated in °F and returned in °C.
pub fn heat_index<T: Scalar>(t: T, rh: T) -> T {
    let f = t * T::lit(9.0) / T::lit(5.0) + T::lit(32.0);
    let hi = T::lit(-42.379) + T::lit(2.049_015_23) * f + T::lit(10.143_331_27) * rh
        - T::lit(0.224_755_41) * f * rh
        - T::lit(0.006_837_83) * f * f
        - T::lit(0.054_817_17) * rh * rh
        + T::lit(0.001_228_74) * f * f * rh
        + T::lit(0.000_852_82) * f * rh * rh
        - T::lit(0.000_001_99) * f * f * rh * rh;
    (hi - T::lit(32.0)) * T::lit(5.0) / T::lit(9.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeelsLikeModel {
    /// Wind chill below 10 °C with wind above 4.8 km/h, heat index above
    /// 27 °C with humidity above 40 %, air temperature otherwise.
    #[default]
    ChillOrHeat,
    /// Always the air temperature.
    AirTemperature,
}

pub fn feels_like<T: Scalar>(t: T, rh: T, wind_kmh: T, model: FeelsLikeModel) -> T {
    match model {
        FeelsLikeModel::AirTemperature => t,
        FeelsLikeModel::ChillOrHeat => {
            if t < T::lit(10.0) && wind_kmh > T::lit(4.8) {
                wind_chill(t, wind_kmh)
            } else if t > T::lit(27.0) && rh > T::lit(40.0) {
                heat_index(t, rh)
            } else {
                t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PressureTendency {
    Rising,
    Steady,
    Falling,
}

/// Hours of history considered for the tendency.
pub const TENDENCY_HOURS: f64 = 3.0;
/// Slopes within this band (hPa/h) count as steady.
pub const TENDENCY_DEAD_BAND: f64 = 0.1;

/// Least-squares slope (hPa per hour) over samples `(hours, hPa)`.
pub fn pressure_slope<T: Scalar>(samples: &[(T, T)]) -> Option<T> {
    if samples.len() < 2 {
        return None;
    }
    let n = T::from_usize(samples.len())?;
    let mt = samples.iter().fold(T::zero(), |a, s| a + s.0) / n;
    let mp = samples.iter().fold(T::zero(), |a, s| a + s.1) / n;
    let (num, den) = samples.iter().fold((T::zero(), T::zero()), |(num, den), &(t, p)| {
        (num + (t - mt) * (p - mp), den + (t - mt) * (t - mt))
    });
    if den == T::zero() {
        None
    } else {
        Some(num / den)
    }
}

/// Tendency over samples within the last three hours of `now_hours`.
pub fn pressure_tendency<T: Scalar>(samples: &[(T, T)], now_hours: T) -> PressureTendency {
    let from = now_hours - T::lit(TENDENCY_HOURS);
    let recent: Vec<(T, T)> = samples.iter().copied().filter(|(t, _)| *t >= from && *t <= now_hours).collect();
    match pressure_slope(&recent) {
        Some(s) if s > T::lit(TENDENCY_DEAD_BAND) => PressureTendency::Rising,
        Some(s) if s < T::lit(-TENDENCY_DEAD_BAND) => PressureTendency::Falling,
        _ => PressureTendency::Steady,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeatherEnrichment<T> {
    pub dew_point: Option<T>,
    pub feels_like_temperature: T,
    pub pressure_tendency: PressureTendency,
}

/// Enriches a reading given earlier `(hours, hPa)` samples; the current
/// pressure is included at `now_hours`.
pub fn enrich_weather<T: Scalar>(
    reading: &WeatherReading<T>,
    previous: &[(T, T)],
    now_hours: T,
    model: FeelsLikeModel,
) -> WeatherEnrichment<T> {
    let mut samples = previous.to_vec();
    samples.push((now_hours, reading.atmospheric_pressure));
    WeatherEnrichment {
        dew_point: dew_point(reading.temperature, reading.relative_humidity),
        feels_like_temperature: feels_like(reading.temperature, reading.relative_humidity, reading.wind_speed, model),
        pressure_tendency: pressure_tendency(&samples, now_hours),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_dew_point_is_air_temperature() {
        assert!((dew_point(20.0f64, 100.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(dew_point(20.0f64, 0.0), None);
    }

    #[test]
    fn feels_like_regimes() {
        assert_eq!(feels_like(15.0, 50.0, 20.0, FeelsLikeModel::ChillOrHeat), 15.0);
        // Environment Canada table: -10 °C at 20 km/h is about -17.9.
        let wc: f64 = feels_like(-10.0, 50.0, 20.0, FeelsLikeModel::ChillOrHeat);
        assert!((wc - -17.9).abs() < 0.1, "{wc}");
        // NWS table: 90 °F at 60 % is about 100 °F (37.8 °C).
        let hi: f64 = feels_like(32.2222, 60.0, 5.0, FeelsLikeModel::ChillOrHeat);
        assert!((hi - 37.8).abs() < 0.5, "{hi}");
    }

    #[test]
    fn tendencies() {
        let steady: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.5, 1013.0)).collect();
        assert_eq!(pressure_tendency(&steady, 2.5), PressureTendency::Steady);
        let rising: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.5, 1000.0 + i as f64)).collect();
        assert_eq!(pressure_tendency(&rising, 2.5), PressureTendency::Rising);
        let falling: Vec<(f64, f64)> = rising.iter().map(|&(t, p)| (t, 2000.0 - p)).collect();
        assert_eq!(pressure_tendency(&falling, 2.5), PressureTendency::Falling);
        assert_eq!(pressure_tendency(&[(0.0f64, 1000.0)], 0.0), PressureTendency::Steady);
    }
}
