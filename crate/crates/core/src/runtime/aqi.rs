//! Air quality index by piecewise-linear breakpoint interpolation.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pollutant {
    Co2,
    Co,
    So2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AqiCategory {
    Good,
    Moderate,
    UnhealthyForSensitiveGroups,
    Unhealthy,
    VeryUnhealthy,
    Hazardous,
}

impl AqiCategory {
    pub fn from_index(index: u32) -> Self {
        match index {
            0..=50 => AqiCategory::Good,
            51..=100 => AqiCategory::Moderate,
            101..=150 => AqiCategory::UnhealthyForSensitiveGroups,
            151..=200 => AqiCategory::Unhealthy,
            201..=300 => AqiCategory::VeryUnhealthy,
            _ => AqiCategory::Hazardous,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AqiCategory::Good => "Good",
            AqiCategory::Moderate => "Moderate",
            AqiCategory::UnhealthyForSensitiveGroups => "Unhealthy for Sensitive Groups",
            AqiCategory::Unhealthy => "Unhealthy",
            AqiCategory::VeryUnhealthy => "Very Unhealthy",
            AqiCategory::Hazardous => "Hazardous",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [
            AqiCategory::Good,
            AqiCategory::Moderate,
            AqiCategory::UnhealthyForSensitiveGroups,
            AqiCategory::Unhealthy,
            AqiCategory::VeryUnhealthy,
            AqiCategory::Hazardous,
        ]
        .into_iter()
        .find(|c| c.label() == label)
    }
}

impl fmt::Display for AqiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One breakpoint row: concentrations `[c_lo, c_hi]` map to `[i_lo, i_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakpointRow<T> {
    pub c_lo: T,
    pub c_hi: T,
    pub i_lo: u32,
    pub i_hi: u32,
}

/// Breakpoints of one pollutant. Concentrations are truncated to
/// `decimals` places before lookup, as the rows are contiguous at that
/// precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollutantTable<T> {
    pub pollutant: Pollutant,
    pub decimals: u32,
    pub rows: Vec<BreakpointRow<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointTable<T> {
    pub tables: Vec<PollutantTable<T>>,
}

fn rows<T: Scalar>(spec: &[(f64, f64, u32, u32)]) -> Vec<BreakpointRow<T>> {
    spec.iter()
        .map(|&(c_lo, c_hi, i_lo, i_hi)| BreakpointRow { c_lo: T::lit(c_lo), c_hi: T::lit(c_hi), i_lo, i_hi })
        .collect()
}

impl<T: Scalar> Default for BreakpointTable<T> {
    /// CO in ppm and SO2 in ppb (1-hour), plus a synthetic CO2 (ppm) scale.
    fn default() -> Self {
        BreakpointTable {
            tables: vec![
                PollutantTable {
                    pollutant: Pollutant::Co2,
                    decimals: 0,
                    rows: rows(&[
                        (0.0, 600.0, 0, 50),
                        (601.0, 1000.0, 51, 100),
                        (1001.0, 1500.0, 101, 150),
                        (1501.0, 2500.0, 151, 200),
                        (2501.0, 5000.0, 201, 300),
                        (5001.0, 40000.0, 301, 500),
                    ]),
                },
                PollutantTable {
                    pollutant: Pollutant::Co,
                    decimals: 1,
                    rows: rows(&[
                        (0.0, 4.4, 0, 50),
                        (4.5, 9.4, 51, 100),
                        (9.5, 12.4, 101, 150),
                        (12.5, 15.4, 151, 200),
                        (15.5, 30.4, 201, 300),
                        (30.5, 40.4, 301, 400),
                        (40.5, 50.4, 401, 500),
                    ]),
                },
                PollutantTable {
                    pollutant: Pollutant::So2,
                    decimals: 0,
                    rows: rows(&[
                        (0.0, 35.0, 0, 50),
                        (36.0, 75.0, 51, 100),
                        (76.0, 185.0, 101, 150),
                        (186.0, 304.0, 151, 200),
                        (305.0, 604.0, 201, 300),
                        (605.0, 804.0, 301, 400),
                        (805.0, 1004.0, 401, 500),
                    ]),
                },
            ],
        }
    }
}

/// Pollutant densities: CO2 ppm, CO ppm, SO2 ppb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AqiReading<T> {
    pub co2: T,
    pub co: T,
    pub so2: T,
}

impl<T: Copy> AqiReading<T> {
    pub fn get(&self, p: Pollutant) -> T {
        match p {
            Pollutant::Co2 => self.co2,
            Pollutant::Co => self.co,
            Pollutant::So2 => self.so2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AqiResult {
    pub index: u32,
    pub category: AqiCategory,
    pub dominant: Pollutant,
    /// Some concentration exceeded its table and was clamped to 500.
    pub clamped: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AqiError {
    #[error("{0:?} concentration must be a finite non-negative number")]
    InvalidConcentration(Pollutant),
    #[error("{0:?} concentration falls outside the breakpoint table")]
    Uncovered(Pollutant),
}

/// Truncates to `decimals` places (with a tolerance for binary rounding).
pub fn truncate<T: Scalar>(c: T, decimals: u32) -> T {
    let scale = T::lit(10f64.powi(decimals as i32));
    ((c * scale) + T::lit(1e-9)).floor() / scale
}

/// Sub-index of one pollutant and whether it was clamped.
pub fn sub_index<T: Scalar>(table: &PollutantTable<T>, c: T) -> Result<(u32, bool), AqiError> {
    if !(c >= T::zero()) || !c.is_finite() {
        return Err(AqiError::InvalidConcentration(table.pollutant));
    }
    let c = truncate(c, table.decimals);
    let top = table.rows.last().ok_or(AqiError::Uncovered(table.pollutant))?;
    if c > top.c_hi {
        return Ok((500, true));
    }
    let row = table
        .rows
        .iter()
        .find(|r| c >= r.c_lo && c <= r.c_hi)
        .ok_or(AqiError::Uncovered(table.pollutant))?;
    let i_lo = T::from_u32(row.i_lo).expect("u32 fits");
    let i_hi = T::from_u32(row.i_hi).expect("u32 fits");
    let i = (i_hi - i_lo) / (row.c_hi - row.c_lo) * (c - row.c_lo) + i_lo;
    Ok((i.round().to_u32().unwrap_or(0), false))
}

/// Overall index: maximum pollutant sub-index, with its AQI band.
pub fn classify_aqi<T: Scalar>(reading: &AqiReading<T>, table: &BreakpointTable<T>) -> Result<AqiResult, AqiError> {
    let mut best: Option<(u32, Pollutant)> = None;
    let mut clamped = false;
    for t in &table.tables {
        let (i, c) = sub_index(t, reading.get(t.pollutant))?;
        clamped |= c;
        if best.is_none_or(|(b, _)| i > b) {
            best = Some((i, t.pollutant));
        }
    }
    let (index, dominant) = best.unwrap_or((0, Pollutant::Co));
    Ok(AqiResult { index, category: AqiCategory::from_index(index), dominant, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reading(co2: f64, co: f64, so2: f64) -> AqiReading<f64> {
        AqiReading { co2, co, so2 }
    }

    #[test]
    fn band_floors_are_exact() {
        let t = BreakpointTable::<f64>::default();
        for table in &t.tables {
            for row in &table.rows {
                assert_eq!(sub_index(table, row.c_lo).unwrap(), (row.i_lo, false));
                assert_eq!(sub_index(table, row.c_hi).unwrap(), (row.i_hi, false));
            }
        }
    }

    #[test]
    fn known_values() {
        let t = BreakpointTable::default();
        // CO 6.0 ppm: (100-51)/(9.4-4.5)*(6.0-4.5)+51 = 66.
        let r = classify_aqi(&reading(400.0, 6.0, 10.0), &t).unwrap();
        assert_eq!((r.index, r.dominant), (66, Pollutant::Co));
        assert_eq!(r.category, AqiCategory::Moderate);
        let r = classify_aqi(&reading(400.0, 60.0, 10.0), &t).unwrap();
        assert_eq!((r.index, r.clamped), (500, true));
        assert_eq!(AqiCategory::from_index(175), AqiCategory::Unhealthy);
        assert!(classify_aqi(&reading(-1.0, 0.0, 0.0), &t).is_err());
    }

    #[test]
    fn gaps_are_truncated_away() {
        let t = BreakpointTable::default();
        // 4.45 ppm truncates to 4.4 -> top of the Good band.
        assert_eq!(classify_aqi(&reading(0.0, 4.45, 0.0), &t).unwrap().index, 50);
        assert_eq!(classify_aqi(&reading(0.0, 0.0, 35.9), &t).unwrap().index, 50);
    }

    #[test]
    fn works_in_f32() {
        let t = BreakpointTable::<f32>::default();
        let r = classify_aqi(&AqiReading { co2: 400.0f32, co: 6.0, so2: 10.0 }, &t).unwrap();
        assert_eq!(r.index, 66);
    }
}
