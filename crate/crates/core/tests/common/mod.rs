//! Oracles shared by the integration and acceptance targets.

/// Dew point through vapour pressure: e = RH * Es(T), Td = Es^-1(e).
pub fn magnus_oracle(t: f64, rh: f64) -> f64 {
    let es = |t: f64| 6.112 * (17.62 * t / (243.12 + t)).exp();
    let ln = (rh / 100.0 * es(t) / 6.112).ln();
    243.12 * ln / (17.62 - ln)
}

// Breakpoints in integer units of the truncation precision (CO in 0.1 ppm).
const CO2: &[(i64, i64, i64, i64)] =
    &[(0, 600, 0, 50), (601, 1000, 51, 100), (1001, 1500, 101, 150), (1501, 2500, 151, 200), (2501, 5000, 201, 300), (5001, 40000, 301, 500)];
const CO: &[(i64, i64, i64, i64)] =
    &[(0, 44, 0, 50), (45, 94, 51, 100), (95, 124, 101, 150), (125, 154, 151, 200), (155, 304, 201, 300), (305, 404, 301, 400), (405, 504, 401, 500)];
const SO2: &[(i64, i64, i64, i64)] =
    &[(0, 35, 0, 50), (36, 75, 51, 100), (76, 185, 101, 150), (186, 304, 151, 200), (305, 604, 201, 300), (605, 804, 301, 400), (805, 1004, 401, 500)];

/// Exact rational interpolation, halves rounded up.
fn sub_index_oracle(rows: &[(i64, i64, i64, i64)], units: i64) -> i64 {
    if units > rows.last().unwrap().1 {
        return 500;
    }
    for &(c_lo, c_hi, i_lo, i_hi) in rows {
        if (c_lo..=c_hi).contains(&units) {
            let num = (i_hi - i_lo) * (units - c_lo);
            let den = c_hi - c_lo;
            return i_lo + (2 * num + den) / (2 * den);
        }
    }
    unreachable!("rows are contiguous in integer units")
}

pub fn category_oracle(i: i64) -> &'static str {
    ["Good", "Moderate", "Unhealthy for Sensitive Groups", "Unhealthy", "Very Unhealthy", "Hazardous"]
        [[50, 100, 150, 200, 300, i64::MAX].iter().position(|&hi| i <= hi).unwrap()]
}

pub fn aqi_oracle(co2: i64, co_tenths: i64, so2: i64) -> i64 {
    sub_index_oracle(CO2, co2).max(sub_index_oracle(CO, co_tenths)).max(sub_index_oracle(SO2, so2))
}
