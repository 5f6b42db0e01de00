//! Order statistics.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Nearest-rank percentile of an ascending slice; `p` in (0, 100].
pub fn nearest_rank<T: Scalar>(sorted: &[T], p: T) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let n = T::from_usize(sorted.len())?;
    let rank = (p / T::lit(100.0) * n).ceil().to_usize().unwrap_or(0).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Median; the mean of the two middle values for even lengths.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / T::lit(2.0) })
}

pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / T::from_usize(values.len())?)
}

pub fn max<T: Scalar>(values: &[T]) -> Option<T> {
    values.iter().copied().fold(None, |m, v| Some(m.map_or(v, |m: T| m.max(v))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Nearest-rank p50/p90/p95/p99 of unsorted samples.
pub fn percentiles(values: &[f64]) -> Option<Percentiles> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Percentiles {
        count: v.len(),
        p50: nearest_rank(&v, 50.0)?,
        p90: nearest_rank(&v, 90.0)?,
        p95: nearest_rank(&v, 95.0)?,
        p99: nearest_rank(&v, 99.0)?,
    })
}
