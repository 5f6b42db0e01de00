use super::ServiceUsage;
use serde::{Deserialize, Serialize};

/// Linear utilization curve with an idle floor: `floor + (1 - floor) * u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsageCurve {
    pub floor: f64,
}

impl Default for UsageCurve {
    fn default() -> Self {
        UsageCurve { floor: 0.05 }
    }
}

impl UsageCurve {
    pub fn apply(&self, utilization: f64) -> f64 {
        let u = utilization.clamp(0.0, 1.0);
        self.floor + (1.0 - self.floor) * u
    }
}

/// Cluster-wide per-second resource series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceSeries {
    pub pods: Vec<f64>,
    /// CPU units.
    pub requested_cpu: Vec<f64>,
    /// Bytes.
    pub requested_memory: Vec<f64>,
    pub used_cpu_fraction: Vec<f64>,
    pub used_memory_fraction: Vec<f64>,
}

/// Sums per-service usage into cluster series.
pub fn resource_series(usages: &[ServiceUsage], cpu_curve: UsageCurve, memory_curve: UsageCurve) -> ResourceSeries {
    let n = usages.iter().map(|u| u.replicas.len()).max().unwrap_or(0);
    let mut out = ResourceSeries {
        pods: vec![0.0; n],
        requested_cpu: vec![0.0; n],
        requested_memory: vec![0.0; n],
        used_cpu_fraction: vec![0.0; n],
        used_memory_fraction: vec![0.0; n],
    };
    for t in 0..n {
        let (mut in_flight, mut capacity) = (0.0, 0.0);
        for u in usages {
            let pods = u.replicas.get(t).copied().unwrap_or(0.0);
            out.pods[t] += pods;
            out.requested_cpu[t] += pods * u.cpu;
            out.requested_memory[t] += pods * u.memory as f64;
            in_flight += u.in_flight.get(t).copied().unwrap_or(0.0);
            capacity += u.capacity.get(t).copied().unwrap_or(0.0);
        }
        if out.pods[t] > 0.0 {
            let util = if capacity > 0.0 { in_flight / capacity } else { 0.0 };
            out.used_cpu_fraction[t] = cpu_curve.apply(util);
            out.used_memory_fraction[t] = memory_curve.apply(util);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(pods: f64, secs: usize) -> ServiceUsage {
        ServiceUsage {
            service: "s".into(),
            cpu: 0.1,
            memory: 64 << 20,
            replicas: vec![pods; secs],
            in_flight: vec![0.0; secs],
            capacity: vec![pods * 5.0; secs],
        }
    }

    #[test]
    fn requested_cpu_is_pods_times_request() {
        let r = resource_series(&[usage(140.0, 3), usage(20.0, 3)], UsageCurve::default(), UsageCurve::default());
        assert!(r.requested_cpu.iter().all(|&c| (c - 16.0).abs() < 1e-9));
        assert_eq!(r.used_cpu_fraction, vec![0.05; 3]);
        let z = resource_series(&[usage(0.0, 2)], UsageCurve::default(), UsageCurve::default());
        assert_eq!(z.requested_cpu, vec![0.0, 0.0]);
        assert_eq!(z.used_cpu_fraction, vec![0.0, 0.0]);
    }
}
