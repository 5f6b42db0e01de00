//! Per-service concurrency autoscaler with scale-to-zero, activator
//! buffering, cold starts and fixed provisioning.

mod resources;

pub use resources::{resource_series, ResourceSeries, UsageCurve};

use crate::definitions::AutoscalePolicy;
use crate::metrics::SecondIntegrator;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Timing knobs shared by all scalers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalerSettings {
    pub stable_window: f64,
    pub tick: f64,
    pub idle_window: f64,
    pub cold_start_min: f64,
    pub cold_start_max: f64,
    /// Per-replica concurrency limit; 0 uses the policy target.
    pub container_concurrency: u32,
}

impl Default for ScalerSettings {
    fn default() -> Self {
        ScalerSettings {
            stable_window: 60.0,
            tick: 2.0,
            idle_window: 30.0,
            cold_start_min: 1.0,
            cold_start_max: 2.0,
            container_concurrency: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProvisioningMode {
    Auto,
    /// Constant replica count, ready from t = 0.
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplicaState {
    ColdStarting,
    Ready,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodReplica {
    pub id: u64,
    pub state: ReplicaState,
    pub started_at: f64,
    pub ready_at: f64,
    pub in_flight: u32,
    pub capacity: u32,
    pub cpu: f64,
    pub memory: u64,
}

/// A replica creation the event loop must schedule a readiness event for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spawned {
    pub id: u64,
    pub ready_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Placed(u64),
    Buffered,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reconciled {
    pub spawned: Vec<Spawned>,
    pub terminated: Vec<u64>,
}

/// One row of the scaling trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub service: String,
    pub ready: u32,
    pub cold_starting: u32,
    pub buffered: u32,
    pub desired: u32,
}

/// Per-second usage signals of one service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceUsage {
    pub service: String,
    pub cpu: f64,
    pub memory: u64,
    /// Mean replica count (ready + cold-starting) per second.
    pub replicas: Vec<f64>,
    pub in_flight: Vec<f64>,
    /// Mean ready capacity (ready replicas x concurrency limit) per second.
    pub capacity: Vec<f64>,
}

/// Autoscaler state for one service.
#[derive(Debug, Clone)]
pub struct ScalerState<W> {
    pub service: String,
    pub policy: AutoscalePolicy,
    pub mode: ProvisioningMode,
    settings: ScalerSettings,
    cpu: f64,
    memory: u64,
    replicas: Vec<PodReplica>,
    buffer: VecDeque<W>,
    samples: VecDeque<(f64, f64)>,
    area: f64,
    area_since: f64,
    last_sample: f64,
    last_arrival: Option<f64>,
    next_id: u64,
    in_flight_total: u32,
    replica_signal: SecondIntegrator,
    in_flight_signal: SecondIntegrator,
    capacity_signal: SecondIntegrator,
    max_replicas_seen: u32,
}

impl<W> ScalerState<W> {
    /// Fixed modes start with all replicas ready at `now`; auto starts empty.
    pub fn new(
        service: impl Into<String>,
        policy: AutoscalePolicy,
        mode: ProvisioningMode,
        settings: ScalerSettings,
        cpu: f64,
        memory: u64,
        now: f64,
    ) -> Self {
        let mut s = ScalerState {
            service: service.into(),
            policy,
            mode,
            settings,
            cpu,
            memory,
            replicas: Vec::new(),
            buffer: VecDeque::new(),
            samples: VecDeque::new(),
            area: 0.0,
            area_since: now,
            last_sample: now,
            last_arrival: None,
            next_id: 0,
            in_flight_total: 0,
            replica_signal: SecondIntegrator::new(0.0),
            in_flight_signal: SecondIntegrator::new(0.0),
            capacity_signal: SecondIntegrator::new(0.0),
            max_replicas_seen: 0,
        };
        if let ProvisioningMode::Fixed(n) = mode {
            for _ in 0..n {
                s.create(now, now);
            }
        }
        s.update_signals(now);
        s
    }

    fn capacity(&self) -> u32 {
        if self.settings.container_concurrency > 0 {
            self.settings.container_concurrency
        } else {
            self.policy.target
        }
    }

    fn bounds(&self) -> (u32, u32) {
        match self.mode {
            ProvisioningMode::Auto => (self.policy.min_replicas, self.policy.max_replicas),
            ProvisioningMode::Fixed(n) => (n, n),
        }
    }

    fn create(&mut self, now: f64, ready_at: f64) -> Spawned {
        let id = self.next_id;
        self.next_id += 1;
        let state = if ready_at <= now { ReplicaState::Ready } else { ReplicaState::ColdStarting };
        self.replicas.push(PodReplica {
            id,
            state,
            started_at: now,
            ready_at,
            in_flight: 0,
            capacity: self.capacity(),
            cpu: self.cpu,
            memory: self.memory,
        });
        self.max_replicas_seen = self.max_replicas_seen.max(self.replicas.len() as u32);
        Spawned { id, ready_at }
    }

    fn spawn_cold<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Spawned {
        let (lo, hi) = (self.settings.cold_start_min, self.settings.cold_start_max);
        let delay = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        self.create(now, now + delay)
    }

    fn accumulate(&mut self, now: f64) {
        if now > self.area_since {
            self.area += (self.in_flight_total as f64 + self.buffer.len() as f64) * (now - self.area_since);
            self.area_since = now;
        }
    }

    fn update_signals(&mut self, now: f64) {
        let ready = self.ready() as f64;
        self.replica_signal.set(now, self.replicas.len() as f64);
        self.in_flight_signal.set(now, self.in_flight_total as f64);
        self.capacity_signal.set(now, ready * self.capacity() as f64);
    }

    pub fn replicas(&self) -> &[PodReplica] {
        &self.replicas
    }

    pub fn ready(&self) -> u32 {
        self.replicas.iter().filter(|r| r.state == ReplicaState::Ready).count() as u32
    }

    pub fn cold_starting(&self) -> u32 {
        self.replicas.iter().filter(|r| r.state == ReplicaState::ColdStarting).count() as u32
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn in_flight(&self) -> u32 {
        self.in_flight_total
    }

    pub fn max_replicas_seen(&self) -> u32 {
        self.max_replicas_seen
    }

    /// Average observed concurrency over the stable window.
    pub fn window_average(&self, now: f64) -> f64 {
        let from = now - self.settings.stable_window;
        let (sum, n) = self
            .samples
            .iter()
            .filter(|(t, _)| *t > from)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        if n == 0 {
            (self.in_flight_total as usize + self.buffer.len()) as f64
        } else {
            sum / n as f64
        }
    }

    fn active(&self, now: f64) -> bool {
        self.in_flight_total > 0
            || !self.buffer.is_empty()
            || self.last_arrival.is_some_and(|t| now - t < self.settings.idle_window)
    }

    /// Target replica count at `now`.
    pub fn desired_replicas(&self, now: f64) -> u32 {
        let (min, max) = self.bounds();
        if let ProvisioningMode::Fixed(n) = self.mode {
            return n;
        }
        if !self.active(now) {
            return min;
        }
        let want = (self.window_average(now) / self.policy.target as f64).ceil().max(1.0) as u32;
        want.clamp(min, max)
    }

    /// Replicas needed to absorb the current in-flight plus buffered work.
    fn burst_target(&self) -> u32 {
        let (_, max) = self.bounds();
        let load = self.in_flight_total as usize + self.buffer.len();
        (load.div_ceil(self.policy.target as usize) as u32).clamp(1, max)
    }

    fn least_loaded(&self) -> Option<usize> {
        self.replicas
            .iter()
            .enumerate()
            .filter(|(_, r)| r.state == ReplicaState::Ready && r.in_flight < r.capacity)
            .min_by_key(|(_, r)| (r.in_flight, r.id))
            .map(|(i, _)| i)
    }

    fn occupy(&mut self, idx: usize) -> u64 {
        self.replicas[idx].in_flight += 1;
        self.in_flight_total += 1;
        self.replicas[idx].id
    }

    /// Places work on the least-loaded ready replica, or buffers it and
    /// scales out immediately. Returns any replicas created.
    pub fn admit<R: Rng + ?Sized>(&mut self, work: W, now: f64, rng: &mut R) -> (Placement, Vec<Spawned>, Option<W>) {
        self.accumulate(now);
        self.last_arrival = Some(now);
        if let Some(idx) = self.least_loaded() {
            let id = self.occupy(idx);
            self.update_signals(now);
            return (Placement::Placed(id), Vec::new(), Some(work));
        }
        self.buffer.push_back(work);
        let mut spawned = Vec::new();
        let target = self.burst_target();
        while (self.replicas.len() as u32) < target {
            spawned.push(self.spawn_cold(now, rng));
        }
        self.update_signals(now);
        (Placement::Buffered, spawned, None)
    }

    /// Moves buffered work onto free ready capacity, FIFO.
    fn drain(&mut self) -> Vec<(u64, W)> {
        let mut out = Vec::new();
        while !self.buffer.is_empty() {
            let Some(idx) = self.least_loaded() else { break };
            let id = self.occupy(idx);
            out.push((id, self.buffer.pop_front().expect("non-empty")));
        }
        out
    }

    /// A cold-starting replica became ready. Returns buffered work it took.
    pub fn mark_ready(&mut self, id: u64, now: f64) -> Vec<(u64, W)> {
        self.accumulate(now);
        let Some(r) = self.replicas.iter_mut().find(|r| r.id == id) else {
            return Vec::new();
        };
        r.state = ReplicaState::Ready;
        let out = self.drain();
        self.update_signals(now);
        out
    }

    /// Releases one slot on `replica`; returns buffered work placed next.
    pub fn complete(&mut self, replica: u64, now: f64) -> Vec<(u64, W)> {
        self.accumulate(now);
        if let Some(r) = self.replicas.iter_mut().find(|r| r.id == replica) {
            if r.in_flight > 0 {
                r.in_flight -= 1;
                self.in_flight_total -= 1;
            }
        }
        let out = self.drain();
        self.update_signals(now);
        out
    }

    /// Records the time-weighted concurrency since the previous sample.
    pub fn sample(&mut self, now: f64) {
        self.accumulate(now);
        let dt = now - self.last_sample;
        if dt > 0.0 {
            self.samples.push_back((now, self.area / dt));
        }
        self.area = 0.0;
        self.last_sample = now;
        let from = now - self.settings.stable_window;
        while self.samples.front().is_some_and(|(t, _)| *t <= from) {
            self.samples.pop_front();
        }
    }

    /// Moves the replica set toward the desired count. Surplus replicas are
    /// removed only when idle, cold-starting ones first, newest first.
    pub fn reconcile<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Reconciled {
        let mut desired = self.desired_replicas(now);
        if !self.buffer.is_empty() {
            desired = desired.max(self.burst_target());
        }
        let mut out = Reconciled::default();
        while (self.replicas.len() as u32) < desired {
            out.spawned.push(self.spawn_cold(now, rng));
        }
        let mut surplus = (self.replicas.len() as u32).saturating_sub(desired);
        for state in [ReplicaState::ColdStarting, ReplicaState::Ready] {
            while surplus > 0 {
                let Some(pos) = self.replicas.iter().rposition(|r| r.state == state && r.in_flight == 0) else {
                    break;
                };
                out.terminated.push(self.replicas.remove(pos).id);
                surplus -= 1;
            }
        }
        self.update_signals(now);
        out
    }

    /// Sample, reconcile and produce a trace row.
    pub fn tick<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> (Reconciled, TraceRow) {
        self.sample(now);
        let r = self.reconcile(now, rng);
        let row = TraceRow {
            time: now,
            service: self.service.clone(),
            ready: self.ready(),
            cold_starting: self.cold_starting(),
            buffered: self.buffer.len() as u32,
            desired: self.desired_replicas(now),
        };
        (r, row)
    }

    /// Closes the usage signals at `seconds` and returns leftover buffered work.
    pub fn finish(mut self, seconds: usize) -> (ServiceUsage, Vec<W>) {
        let usage = ServiceUsage {
            service: self.service.clone(),
            cpu: self.cpu,
            memory: self.memory,
            replicas: self.replica_signal.finish(seconds),
            in_flight: self.in_flight_signal.finish(seconds),
            capacity: self.capacity_signal.finish(seconds),
        };
        (usage, self.buffer.drain(..).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn auto() -> ScalerState<u32> {
        ScalerState::new("svc", AutoscalePolicy::default(), ProvisioningMode::Auto, ScalerSettings::default(), 0.1, 1, 0.0)
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn desired_from_window_average() {
        let mut s = auto();
        s.last_arrival = Some(0.0);
        s.samples.push_back((1.0, 23.0));
        assert_eq!(s.desired_replicas(1.0), 5);
        s.samples[0].1 = 200.0;
        assert_eq!(s.desired_replicas(1.0), 18);
        s.samples[0].1 = 0.0;
        assert_eq!(s.desired_replicas(1.0), 1);
        assert_eq!(s.desired_replicas(40.0), 0);
    }

    #[test]
    fn buffered_until_cold_start_completes() {
        let mut s = auto();
        let mut r = rng();
        let (p, spawned, _) = s.admit(1, 0.0, &mut r);
        assert_eq!(p, Placement::Buffered);
        assert_eq!(spawned.len(), 1);
        assert!((1.0..=2.0).contains(&spawned[0].ready_at));
        let placed = s.mark_ready(spawned[0].id, spawned[0].ready_at);
        assert_eq!(placed, vec![(spawned[0].id, 1)]);
        assert_eq!(s.buffered(), 0);
    }

    #[test]
    fn least_loaded_placement() {
        let mut s: ScalerState<u32> = ScalerState::new(
            "svc",
            AutoscalePolicy::default(),
            ProvisioningMode::Fixed(2),
            ScalerSettings::default(),
            0.1,
            1,
            0.0,
        );
        let mut r = rng();
        for _ in 0..3 {
            s.admit(0, 0.0, &mut r);
        }
        // Loads are now (2,1); complete one on replica 0 -> (1,1).
        s.complete(0, 0.1);
        let (p, _, _) = s.admit(0, 0.2, &mut r);
        assert_eq!(p, Placement::Placed(0));
        // Capacity 5 on each: fill both.
        for _ in 0..7 {
            s.admit(0, 0.3, &mut r);
        }
        assert_eq!(s.in_flight(), 10);
        assert_eq!(s.admit(0, 0.4, &mut r).0, Placement::Buffered);
        assert_eq!(s.replicas().len(), 2, "fixed mode never grows");
    }

    #[test]
    fn scale_to_zero_after_idle_window() {
        let mut s = auto();
        let mut r = rng();
        let (_, sp, _) = s.admit(1, 0.0, &mut r);
        let placed = s.mark_ready(sp[0].id, sp[0].ready_at);
        s.complete(placed[0].0, 2.5);
        let mut t = 2.0;
        while t < 40.0 {
            s.tick(t, &mut r);
            t += 2.0;
        }
        assert_eq!(s.replicas().len(), 0);
    }

    #[test]
    fn fixed_mode_constant() {
        let mut s: ScalerState<u32> = ScalerState::new(
            "svc",
            AutoscalePolicy::default(),
            ProvisioningMode::Fixed(14),
            ScalerSettings::default(),
            0.1,
            1,
            0.0,
        );
        let mut r = rng();
        for k in 1..100 {
            let (rec, _) = s.tick(k as f64 * 2.0, &mut r);
            assert!(rec.spawned.is_empty() && rec.terminated.is_empty());
        }
        assert_eq!(s.ready(), 14);
        let (usage, _) = s.finish(10);
        assert!(usage.replicas.iter().all(|&v| v == 14.0));
    }
}
