//! The discrete-event loop tying broker, dispatchers, autoscalers,
//! handlers and the event store together.

use super::city::city_graph;
use super::config::{ConfigError, DispatcherLanes, Provisioning, ScenarioConfig, ServiceTime};
use super::queue::{EventQueue, Ranked};
use super::result::*;
use super::workload::{stream, Workload};
use crate::autoscaler::{resource_series, Placement, ProvisioningMode, ScalerState, Spawned};
use crate::broker::{
    cloudevent_to_mqtt, mqtt_to_cloudevent, store_target, Broker, EventEnvelope, PublishOutcome,
};
use crate::definitions::{AutoscalePolicy, TwinGraph};
use crate::routing::{derive_topology, DispatcherRole, MatchRule, QueueOwner, RoutingKey, TopicPattern, TopologyPlan};
use crate::runtime::{handle, HandlerRegistry};
use crate::store::{EventStore, Retention};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use std::collections::{BTreeMap, BTreeSet};

/// Queue name of the device-side subscription to virtual events.
pub const DEVICE_SUBSCRIBERS: &str = "device-subscribers";

#[derive(Debug, Clone)]
struct Work {
    envelope: EventEnvelope,
    /// Store key for event-store work.
    target: Option<RoutingKey>,
}

enum SimEvent {
    HandlerComplete { service: usize, replica: u64, work: Work },
    ReplicaReady { service: usize, replica: u64 },
    DispatcherDrain { dispatcher: usize },
    DevicePublish { publisher: usize },
    ScalerTick,
}

impl Ranked for SimEvent {
    fn rank(&self) -> u8 {
        match self {
            SimEvent::HandlerComplete { .. } => 0,
            SimEvent::ReplicaReady { .. } => 1,
            SimEvent::DispatcherDrain { .. } => 2,
            SimEvent::DevicePublish { .. } => 3,
            SimEvent::ScalerTick => 4,
        }
    }
}

struct Service {
    name: String,
    /// Twin interface, or `None` for the event store.
    interface: Option<String>,
    scaler: ScalerState<Work>,
    rng: ChaCha8Rng,
    service_time: LogNormal<f64>,
    delivered: u64,
    completed: u64,
    failed: u64,
    latency: Vec<LatencySample>,
}

struct Dispatcher {
    role: DispatcherRole,
    queue: usize,
    lanes: u32,
    rate: f64,
    busy: bool,
    processed: u64,
    failed: u64,
}

enum Consumer {
    Dispatcher(usize),
    Service(usize),
    Devices,
    None,
}

fn lognormal(t: ServiceTime) -> Result<LogNormal<f64>, ConfigError> {
    LogNormal::new(t.median.ln(), t.sigma).map_err(|e| ConfigError::Invalid(format!("service time: {e}")))
}

/// Interfaces whose bindings feed queue `name`.
fn bound_interfaces(plan: &TopologyPlan, name: &str) -> u32 {
    let set: BTreeSet<&str> = plan
        .bindings
        .iter()
        .filter(|b| b.destination == name)
        .filter_map(|b| match &b.rule {
            MatchRule::RoutingKey(p) | MatchRule::TypePrefix(p) => p.split('.').nth(2),
        })
        .collect();
    set.len() as u32
}

struct Engine {
    config: ScenarioConfig,
    graph: TwinGraph,
    registry: HandlerRegistry,
    broker: Broker,
    store: EventStore,
    workload: Workload,
    queue: EventQueue<SimEvent>,
    services: Vec<Service>,
    dispatchers: Vec<Dispatcher>,
    consumers: Vec<Consumer>,
    store_service: usize,
    trace: Vec<crate::autoscaler::TraceRow>,
    virtual_delivered: u64,
}

impl Engine {
    fn new(config: ScenarioConfig, graph: TwinGraph, store: EventStore) -> Result<(Self, TopologyPlan), ConfigError> {
        config.validate()?;
        let plan = derive_topology(&graph).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut broker = Broker::new(&plan);
        let devices = broker.subscribe(DEVICE_SUBSCRIBERS, &TopicPattern::parse("ktwin.virtual.#").expect("valid pattern"));
        let registry = HandlerRegistry::builtin(&config.runtime);
        let twin_time = lognormal(config.service_time)?;
        let store_time = lognormal(config.store_service_time)?;

        let mut services = Vec::new();
        let mut consumers: Vec<Consumer> = (0..broker.queues().len()).map(|_| Consumer::None).collect();
        let mut dispatchers = Vec::new();
        for (idx, q) in broker.queues().iter().enumerate() {
            if idx == devices {
                consumers[idx] = Consumer::Devices;
                continue;
            }
            match &q.spec.owner {
                QueueOwner::Dispatcher(role) => {
                    let lanes = match config.dispatcher_lanes {
                        DispatcherLanes::PerInterface => bound_interfaces(&plan, &q.spec.name).max(1),
                        DispatcherLanes::Single => 1,
                    };
                    consumers[idx] = Consumer::Dispatcher(dispatchers.len());
                    dispatchers.push(Dispatcher {
                        role: *role,
                        queue: idx,
                        lanes,
                        rate: config.dispatcher_rate * lanes as f64,
                        busy: false,
                        processed: 0,
                        failed: 0,
                    });
                }
                QueueOwner::Interface(name) => {
                    let iface = graph.interface(name).expect("plan queues come from the graph");
                    let settings = iface.service.as_ref().expect("serviced interface");
                    let mut policy = settings.autoscale;
                    let o = config.autoscale;
                    policy.target = o.target.unwrap_or(policy.target);
                    policy.min_replicas = o.min_replicas.unwrap_or(policy.min_replicas);
                    policy.max_replicas = o.max_replicas.unwrap_or(policy.max_replicas);
                    let mode = match config.provisioning {
                        Provisioning::Auto => ProvisioningMode::Auto,
                        Provisioning::Fixed { per_service, .. } => ProvisioningMode::Fixed(per_service),
                    };
                    consumers[idx] = Consumer::Service(services.len());
                    services.push(Service {
                        name: name.clone(),
                        interface: Some(name.clone()),
                        scaler: ScalerState::new(
                            name.clone(),
                            policy,
                            mode,
                            config.scaler,
                            settings.cpu,
                            settings.memory,
                            0.0,
                        ),
                        rng: stream(config.seed, &format!("service:{name}")),
                        service_time: twin_time,
                        delivered: 0,
                        completed: 0,
                        failed: 0,
                        latency: Vec::new(),
                    });
                }
            }
        }
        let sc = config.store_service;
        let store_mode = match config.provisioning {
            Provisioning::Auto => ProvisioningMode::Auto,
            Provisioning::Fixed { store, .. } => ProvisioningMode::Fixed(store),
        };
        let store_service = services.len();
        services.push(Service {
            name: STORE_SERVICE.into(),
            interface: None,
            scaler: ScalerState::new(
                STORE_SERVICE,
                AutoscalePolicy { target: sc.target, min_replicas: sc.min_replicas, max_replicas: sc.max_replicas },
                store_mode,
                config.scaler,
                sc.cpu,
                sc.memory,
                0.0,
            ),
            rng: stream(config.seed, &format!("service:{STORE_SERVICE}")),
            service_time: store_time,
            delivered: 0,
            completed: 0,
            failed: 0,
            latency: Vec::new(),
        });

        let workload = Workload::new(&config, &graph);
        let mut store = store;
        store.set_known_instances(graph.instances().map(|i| i.name.clone()));
        let engine = Engine {
            config,
            graph,
            registry,
            broker,
            store,
            workload,
            queue: EventQueue::new(),
            services,
            dispatchers,
            consumers,
            store_service,
            trace: Vec::new(),
            virtual_delivered: 0,
        };
        Ok((engine, plan))
    }

    fn run(mut self, plan: TopologyPlan) -> (RunResult, EventStore) {
        let duration = self.config.duration;
        for i in 0..self.workload.len() {
            if let Some(t) = self.workload.first_publish(i) {
                self.queue.schedule(t, SimEvent::DevicePublish { publisher: i });
            }
        }
        if duration > 0.0 {
            self.queue.schedule(0.0, SimEvent::ScalerTick);
        }
        while let Some((now, event)) = self.queue.pop() {
            match event {
                SimEvent::DevicePublish { publisher } => self.on_publish(publisher, now),
                SimEvent::ScalerTick => self.on_tick(now),
                SimEvent::DispatcherDrain { dispatcher } => self.on_drain(dispatcher, now),
                SimEvent::ReplicaReady { service, replica } => {
                    let placed = self.services[service].scaler.mark_ready(replica, now);
                    self.start_all(service, placed, now);
                }
                SimEvent::HandlerComplete { service, replica, work } => self.on_complete(service, replica, work, now),
            }
        }
        self.finish(plan)
    }

    fn on_publish(&mut self, publisher: usize, now: f64) {
        let (topic, payload) = self.workload.emit(publisher, now);
        let id = self.broker.next_id();
        let out = self.broker.publish_mqtt(EventEnvelope::mqtt(id, now, topic, payload), now);
        self.deliver(out, now);
        if let Some(next) = self.workload.next_publish(publisher, now) {
            self.queue.schedule(next, SimEvent::DevicePublish { publisher });
        }
    }

    fn on_tick(&mut self, now: f64) {
        for s in 0..self.services.len() {
            let svc = &mut self.services[s];
            let (rec, row) = svc.scaler.tick(now, &mut svc.rng);
            self.trace.push(row);
            self.schedule_ready(s, rec.spawned);
        }
        let next = now + self.config.scaler.tick;
        if next < self.config.duration {
            self.queue.schedule(next, SimEvent::ScalerTick);
        }
    }

    fn schedule_ready(&mut self, service: usize, spawned: Vec<Spawned>) {
        for sp in spawned {
            self.queue.schedule(sp.ready_at, SimEvent::ReplicaReady { service, replica: sp.id });
        }
    }

    /// Hands freshly enqueued envelopes to their consumers.
    fn deliver(&mut self, outcome: PublishOutcome, now: f64) {
        let PublishOutcome::Routed(targets) = outcome else { return };
        for q in targets {
            match self.consumers[q] {
                Consumer::Dispatcher(d) => self.wake(d, now),
                Consumer::Service(s) => {
                    let env = self.broker.pop(q).expect("just enqueued");
                    self.admit(s, Work { envelope: env, target: None }, now);
                }
                Consumer::Devices => {
                    self.broker.pop(q);
                    self.virtual_delivered += 1;
                }
                Consumer::None => {}
            }
        }
    }

    fn wake(&mut self, d: usize, now: f64) {
        let disp = &mut self.dispatchers[d];
        if !disp.busy {
            disp.busy = true;
            self.queue.schedule(now + 1.0 / disp.rate, SimEvent::DispatcherDrain { dispatcher: d });
        }
    }

    fn on_drain(&mut self, d: usize, now: f64) {
        let (role, q) = (self.dispatchers[d].role, self.dispatchers[d].queue);
        if let Some(env) = self.broker.pop(q) {
            self.dispatchers[d].processed += 1;
            match role {
                DispatcherRole::Mqtt => {
                    let id = self.broker.next_id();
                    match mqtt_to_cloudevent(&env, id) {
                        Ok(ce) => {
                            let out = self.broker.publish_cloudevent(ce, now);
                            self.deliver(out, now);
                        }
                        Err(e) => self.dispatch_failed(d, &env, &e.to_string(), now),
                    }
                }
                DispatcherRole::CloudEvent => {
                    let id = self.broker.next_id();
                    match cloudevent_to_mqtt(&env, id) {
                        Ok(m) => {
                            let out = self.broker.publish_mqtt(m, now);
                            self.deliver(out, now);
                        }
                        Err(e) => self.dispatch_failed(d, &env, &e.to_string(), now),
                    }
                }
                DispatcherRole::EventStore => match store_target(&env) {
                    Ok(key) => self.admit(self.store_service, Work { envelope: env, target: Some(key) }, now),
                    Err(e) => self.dispatch_failed(d, &env, &e.to_string(), now),
                },
            }
        }
        let disp = &mut self.dispatchers[d];
        if self.broker.queue(q).is_empty() {
            disp.busy = false;
        } else {
            self.queue.schedule(now + 1.0 / disp.rate, SimEvent::DispatcherDrain { dispatcher: d });
        }
    }

    fn dispatch_failed(&mut self, d: usize, env: &EventEnvelope, reason: &str, now: f64) {
        self.dispatchers[d].failed += 1;
        self.broker.dead_letter(now, env, reason);
    }

    fn admit(&mut self, s: usize, work: Work, now: f64) {
        let svc = &mut self.services[s];
        svc.delivered += 1;
        let (placement, spawned, work) = svc.scaler.admit(work, now, &mut svc.rng);
        self.schedule_ready(s, spawned);
        if let (Placement::Placed(replica), Some(work)) = (placement, work) {
            self.start(s, replica, work, now);
        }
    }

    fn start(&mut self, s: usize, replica: u64, work: Work, now: f64) {
        let svc = &mut self.services[s];
        let dt = svc.service_time.sample(&mut svc.rng);
        self.queue.schedule(now + dt, SimEvent::HandlerComplete { service: s, replica, work });
    }

    fn start_all(&mut self, s: usize, placed: Vec<(u64, Work)>, now: f64) {
        for (replica, work) in placed {
            self.start(s, replica, work, now);
        }
    }

    fn on_complete(&mut self, s: usize, replica: u64, work: Work, now: f64) {
        let origin = work.envelope.time;
        let ok = if s == self.store_service {
            let key = work.target.expect("store work carries its key");
            self.store.append(&key.interface, &key.instance, now, work.envelope.payload).is_ok()
        } else {
            let iface_name = self.services[s].interface.clone().expect("twin service");
            let iface = self.graph.interface(&iface_name).expect("graph interface");
            match handle(&self.registry, &self.graph, &self.store, iface, &work.envelope) {
                Ok(emissions) => {
                    for e in emissions {
                        let id = self.broker.next_id();
                        let ce = EventEnvelope::cloud_event(
                            id,
                            origin,
                            e.key.event_type().encode(),
                            e.key.instance.clone(),
                            e.payload,
                        );
                        let out = self.broker.publish_cloudevent(ce, now);
                        self.deliver(out, now);
                    }
                    true
                }
                Err(err) => {
                    self.broker.dead_letter(now, &work.envelope, &format!("handler: {err}"));
                    false
                }
            }
        };
        let svc = &mut self.services[s];
        if ok {
            svc.completed += 1;
            svc.latency.push(LatencySample { time: origin, latency: now - origin });
        } else {
            svc.failed += 1;
        }
        let placed = svc.scaler.complete(replica, now);
        self.start_all(s, placed, now);
    }

    fn finish(self, plan: TopologyPlan) -> (RunResult, EventStore) {
        let end_time = self.queue.now();
        let seconds = self.config.duration.max(end_time).ceil() as usize;
        let mut reports = Vec::new();
        let mut usages = Vec::new();
        let mut latency = BTreeMap::new();
        for svc in self.services {
            let (min_replicas, max_replicas) = match svc.scaler.mode {
                ProvisioningMode::Auto => (svc.scaler.policy.min_replicas, svc.scaler.policy.max_replicas),
                ProvisioningMode::Fixed(n) => (n, n),
            };
            let in_flight = svc.scaler.in_flight() as u64;
            let max_seen = svc.scaler.max_replicas_seen();
            let (usage, leftover) = svc.scaler.finish(seconds);
            usages.push(usage.clone());
            reports.push(ServiceReport {
                name: svc.name.clone(),
                delivered: svc.delivered,
                completed: svc.completed,
                failed: svc.failed,
                unfinished: leftover.len() as u64 + in_flight,
                min_replicas,
                max_replicas,
                max_replicas_seen: max_seen,
                usage,
            });
            latency.insert(svc.name, svc.latency);
        }
        let resources = resource_series(&usages, self.config.cpu_usage, self.config.memory_usage);
        let (broker, dead_letters, dead_letter_count) = self.broker.finish(seconds);
        let dispatchers = self
            .dispatchers
            .iter()
            .map(|d| DispatcherReport {
                role: d.role,
                queue: d.role.queue_name().to_string(),
                lanes: d.lanes,
                rate: d.rate,
                processed: d.processed,
                failed: d.failed,
            })
            .collect();
        let mut result = RunResult {
            config: self.config,
            topology: plan,
            seconds,
            end_time,
            generated: self.workload.stats,
            broker,
            dead_letter_count,
            dispatchers,
            services: reports,
            resources,
            trace: self.trace,
            store: self.store.stats().clone(),
            virtual_delivered: self.virtual_delivered,
            latency,
            dead_letters,
            summary_hash: String::new(),
        };
        result.summary_hash = result.compute_hash();
        (result, self.store)
    }
}

/// Runs the smart city scenario with an in-memory store.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, ConfigError> {
    let retention = if config.retain_history { Retention::Full } else { Retention::LatestOnly };
    run_with_store(config, EventStore::with_retention(retention)).map(|(r, _)| r)
}

/// Runs the smart city scenario against `store`, returning it afterwards.
pub fn run_with_store(config: &ScenarioConfig, store: EventStore) -> Result<(RunResult, EventStore), ConfigError> {
    config.validate()?;
    let graph = city_graph(config.neighborhoods)?;
    run_graph(config, graph, store)
}

/// Runs an arbitrary twin graph; instances of interfaces with a publish
/// schedule act as devices.
pub fn run_graph(
    config: &ScenarioConfig,
    graph: TwinGraph,
    store: EventStore,
) -> Result<(RunResult, EventStore), ConfigError> {
    let (engine, plan) = Engine::new(config.clone(), graph, store)?;
    Ok(engine.run(plan))
}
