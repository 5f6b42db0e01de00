//! Discrete-event smart city simulation.

pub mod city;
pub mod config;
mod queue;
mod result;
mod sim;
pub mod workload;

pub use city::{build_city, city_graph, city_interfaces, city_resources, INSTANCES_PER_NEIGHBORHOOD};
pub use config::{
    AutoscaleOverrides, ConfigError, DispatcherLanes, IntervalSpec, Provisioning, ScenarioConfig, ServiceTime,
    StoreServiceConfig,
};
pub use queue::{EventQueue, Ranked};
pub use result::{DispatcherReport, LatencySample, RunResult, ServiceReport, STORE_SERVICE};
pub use sim::{run, run_graph, run_with_store, DEVICE_SUBSCRIBERS};
pub use workload::{GeneratedStats, Workload};
