//! Handler SDK and the built-in smart city twin services.

pub mod aqi;
mod handlers;
pub mod weather;

pub use handlers::{
    available_spots, SpotStatus, UPDATE_AQI, UPDATE_VEHICLE_COUNT, in_window_max, AirQualityHandler, DeviceBatteryHandler, NeighborhoodHandler, OffStreetParkingHandler,
    ParkingSpotHandler, PassThroughHandler, PoleRelayHandler, RuntimeSettings, WeatherHandler,
};

use crate::broker::{cloudevent_key, EventEnvelope};
use crate::definitions::{PropertyValue, RelationshipRef, TwinGraph, TwinInterface};
use crate::routing::{EventCategory, RoutingKey};
use crate::store::{EventStore, StoredEvent};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HandlerError {
    #[error("envelope is not a valid twin event: {0}")]
    BadEnvelope(String),
    #[error("event for `{found}` delivered to `{expected}`")]
    WrongInterface { expected: String, found: String },
    #[error("no handler registered as `{0}`")]
    NoHandler(String),
    #[error("instance `{instance}` has no relationship `{relationship}`")]
    MissingRelationship { instance: String, relationship: String },
    #[error("interface `{interface}` declares no command `{command}`")]
    UnknownCommand { interface: String, command: String },
    #[error("bad payload: {0}")]
    BadPayload(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("unexpected event `{0}`")]
    Unexpected(String),
}

/// An event emitted by a handler, addressed by full routing key.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub key: RoutingKey,
    pub payload: Vec<u8>,
}

/// Read access to the latest stored state of twins.
pub trait LatestState {
    fn latest(&self, interface: &str, instance: &str) -> Option<&StoredEvent>;
}

impl LatestState for EventStore {
    fn latest(&self, interface: &str, instance: &str) -> Option<&StoredEvent> {
        EventStore::latest(self, interface, instance)
    }
}

/// Incoming event as seen by a handler.
#[derive(Debug, Clone, Copy)]
pub struct IncomingEvent<'a> {
    pub key: &'a RoutingKey,
    /// Occurrence time, simulated seconds.
    pub time: f64,
    pub payload: &'a [u8],
}

/// Handler view of one twin instance. Emissions always carry this
/// instance's identity; commands can only reach related instances.
pub struct HandlerContext<'a> {
    instance: &'a str,
    interface: &'a str,
    graph: &'a TwinGraph,
    store: &'a dyn LatestState,
    emissions: Vec<Emission>,
}

impl<'a> HandlerContext<'a> {
    pub fn new(instance: &'a str, interface: &'a str, graph: &'a TwinGraph, store: &'a dyn LatestState) -> Self {
        HandlerContext { instance, interface, graph, store, emissions: Vec::new() }
    }

    pub fn instance(&self) -> &str {
        self.instance
    }

    pub fn interface(&self) -> &str {
        self.interface
    }

    pub fn property(&self, name: &str) -> Option<&PropertyValue> {
        self.graph.instance(self.instance)?.properties.get(name)
    }

    pub fn relationship(&self, name: &str) -> Option<&RelationshipRef> {
        self.graph.relationship_targets(self.instance, name)
    }

    /// Latest stored state of this instance.
    pub fn latest_own(&self) -> Option<&StoredEvent> {
        self.store.latest(self.interface, self.instance)
    }

    pub fn latest(&self, interface: &str, instance: &str) -> Option<&StoredEvent> {
        self.store.latest(interface, instance)
    }

    fn own_key(&self, category: EventCategory) -> RoutingKey {
        RoutingKey::new(category, self.interface, self.instance, None).expect("graph names are valid segments")
    }

    pub fn emit_store(&mut self, payload: Vec<u8>) {
        let key = self.own_key(EventCategory::Store);
        self.emissions.push(Emission { key, payload });
    }

    pub fn emit_virtual(&mut self, payload: Vec<u8>) {
        let key = self.own_key(EventCategory::Virtual);
        self.emissions.push(Emission { key, payload });
    }

    /// Sends `command` to every target of `relationship`.
    pub fn emit_command(&mut self, relationship: &str, command: &str, payload: Vec<u8>) -> Result<usize, HandlerError> {
        let rel = self.relationship(relationship).ok_or_else(|| HandlerError::MissingRelationship {
            instance: self.instance.to_string(),
            relationship: relationship.to_string(),
        })?;
        let mut out = Vec::new();
        for target in &rel.instances {
            let inst = self.graph.instance(target).ok_or_else(|| HandlerError::MissingRelationship {
                instance: self.instance.to_string(),
                relationship: relationship.to_string(),
            })?;
            let iface = self.graph.interface(&inst.interface).expect("validated graph");
            if iface.command(command).is_none() {
                return Err(HandlerError::UnknownCommand { interface: iface.name.clone(), command: command.to_string() });
            }
            let key = RoutingKey::new(EventCategory::Command, &iface.name, target, Some(command.to_string()))
                .map_err(|e| HandlerError::BadEnvelope(e.to_string()))?;
            out.push(Emission { key, payload: payload.clone() });
        }
        let n = out.len();
        self.emissions.extend(out);
        Ok(n)
    }

    pub fn into_emissions(self) -> Vec<Emission> {
        self.emissions
    }
}

/// A twin service implementation.
pub trait TwinHandler: Send + Sync {
    fn handle(&self, event: &IncomingEvent<'_>, ctx: &mut HandlerContext<'_>) -> Result<(), HandlerError>;
}

/// Ids of the built-in handlers.
pub mod handler_ids {
    pub const AIR_QUALITY: &str = "air-quality";
    pub const POLE_RELAY: &str = "pole-relay";
    pub const NEIGHBORHOOD_AQI: &str = "neighborhood-aqi";
    pub const WEATHER: &str = "weather";
    pub const PARKING_SPOT: &str = "parking-spot";
    pub const OFFSTREET_PARKING: &str = "offstreet-parking";
    pub const DEVICE_BATTERY: &str = "device-battery";
    pub const PASSTHROUGH: &str = "passthrough";
}

/// Handlers keyed by handler id.
#[derive(Clone, Default)]
pub struct HandlerRegistry {
    handlers: BTreeMap<String, Arc<dyn TwinHandler>>,
}

impl std::fmt::Debug for HandlerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.handlers.keys()).finish()
    }
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All built-in smart city handlers.
    pub fn builtin(settings: &RuntimeSettings) -> Self {
        use handler_ids::*;
        let mut r = Self::new();
        r.register(AIR_QUALITY, AirQualityHandler::default());
        r.register(POLE_RELAY, PoleRelayHandler);
        r.register(NEIGHBORHOOD_AQI, NeighborhoodHandler { window: settings.neighborhood_window });
        r.register(WEATHER, WeatherHandler { compression: settings.time_compression, feels_like: settings.feels_like });
        r.register(PARKING_SPOT, ParkingSpotHandler);
        r.register(OFFSTREET_PARKING, OffStreetParkingHandler);
        r.register(DEVICE_BATTERY, DeviceBatteryHandler { threshold: settings.battery_threshold });
        r.register(PASSTHROUGH, PassThroughHandler);
        r
    }

    pub fn register(&mut self, id: &str, handler: impl TwinHandler + 'static) {
        self.handlers.insert(id.to_string(), Arc::new(handler));
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn TwinHandler>> {
        self.handlers.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(String::as_str)
    }
}

/// Runs the handler of `interface` on a dispatched CloudEvent.
///
/// Interfaces without a service that persist real events directly yield
/// a single store emission carrying the payload.
pub fn handle(
    registry: &HandlerRegistry,
    graph: &TwinGraph,
    store: &dyn LatestState,
    interface: &TwinInterface,
    envelope: &EventEnvelope,
) -> Result<Vec<Emission>, HandlerError> {
    let key = cloudevent_key(envelope).map_err(|e| HandlerError::BadEnvelope(e.to_string()))?;
    if key.interface != interface.name {
        return Err(HandlerError::WrongInterface { expected: interface.name.clone(), found: key.interface });
    }
    let Some(service) = &interface.service else {
        if interface.routing.persist_real_directly && key.category == EventCategory::Real {
            let store_key = RoutingKey::new(EventCategory::Store, &key.interface, &key.instance, None)
                .map_err(|e| HandlerError::BadEnvelope(e.to_string()))?;
            return Ok(vec![Emission { key: store_key, payload: envelope.payload.clone() }]);
        }
        return Err(HandlerError::NoHandler(interface.name.clone()));
    };
    let handler = registry.get(&service.handler).ok_or_else(|| HandlerError::NoHandler(service.handler.clone()))?;
    let mut ctx = HandlerContext::new(&key.instance, &interface.name, graph, store);
    let event = IncomingEvent { key: &key, time: envelope.time, payload: &envelope.payload };
    handler.handle(&event, &mut ctx)?;
    Ok(ctx.into_emissions())
}
