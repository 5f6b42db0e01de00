//! Dispatcher conversions between MQTT and CloudEvents.

use super::envelope::{Attributes, EventEnvelope};
use crate::routing::{EventCategory, EventType, RoutingError, RoutingKey};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("expected an MQTT envelope")]
    NotMqtt,
    #[error("expected a CloudEvent envelope")]
    NotCloudEvent,
    #[error("cannot bridge category `{0}` to MQTT")]
    NotVirtual(EventCategory),
    #[error("cannot persist category `{0}`")]
    NotPersistable(EventCategory),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// MQTT message -> CloudEvent with interface-level type and instance source.
pub fn mqtt_to_cloudevent(env: &EventEnvelope, new_id: u64) -> Result<EventEnvelope, DispatchError> {
    let Attributes::Mqtt { topic } = &env.attributes else {
        return Err(DispatchError::NotMqtt);
    };
    let key = RoutingKey::decode(topic)?;
    Ok(EventEnvelope::cloud_event(new_id, env.time, key.event_type().encode(), key.instance, env.payload.clone()))
}

/// Virtual CloudEvent -> MQTT message on the full routing key.
pub fn cloudevent_to_mqtt(env: &EventEnvelope, new_id: u64) -> Result<EventEnvelope, DispatchError> {
    let key = cloudevent_key(env)?;
    if key.category != EventCategory::Virtual {
        return Err(DispatchError::NotVirtual(key.category));
    }
    Ok(EventEnvelope::mqtt(new_id, env.time, key.encode(), env.payload.clone()))
}

/// Full routing key reconstructed from a CloudEvent's type and source.
pub fn cloudevent_key(env: &EventEnvelope) -> Result<RoutingKey, DispatchError> {
    let Attributes::CloudEvent { event_type, source } = &env.attributes else {
        return Err(DispatchError::NotCloudEvent);
    };
    Ok(EventType::decode(event_type)?.with_instance(source)?)
}

/// Key under which the event-store dispatcher persists an envelope.
/// Accepts real events (direct persistence) and store events.
pub fn store_target(env: &EventEnvelope) -> Result<RoutingKey, DispatchError> {
    let key = cloudevent_key(env)?;
    match key.category {
        EventCategory::Real | EventCategory::Store => Ok(key),
        c => Err(DispatchError::NotPersistable(c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_round_trip_restores_topic() {
        let m = EventEnvelope::mqtt(1, 3.0, "ktwin.virtual.dev.d7", b"{}".to_vec());
        let ce = mqtt_to_cloudevent(&m, 2).unwrap();
        assert_eq!(ce.address(), "ktwin.virtual.dev");
        let back = cloudevent_to_mqtt(&ce, 3).unwrap();
        assert_eq!(back.address(), "ktwin.virtual.dev.d7");
        assert_eq!(back.time, 3.0);
        assert_eq!(back.payload, m.payload);
    }

    #[test]
    fn rejects_wrong_categories() {
        let ce = EventEnvelope::cloud_event(1, 0.0, "ktwin.store.x", "i", vec![]);
        assert!(matches!(cloudevent_to_mqtt(&ce, 2), Err(DispatchError::NotVirtual(_))));
        assert!(store_target(&ce).is_ok());
        let cmd = EventEnvelope::cloud_event(1, 0.0, "ktwin.command.x.go", "i", vec![]);
        assert!(store_target(&cmd).is_err());
        let bad = EventEnvelope::mqtt(1, 0.0, "nonsense", vec![]);
        assert!(mqtt_to_cloudevent(&bad, 2).is_err());
    }
}
