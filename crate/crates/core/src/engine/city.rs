//! The smart city twin model and its per-neighborhood instance layout.

use super::config::*;
use crate::definitions::{
    resolve_graph, AutoscalePolicy, CommandDef, Definitions, Multiplicity, PrimitiveSchema,
    PropertyDef, PropertyValue, RelationshipDef, Resource, RoutingSettings, Schema, ServiceSettings, TwinGraph,
    TwinInstance, TwinInterface, DEFAULT_POD_CPU, DEFAULT_POD_MEMORY,
};
use crate::runtime::handler_ids::*;
use crate::runtime::{UPDATE_AQI, UPDATE_VEHICLE_COUNT};

/// Observations per neighborhood for each pole-attached kind.
pub const POLES: usize = 50;
pub const PARKING_SPOTS: usize = 20;
pub const DEVICES: usize = 220;
/// Instances per neighborhood.
pub const INSTANCES_PER_NEIGHBORHOOD: usize = 1 + POLES * 7 + 1 + 1 + PARKING_SPOTS + DEVICES;

/// Observation interfaces attached to a pole, with their name prefix.
const OBSERVATIONS: [(&str, &str); 6] = [
    (INTERFACE_AIR_QUALITY, "airquality"),
    (INTERFACE_NOISE, "noise"),
    (INTERFACE_WEATHER, "weather"),
    (INTERFACE_CROWD, "crowdflow"),
    (INTERFACE_TRAFFIC, "trafficflow"),
    (INTERFACE_STREETLIGHT, "streetlight"),
];

/// Device relationships: (relationship, target interface, owner prefix, owners).
const DEVICE_OWNERS: [(&str, &str, &str, usize); 5] = [
    ("refAirQualityObserved", INTERFACE_AIR_QUALITY, "airquality", POLES),
    ("refNoiseLevelObserved", INTERFACE_NOISE, "noise", POLES),
    ("refWeatherObserved", INTERFACE_WEATHER, "weather", POLES),
    ("refTrafficFlowObserved", INTERFACE_TRAFFIC, "trafficflow", POLES),
    ("refParkingSpot", INTERFACE_PARKING_SPOT, "parkingspot", PARKING_SPOTS),
];

fn float(name: &str) -> PropertyDef {
    PropertyDef { name: name.into(), description: String::new(), schema: Schema::Primitive(PrimitiveSchema::Float) }
}

fn typed(name: &str, p: PrimitiveSchema) -> PropertyDef {
    PropertyDef { name: name.into(), description: String::new(), schema: Schema::Primitive(p) }
}

fn enumeration(name: &str, values: &[&str]) -> PropertyDef {
    PropertyDef {
        name: name.into(),
        description: String::new(),
        schema: Schema::Enumeration(values.iter().map(|v| v.to_string()).collect()),
    }
}

fn rel(name: &str, target: &str) -> RelationshipDef {
    RelationshipDef { name: name.into(), description: String::new(), target: target.into(), multiplicity: Multiplicity::One }
}

fn command(name: &str) -> CommandDef {
    CommandDef { name: name.into(), description: String::new(), schema: None }
}

fn service(handler: &str) -> Option<ServiceSettings> {
    Some(ServiceSettings {
        handler: handler.into(),
        cpu: DEFAULT_POD_CPU,
        memory: DEFAULT_POD_MEMORY,
        autoscale: AutoscalePolicy::default(),
    })
}

fn iface(name: &str, description: &str) -> TwinInterface {
    let mut i = TwinInterface::new(name);
    i.description = description.into();
    i
}

/// The twelve smart city interfaces, ten of them serviced.
pub fn city_interfaces() -> Vec<TwinInterface> {
    use PrimitiveSchema::*;
    let mut out = Vec::new();

    let mut n = iface(INTERFACE_NEIGHBORHOOD, "City neighborhood");
    n.properties = vec![typed("airQualityIndex", Integer), typed("warning", Boolean)];
    n.commands = vec![command(UPDATE_AQI)];
    n.service = service(NEIGHBORHOOD_AQI);
    out.push(n);

    let mut p = iface(INTERFACE_POLE, "Smart pole");
    p.properties = vec![typed("airQualityIndex", Integer)];
    p.relationships = vec![rel("refNeighborhood", INTERFACE_NEIGHBORHOOD)];
    p.commands = vec![command(UPDATE_AQI)];
    p.service = service(POLE_RELAY);
    p.routing.persist_store_events = false;
    out.push(p);

    let mut aq = iface(INTERFACE_AIR_QUALITY, "Air quality observation");
    aq.properties = vec![float("co2"), float("co"), float("so2"), typed("airQualityIndex", Integer)];
    aq.relationships = vec![rel("refPole", INTERFACE_POLE)];
    aq.service = service(AIR_QUALITY);
    out.push(aq);

    let mut noise = iface(INTERFACE_NOISE, "Noise level observation");
    noise.properties = vec![float("LAeq")];
    noise.relationships = vec![rel("refPole", INTERFACE_POLE)];
    noise.routing = RoutingSettings { persist_real_directly: true, persist_store_events: true };
    out.push(noise);

    let mut w = iface(INTERFACE_WEATHER, "Weather observation");
    w.properties = [
        "temperature",
        "relativeHumidity",
        "atmosphericPressure",
        "precipitation",
        "snowHeight",
        "windDirection",
        "windSpeed",
    ]
    .iter()
    .map(|n| float(n))
    .collect();
    w.relationships = vec![rel("refPole", INTERFACE_POLE)];
    w.service = service(WEATHER);
    out.push(w);

    let mut crowd = iface(INTERFACE_CROWD, "Crowd flow observation");
    crowd.properties = vec![typed("peopleCount", Integer), float("averageCrowdSpeed"), typed("congested", Boolean)];
    crowd.relationships = vec![rel("refPole", INTERFACE_POLE)];
    crowd.service = service(PASSTHROUGH);
    out.push(crowd);

    let mut traffic = iface(INTERFACE_TRAFFIC, "Traffic flow observation");
    traffic.properties = vec![float("intensity"), float("averageVehicleSpeed"), float("averageHeadwayTime")];
    traffic.relationships = vec![rel("refPole", INTERFACE_POLE)];
    traffic.service = service(PASSTHROUGH);
    out.push(traffic);

    let mut light = iface(INTERFACE_STREETLIGHT, "Streetlight");
    light.properties = vec![enumeration("powerState", &["on", "off"])];
    light.relationships = vec![rel("refPole", INTERFACE_POLE)];
    light.service = service(PASSTHROUGH);
    out.push(light);

    let mut ev = iface(INTERFACE_EV, "EV charging station");
    ev.properties = vec![enumeration("status", &["working", "outOfService", "withIncidences"])];
    ev.relationships = vec![rel("refNeighborhood", INTERFACE_NEIGHBORHOOD)];
    ev.routing = RoutingSettings { persist_real_directly: true, persist_store_events: true };
    out.push(ev);

    let mut off = iface(INTERFACE_OFFSTREET, "Off-street parking");
    off.properties = vec![typed("totalSpotNumber", Integer), typed("availableSpotNumber", Integer)];
    off.relationships = vec![rel("refNeighborhood", INTERFACE_NEIGHBORHOOD)];
    off.commands = vec![command(UPDATE_VEHICLE_COUNT)];
    off.service = service(OFFSTREET_PARKING);
    out.push(off);

    let mut spot = iface(INTERFACE_PARKING_SPOT, "Parking spot");
    spot.properties = vec![enumeration("status", &["free", "occupied", "closed"])];
    spot.relationships = vec![rel("refOffStreetParking", INTERFACE_OFFSTREET)];
    spot.service = service(PARKING_SPOT);
    spot.routing.persist_store_events = false;
    out.push(spot);

    let mut dev = iface(INTERFACE_DEVICE, "Sensor device");
    dev.properties = vec![float("batteryLevel")];
    dev.relationships = DEVICE_OWNERS.iter().map(|(r, t, _, _)| rel(r, t)).collect();
    dev.service = service(DEVICE_BATTERY);
    out.push(dev);

    out
}

fn name(prefix: &str, hood: u32, i: usize) -> String {
    format!("{prefix}-{hood:02}-{i:03}")
}

/// Instances of neighborhood `hood` (1-based).
pub fn neighborhood_instances(hood: u32) -> Vec<TwinInstance> {
    let mut out = Vec::with_capacity(INSTANCES_PER_NEIGHBORHOOD);
    let nb = format!("neighborhood-{hood:02}");
    out.push(TwinInstance::new(&nb, INTERFACE_NEIGHBORHOOD));
    for i in 0..POLES {
        let pole = name("pole", hood, i);
        out.push(TwinInstance::new(&pole, INTERFACE_POLE).with_relationship("refNeighborhood", INTERFACE_NEIGHBORHOOD, &nb));
        for (iface, prefix) in OBSERVATIONS {
            out.push(TwinInstance::new(name(prefix, hood, i), iface).with_relationship("refPole", INTERFACE_POLE, &pole));
        }
    }
    out.push(
        TwinInstance::new(format!("evcharger-{hood:02}"), INTERFACE_EV)
            .with_relationship("refNeighborhood", INTERFACE_NEIGHBORHOOD, &nb),
    );
    let parking = format!("offstreetparking-{hood:02}");
    out.push(
        TwinInstance::new(&parking, INTERFACE_OFFSTREET)
            .with_relationship("refNeighborhood", INTERFACE_NEIGHBORHOOD, &nb)
            .with_property("totalSpotNumber", PropertyValue::Integer(PARKING_SPOTS as i64)),
    );
    for i in 0..PARKING_SPOTS {
        out.push(
            TwinInstance::new(name("parkingspot", hood, i), INTERFACE_PARKING_SPOT).with_relationship(
                "refOffStreetParking",
                INTERFACE_OFFSTREET,
                &parking,
            ),
        );
    }
    let mut d = 0;
    for (relationship, target, prefix, owners) in DEVICE_OWNERS {
        for i in 0..owners {
            out.push(
                TwinInstance::new(name("device", hood, d), INTERFACE_DEVICE).with_relationship(
                    relationship,
                    target,
                    &name(prefix, hood, i),
                ),
            );
            d += 1;
        }
    }
    debug_assert_eq!(d, DEVICES);
    out
}

/// Interfaces and instances of an `n`-neighborhood city.
pub fn build_city(n: u32) -> Result<Definitions, ConfigError> {
    if n < 1 {
        return Err(ConfigError::Invalid("a city needs at least one neighborhood".into()));
    }
    let mut instances = Vec::with_capacity(n as usize * INSTANCES_PER_NEIGHBORHOOD);
    for hood in 1..=n {
        instances.extend(neighborhood_instances(hood));
    }
    Ok(Definitions { interfaces: city_interfaces(), instances })
}

pub fn city_graph(n: u32) -> Result<TwinGraph, ConfigError> {
    let d = build_city(n)?;
    resolve_graph(&d.interfaces, &d.instances).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// The city as resources, interfaces first.
pub fn city_resources(n: u32) -> Result<Vec<Resource>, ConfigError> {
    let d = build_city(n)?;
    Ok(d.interfaces.into_iter().map(Resource::Interface).chain(d.instances.into_iter().map(Resource::Instance)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::derive_topology;

    #[test]
    fn one_neighborhood() {
        let g = city_graph(1).unwrap();
        assert_eq!(g.instance_count(), 593);
        assert_eq!(g.instances_of(INTERFACE_DEVICE).len(), 220);
        assert_eq!(g.interfaces().filter(|i| i.is_serviced()).count(), 10);
        let plan = derive_topology(&g).unwrap();
        assert_eq!(plan.queues.len(), 13);
        assert!(build_city(0).is_err());
    }

    #[test]
    fn yaml_export_parses_back() {
        let text = crate::definitions::to_yaml(&city_resources(1).unwrap());
        let d = crate::definitions::parse_definitions(&[text]).unwrap();
        assert_eq!(d, build_city(1).unwrap());
    }
}
