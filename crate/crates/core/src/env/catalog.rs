use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{InspectionReport, SatelliteModel, SatellitePart, Vec3};

fn part(name: &str, dimension: &str, attributes: &str, offset: (f64, f64, f64)) -> SatellitePart {
    SatellitePart {
        name: name.to_string(),
        dimension: dimension.to_string(),
        attributes: attributes.to_string(),
        offset: Vec3::new(offset.0, offset.1, offset.2),
    }
}

fn report(parts: &[SatellitePart]) -> InspectionReport {
    let mut r = InspectionReport::default();
    for p in parts {
        let slot = r.get_mut(&p.dimension).expect("builtin dimension");
        if !slot.is_empty() {
            slot.push_str("; ");
        }
        slot.push_str(&p.attributes);
    }
    r
}

fn model(id: &str, position: Vec3, radius: f64, luminance: f64, parts: Vec<SatellitePart>) -> SatelliteModel {
    let ground_truth_report = report(&parts);
    SatelliteModel {
        id: String::from(id),
        position,
        bounding_radius: radius,
        base_luminance: luminance,
        parts,
        ground_truth_report,
    }
}

/// The five shipped targets.
pub fn builtin_satellites() -> Vec<SatelliteModel> {
    vec![
        model(
            "CAPSTONE",
            Vec3::new(40.0, 0.0, 0.0),
            0.6,
            140.0,
            vec![
                part("bus", "structure", "compact 12U cubesat bus wrapped in gold thermal blanket", (0.0, 0.0, 0.0)),
                part("solar_wings", "power", "two deployable solar array wings", (0.0, 0.5, 0.0)),
                part("antenna", "communication", "patch antennas beside a small high gain dish", (-0.2, -0.3, -0.2)),
                part("thrusters", "payload", "hydrazine propulsion module with eight thrusters", (0.3, 0.0, 0.2)),
                part("blanket", "surface", "intact gold foil with minor discoloration", (-0.3, 0.0, 0.0)),
            ],
        ),
        model(
            "IBEX",
            Vec3::new(40.0, 10.0, 0.0),
            0.8,
            150.0,
            vec![
                part("octagon", "structure", "octagonal aluminum honeycomb deck", (0.0, 0.0, 0.0)),
                part("top_panel", "power", "body mounted solar cells on the top deck", (0.0, 0.0, -0.5)),
                part("whip_antenna", "communication", "s band omnidirectional antennas", (0.3, 0.4, 0.0)),
                part("sensors", "payload", "two energetic neutral atom imagers", (-0.4, -0.2, 0.1)),
                part("deck", "surface", "white thermal paint with scattered micrometeoroid pits", (0.2, -0.4, 0.2)),
            ],
        ),
        model(
            "BioSentinel",
            Vec3::new(40.0, -10.0, 0.0),
            0.4,
            130.0,
            vec![
                part("frame", "structure", "six unit cubesat frame with rails", (0.0, 0.0, 0.0)),
                part("array", "power", "single deployable solar array", (0.0, -0.3, 0.0)),
                part("radio", "communication", "low gain patch antennas for iris radio", (0.2, 0.1, -0.1)),
                part("biology", "payload", "yeast biosensor cards with radiation dosimeter", (-0.2, 0.1, 0.1)),
                part("skin", "surface", "anodized black aluminum panels", (0.1, 0.2, 0.1)),
            ],
        ),
        model(
            "New Horizons",
            Vec3::new(50.0, 0.0, 5.0),
            1.5,
            145.0,
            vec![
                part("triangle_bus", "structure", "triangular aluminum bus body", (0.0, 0.0, 0.0)),
                part("rtg", "power", "radioisotope thermoelectric generator on a boom", (0.2, 1.1, 0.3)),
                part("dish", "communication", "large high gain dish antenna", (-0.5, 0.0, -0.9)),
                part("instruments", "payload", "ralph and lorri imaging instruments", (0.9, -0.3, 0.2)),
                part("blanket", "surface", "gold multilayer insulation blanket", (0.4, -0.6, 0.4)),
            ],
        ),
        model(
            "Huygens",
            Vec3::new(50.0, -5.0, 0.0),
            1.4,
            125.0,
            vec![
                part("shield", "structure", "conical heat shield with front aeroshell", (0.0, 0.0, 0.0)),
                part("batteries", "power", "lithium sulfur dioxide battery modules", (-0.3, 0.5, 0.0)),
                part("relay", "communication", "probe relay antennas linking to the orbiter", (0.2, -0.6, -0.3)),
                part("descent", "payload", "parachute descent module and atmospheric sensors", (-0.6, 0.0, -0.5)),
                part("tiles", "surface", "ablative tiles with scorched cork coating", (0.7, 0.3, 0.4)),
            ],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_is_valid() {
        let sats = builtin_satellites();
        assert_eq!(sats.len(), 5);
        for s in &sats {
            s.validate().unwrap();
            for dim in InspectionReport::DIMENSIONS {
                assert!(!s.ground_truth_report.get(dim).unwrap().is_empty(), "{} {dim}", s.id);
            }
            for p in &s.parts {
                assert!(p.offset.norm() <= s.bounding_radius, "{} part {} outside radius", s.id, p.name);
            }
        }
    }
}
