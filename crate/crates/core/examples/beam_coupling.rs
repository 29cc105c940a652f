//! Coupling matrix for two open-path beams and a point sensor. A beam
//! reports the average over receptors spaced along its path.

use plume_inversion::plume::{AscTables, AtmosphereSpec, DispersionSpec, DraxlerParams, SourceGeometry};
use plume_inversion::sensing::{coupling_matrix, Sensor, SensorArray, SensorGeometry};
use plume_inversion::wind::WindRecord;

fn main() -> plume_inversion::Result<()> {
    let array = SensorArray {
        sample_rate: 1.0,
        beam_spacing: 1.0,
        sensors: vec![
            Sensor {
                id: "beam-near".into(),
                geometry: SensorGeometry::Beam {
                    origin: [40.0, -30.0, 2.0],
                    reflector: [40.0, 30.0, 2.0],
                },
            },
            Sensor {
                id: "beam-far".into(),
                geometry: SensorGeometry::Beam {
                    origin: [80.0, -30.0, 2.0],
                    reflector: [80.0, 30.0, 2.0],
                },
            },
            Sensor {
                id: "point".into(),
                geometry: SensorGeometry::Point { position: [40.0, 0.0, 2.0] },
            },
        ],
    };
    let n = 5;
    let wind = WindRecord {
        times: (0..n).map(f64::from).collect(),
        speed: vec![4.0; n as usize],
        direction: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        gamma_h: vec![0.25; n as usize],
        gamma_v: vec![0.15; n as usize],
    };
    let source = SourceGeometry {
        location: [0.0, 0.0, 1.0],
        height: 1.0,
        half_width: 0.5,
        half_height: 0.5,
    };
    let a = coupling_matrix(
        &[source],
        &array,
        &wind,
        &DispersionSpec::Draxler(DraxlerParams::UNIT),
        &AtmosphereSpec::default(),
        &AscTables::shipped(),
    )?;
    println!("ppm per kg/s; rows are sensor-major, one per time step");
    for (k, id) in array.ids().iter().flat_map(|id| std::iter::repeat_n(id, n as usize)).enumerate() {
        println!("{id:>10} t={} {:12.5e}", k % n as usize, a.get(k, 0));
    }
    Ok(())
}
