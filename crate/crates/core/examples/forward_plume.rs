//! Centreline and crosswind profile of a single plume under three
//! dispersion schemes.

use plume_inversion::plume::{
    plume_concentration, receptor_frame, wind_sigmas, AscTables, AtmosphereSpec, DispersionSpec,
    DraxlerParams, SourceGeometry, StabilityClass,
};

fn main() -> plume_inversion::Result<()> {
    let tables = AscTables::shipped();
    let atmos = AtmosphereSpec::default();
    let source = SourceGeometry {
        location: [0.0, 0.0, 5.0],
        height: 5.0,
        half_width: 1.0,
        half_height: 1.0,
    };
    let schemes = [
        ("draxler (1,1,1,1)", DispersionSpec::Draxler(DraxlerParams::UNIT)),
        ("briggs D", DispersionSpec::Briggs { class: StabilityClass::D }),
        ("smith D", DispersionSpec::Smith { class: StabilityClass::D, scale: None }),
    ];
    let (speed, gamma) = (6.0, 0.3);
    println!("rate 3.9e-4 kg/s, wind 6 m/s toward +x, receptors at z = 5 m");
    for (name, spec) in &schemes {
        println!("\n{name}");
        println!("{:>8} {:>8} {:>10} {:>10} {:>12}", "x", "y", "sigma_h", "sigma_v", "ppm");
        for (x, y) in [(20.0, 0.0), (50.0, 0.0), (50.0, 10.0), (50.0, 25.0), (100.0, 0.0)] {
            let frame = receptor_frame([x, y, 5.0], &source, 0.0)?;
            let (sh, sv) = wind_sigmas(spec, &tables, &frame, gamma, gamma, &source)?;
            let c = plume_concentration(&source, 3.9e-4, &frame, sh, sv, speed, &atmos)?;
            println!("{x:8.1} {y:8.1} {sh:10.3} {sv:10.3} {c:12.5e}");
        }
    }
    Ok(())
}
