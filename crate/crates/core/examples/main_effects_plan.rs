//! Lists the one-factor-at-a-time sweep and the levels each run changes.
//! `plume-inv main-effects` runs exactly these configurations.

use plume_inversion::harness::commands::main_effects_configs;
use plume_inversion::harness::ScenarioConfig;

fn main() {
    let base = ScenarioConfig::default();
    println!("{:8} {:>6} {:>5} {:>9} {:>5} {:>5} {:>12}", "run", "WDC", "DPV", "SER", "DTS", "OPS", "SL");
    for (label, _, _, c) in main_effects_configs(&base) {
        let d = c.dpv();
        println!(
            "{label:8} {:6.0} {:5.2} {:9.2e} {:5.0} {:5} {:>12?}",
            c.wdc(),
            d.a_h,
            c.ser(),
            c.dts(),
            c.ops(),
            c.sl()
        );
    }
}
