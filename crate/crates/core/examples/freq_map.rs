//! Resonance frequency and Josephson inductance across the gate range.
//!
//! `cargo run --example freq_map`

use jpa_sim::constants::TWO_PI;
use jpa_sim::device::{
    calibrate_embedding, josephson_inductance, DeviceModel, JunctionModel, KerrLaw,
};

fn main() -> jpa_sim::Result<()> {
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/ic_table.csv");
    let junction = JunctionModel::from_csv(table, 1e3, None)?;
    let embedding = calibrate_embedding(6.44e9, 5.849e9, 1.3e-6)?;
    println!("bare inductance {:.3} nH", embedding.bare_inductance * 1e9);
    let kerr = KerrLaw::ParticipationCubic {
        reference_gate: 15.0,
        reference_kerr: -TWO_PI * 135e3,
    };
    let device = DeviceModel::new(junction, embedding, kerr, TWO_PI * 11e3);

    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "Vg (V)", "Ic (uA)", "LJ (nH)", "f_r (GHz)", "K (kHz)"
    );
    let (lo, hi) = device.junction.gate_range();
    for i in 0..=15 {
        let v = lo + (hi - lo) * i as f64 / 15.0;
        let ic = device.junction.critical_current_at(v)?;
        println!(
            "{v:>8.2} {:>10.3} {:>10.3} {:>10.4} {:>10.1}",
            ic * 1e6,
            josephson_inductance(ic)? * 1e9,
            device.resonance_frequency(v)? / 1e9,
            device.kerr_at_gate(v)? / TWO_PI / 1e3,
        );
    }
    Ok(())
}
