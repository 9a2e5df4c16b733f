//! Pick the gate voltage and pump settings for a target band and gain.
//!
//! `cargo run --example gate_tuning`

use jpa_sim::amplifier::tune_operating_point;
use jpa_sim::constants::TWO_PI;
use jpa_sim::device::{calibrate_embedding, DeviceModel, JunctionModel, KerrLaw};

fn main() -> jpa_sim::Result<()> {
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/ic_table.csv");
    let embedding = calibrate_embedding(6.44e9, 5.849e9, 1.3e-6)?
        .with_rates(TWO_PI * 11.0e6, TWO_PI * 0.95e6)?;
    let device = DeviceModel::new(
        JunctionModel::from_csv(table, 1e3, None)?,
        embedding,
        KerrLaw::ParticipationCubic {
            reference_gate: 15.0,
            reference_kerr: -TWO_PI * 135e3,
        },
        TWO_PI * 11e3,
    );

    for (f, g) in [(5.5e9, 15.0), (5.7e9, 15.0), (5.8e9, 20.0)] {
        let t = tune_operating_point(&device, f, g)?;
        let op = &t.operating_point;
        println!(
            "{:.2} GHz / {g} dB -> Vg {:.3} V, pump {:.4} GHz at {:.1}% ({:.1} dBm): {:.2} dB over {:.2} MHz",
            f / 1e9,
            t.gate_voltage,
            op.pump.frequency / 1e9,
            100.0 * op.fraction_of_critical,
            op.pump.dbm(),
            t.peak_gain_db,
            t.bandwidth_3db / 1e6,
        );
    }
    Ok(())
}
