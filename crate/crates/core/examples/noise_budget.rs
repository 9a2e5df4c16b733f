//! Added noise of the paramp, its spectrum, and the two-stage budget with a
//! HEMT behind it.
//!
//! `cargo run --example noise_budget`

use jpa_sim::amplifier::{operating_point_for_gain, peak_response};
use jpa_sim::dynamics::KerrResonatorParams;
use jpa_sim::noise::{
    friis_cascade, loss_degraded_added_noise, noise_spectrum, sql_quanta, sql_temperature, Stage,
};

fn main() -> jpa_sim::Result<()> {
    let p = KerrResonatorParams::from_hz(5.885e9, 11.0e6, 0.95e6, 11e3, -111e3)?;
    println!(
        "quantum limit: {} quanta, {:.1} mK at 6 GHz",
        sql_quanta(),
        1e3 * sql_temperature(6e9)?
    );

    let op = operating_point_for_gain(p, 5.860e9, 20.0)?;
    let paramp = loss_degraded_added_noise(&p, op.photon_number())?;
    let hemt = 15.0;
    let budget = friis_cascade(&[
        Stage {
            gain: 100.0,
            added_quanta: paramp,
        },
        Stage {
            gain: 1e4,
            added_quanta: hemt,
        },
    ])?;
    println!(
        "paramp {paramp:.3} quanta, HEMT {hemt} quanta -> system {:.3} quanta",
        budget.total_added_quanta
    );

    let peak = peak_response(&op);
    let bw = peak.bandwidth_3db.unwrap_or(1e6);
    let centre = op.signal_frequency(peak.delta);
    let grid: Vec<f64> = (0..=20)
        .map(|i| centre - 3.0 * bw + 6.0 * bw * i as f64 / 20.0)
        .collect();
    let spec = noise_spectrum(&op, hemt, &grid)?;
    println!(
        "\n{:>12} {:>9} {:>9} {:>9}",
        "f (GHz)", "gain dB", "paramp", "system"
    );
    for i in 0..grid.len() {
        println!(
            "{:>12.6} {:>9.2} {:>9.3} {:>9.3}",
            spec.freqs[i] / 1e9,
            spec.gain_db[i],
            spec.paramp_quanta[i],
            spec.system_quanta[i]
        );
    }
    Ok(())
}
