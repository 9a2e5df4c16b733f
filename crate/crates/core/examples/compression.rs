//! Gain compression from the truncated pump/signal/idler harmonic balance.
//!
//! `cargo run --release --example compression`

use jpa_sim::amplifier::{compression_curve, operating_point_for_gain, peak_response};
use jpa_sim::dynamics::KerrResonatorParams;

fn main() -> jpa_sim::Result<()> {
    let p = KerrResonatorParams::from_hz(6.155e9, 11.0e6, 0.95e6, 11e3, -111e3)?;
    let powers: Vec<f64> = (0..=70).map(|i| -200.0 + i as f64).collect();
    for target in [12.0, 16.0, 20.0] {
        let op = operating_point_for_gain(p, 6.13e9, target)?;
        let fs = op.signal_frequency(peak_response(&op).delta);
        let c = compression_curve(&op, fs, &powers)?;
        println!(
            "{target} dB: small-signal {:.2} dB, P1dB {}",
            c.small_signal_db,
            c.p1db
                .map_or("beyond the grid".into(), |v| format!("{v:.1} dBm"))
        );
        for (pw, g) in c.signal_powers_dbm.iter().zip(&c.gain_db).step_by(10) {
            println!("  {pw:>7.1} dBm  {g:>6.2} dB");
        }
    }
    Ok(())
}
