//! Four-wave-mixing signal and idler gain, and the gain-bandwidth product
//! at several pump strengths.
//!
//! `cargo run --example gain_curve`

use jpa_sim::amplifier::{
    gain_bandwidth_product, gain_curve, operating_point_for_gain, suggested_span,
    PumpOperatingPoint,
};
use jpa_sim::dynamics::KerrResonatorParams;

fn main() -> jpa_sim::Result<()> {
    let p = KerrResonatorParams::from_hz(5.885e9, 11.0e6, 0.95e6, 11e3, -111e3)?;
    let fp = 5.860e9;

    let op = PumpOperatingPoint::new(p, fp, 0.95)?;
    println!(
        "95% of critical: pump {:.1} dBm, {:.1} photons",
        op.pump.dbm(),
        op.photon_number()
    );

    let mut curves = Vec::new();
    for target in [12.0, 16.0, 20.0, 24.0] {
        let op = operating_point_for_gain(p, fp, target)?;
        let c = gain_curve(&op, suggested_span(&op), 2001)?;
        let k = c.peak_index();
        println!(
            "target {target:>4.1} dB: fraction {:.5}, peak {:.2} dB at {:.4} GHz (idler {:.2} dB), BW {:.3} MHz",
            op.fraction_of_critical,
            c.peak_gain,
            c.signal_freqs[k] / 1e9,
            c.idler_gain[k],
            c.bandwidth_3db.unwrap_or(f64::NAN) / 1e6,
        );
        curves.push(c);
    }
    let (gbw, spread) = gain_bandwidth_product(&curves)?;
    println!(
        "sqrt(G) x BW = {:.2} MHz, spread {:.1}%",
        gbw / 1e6,
        100.0 * spread
    );
    Ok(())
}
