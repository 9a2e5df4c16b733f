//! Bistability onset and the fold powers bounding the hysteresis window.
//!
//! `cargo run --example bifurcation`

use jpa_sim::constants::TWO_PI;
use jpa_sim::dynamics::{bifurcation_point, folds_at, DriveTone, KerrResonatorParams};

fn main() -> jpa_sim::Result<()> {
    let p = KerrResonatorParams::from_hz(5.885e9, 11.0e6, 0.95e6, 11e3, -111e3)?;
    let f_r = p.omega_r / TWO_PI;
    let b = bifurcation_point(&p)?;
    let onset = DriveTone::from_flux(f_r - b.critical_detuning / TWO_PI, b.critical_flux)?;
    println!(
        "onset: detuning {:.3} MHz, {:.1} photons, {:.2} dBm",
        b.critical_detuning / TWO_PI / 1e6,
        b.critical_n,
        onset.dbm()
    );

    println!(
        "\n{:>14} {:>14} {:>14}",
        "f_d - f_r (MHz)", "low fold (dBm)", "high fold (dBm)"
    );
    for i in 0..=10 {
        let detuning = b.critical_detuning * (1.0 + 0.3 * i as f64);
        let f = f_r - detuning / TWO_PI;
        match folds_at(&p, detuning) {
            Some(folds) => println!(
                "{:>14.2} {:>14.2} {:>14.2}",
                (f - f_r) / 1e6,
                DriveTone::from_flux(f, folds.high_branch_end_flux)?.dbm(),
                DriveTone::from_flux(f, folds.low_branch_end_flux)?.dbm(),
            ),
            None => println!("{:>14.2} {:>14} {:>14}", (f - f_r) / 1e6, "-", "-"),
        }
    }
    Ok(())
}
