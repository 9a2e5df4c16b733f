//! Recover resonator parameters from a noisy multi-power reflection dataset.
//!
//! `cargo run --release --example parameter_fit`

use jpa_sim::constants::TWO_PI;
use jpa_sim::dynamics::{critical_flux_at, Direction, DriveTone, KerrResonatorParams};
use jpa_sim::fitkit::{initial_guess, linear_prefit, nonlinear_fit, synthesize};

fn main() -> jpa_sim::Result<()> {
    let truth = KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 11e3, -135e3)?;
    let f_r = truth.omega_r / TWO_PI;
    let fc = critical_flux_at(&truth, 0.0)?;
    let powers = [0.01, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|x| DriveTone::from_flux(f_r, x * fc).map(|d| d.dbm()))
        .collect::<jpa_sim::Result<Vec<_>>>()?;
    let g = truth.total_linear_loss() / TWO_PI;
    let grid: Vec<f64> = (0..401)
        .map(|i| f_r - 5.0 * g + 10.0 * g * i as f64 / 400.0)
        .collect();
    let data = synthesize(&truth, &powers, &grid, Direction::Up, Some(40.0), 2024, 0.0)?;

    let lin = linear_prefit(data.weakest())?;
    println!(
        "circle fit: f_r {:.6} GHz, g1 {:.3} MHz, g2 {:.3} MHz, overcoupled {}",
        lin.omega_r / TWO_PI / 1e9,
        lin.gamma1 / TWO_PI / 1e6,
        lin.gamma2 / TWO_PI / 1e6,
        lin.overcoupled
    );

    let init = initial_guess(&data)?;
    let r = nonlinear_fit(&data, &init)?;
    let names = ["f_r", "g1", "g2", "g3", "K"];
    let want = [
        truth.omega_r,
        truth.gamma1,
        truth.gamma2,
        truth.gamma3,
        truth.kerr,
    ]
    .map(|v| v / TWO_PI);
    let got = r.params_hz();
    println!(
        "converged {} after {} iterations, residual rms {:.2e}",
        r.converged, r.iterations, r.residual_rms
    );
    for i in 0..5 {
        println!(
            "{:>4}: {:>16.3} Hz +/- {:>10.3}  (truth {:>16.3})",
            names[i],
            got[i],
            r.std_errors[i] / TWO_PI,
            want[i]
        );
    }
    Ok(())
}
