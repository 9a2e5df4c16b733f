//! Steady states of the driven Kerr resonator and the hysteresis between
//! upward and downward frequency sweeps.
//!
//! `cargo run --example kerr_response`

use jpa_sim::constants::TWO_PI;
use jpa_sim::dynamics::{
    bifurcation_point, steady_states, sweep_trace, Direction, DriveTone, KerrResonatorParams,
};

fn main() -> jpa_sim::Result<()> {
    let p = KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 11e3, -135e3)?;
    let f_r = p.omega_r / TWO_PI;
    let critical = bifurcation_point(&p)?.critical_flux;

    // three coexisting states below the resonance at twice the critical drive
    let drive = DriveTone::from_flux(f_r - 12e6, 2.0 * critical)?;
    println!("drive {:.1} dBm at f_r - 12 MHz:", drive.dbm());
    for s in steady_states(&p, &drive) {
        println!(
            "  {:>6} branch: n = {:8.2}, stable = {}",
            s.branch.as_str(),
            s.photon_number,
            s.stable
        );
    }

    let grid: Vec<f64> = (0..=200)
        .map(|i| f_r - 40e6 + 50e6 * i as f64 / 200.0)
        .collect();
    let power = drive.dbm();
    let up = &sweep_trace(&p, &[power], &grid, Direction::Up)?[0];
    let down = &sweep_trace(&p, &[power], &grid, Direction::Down)?[0];
    println!(
        "\n{:>12} {:>10} {:>10}",
        "f - f_r (MHz)", "|S11| up", "|S11| down"
    );
    for i in (0..grid.len()).step_by(10) {
        println!(
            "{:>12.1} {:>10.4} {:>10.4}",
            (grid[i] - f_r) / 1e6,
            up.s11[i].norm(),
            down.s11[i].norm()
        );
    }
    let differ = up
        .s11
        .iter()
        .zip(&down.s11)
        .filter(|(a, b)| (*a - *b).norm() > 1e-3)
        .count();
    println!(
        "\n{differ} of {} points differ between the two sweep directions",
        grid.len()
    );
    Ok(())
}
